"""BiLSTM sequence classifier with exact analytic gradients, in plain numpy.

One BiLSTM layer runs over the utterances of a conversation (one fused
feature vector per position), both direction states are concatenated,
dropout is applied in train mode, and a fully-connected projection plus
softmax yields per-position emotion probabilities. All training math is
float64 so the finite-difference gradient check is meaningful.

Gate layout: the stacked weight matrices hold the input (i), forget (f),
candidate (g), and output (o) gates in that row order, H rows each.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

NUM_CLASSES = 9

CHECKPOINT_MAGIC = b"EMCK"


class CheckpointError(RuntimeError):
    """Checkpoint file is malformed or incompatible."""


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden_dim: int = 256
    num_classes: int = NUM_CLASSES
    dropout_rate: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.input_dim <= 0 or self.hidden_dim <= 0:
            raise ValueError("input_dim and hidden_dim must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 50
    patience: int = 5
    clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("learning_rate", "beta1", "beta2", "epsilon", "clip_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be at least 1")


@dataclass
class ModelParams:
    """All trainable tensors; per direction: Wx (4H,D), Wh (4H,H), b (4H,)."""

    wx_f: np.ndarray
    wh_f: np.ndarray
    b_f: np.ndarray
    wx_b: np.ndarray
    wh_b: np.ndarray
    b_b: np.ndarray
    fc_w: np.ndarray  # (2H, C)
    fc_b: np.ndarray  # (C,)

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "wx_f": self.wx_f, "wh_f": self.wh_f, "b_f": self.b_f,
            "wx_b": self.wx_b, "wh_b": self.wh_b, "b_b": self.b_b,
            "fc_w": self.fc_w, "fc_b": self.fc_b,
        }

    def copy(self) -> "ModelParams":
        return ModelParams(**{name: arr.copy() for name, arr in self.tensors().items()})

    @property
    def hidden_dim(self) -> int:
        return self.wh_f.shape[1]

    @property
    def input_dim(self) -> int:
        return self.wx_f.shape[1]

    @property
    def num_classes(self) -> int:
        return self.fc_b.shape[0]


def init_params(config: ModelConfig) -> ModelParams:
    """Seed-deterministic init: uniform in +/- 1/sqrt(fan_in), forget bias 1."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    h, d, c = config.hidden_dim, config.input_dim, config.num_classes

    def uniform(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    def direction() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        wx = uniform((4 * h, d), d)
        wh = uniform((4 * h, h), h)
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0  # forget gate rows
        return wx, wh, b

    wx_f, wh_f, b_f = direction()
    wx_b, wh_b, b_b = direction()
    return ModelParams(
        wx_f=wx_f, wh_f=wh_f, b_f=b_f,
        wx_b=wx_b, wh_b=wh_b, b_b=b_b,
        fc_w=uniform((2 * h, c), 2 * h),
        fc_b=np.zeros(c),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class _DirectionTrace:
    """Per-timestep activations of one LSTM direction, kept for backprop."""

    xs: list[np.ndarray] = field(default_factory=list)
    hs: list[np.ndarray] = field(default_factory=list)  # h_0 .. h_T (h_0 = 0)
    cs: list[np.ndarray] = field(default_factory=list)  # c_0 .. c_T
    gates: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = field(
        default_factory=list
    )
    c_tanh: list[np.ndarray] = field(default_factory=list)


def _run_direction(
    wx: np.ndarray, wh: np.ndarray, b: np.ndarray, inputs: Sequence[np.ndarray]
) -> _DirectionTrace:
    h_dim = wh.shape[1]
    trace = _DirectionTrace()
    h = np.zeros(h_dim)
    c = np.zeros(h_dim)
    trace.hs.append(h)
    trace.cs.append(c)
    for x in inputs:
        z = wx @ x + wh @ h + b
        i = _sigmoid(z[:h_dim])
        f = _sigmoid(z[h_dim : 2 * h_dim])
        g = np.tanh(z[2 * h_dim : 3 * h_dim])
        o = _sigmoid(z[3 * h_dim :])
        c = f * c + i * g
        ct = np.tanh(c)
        h = o * ct
        trace.xs.append(x)
        trace.gates.append((i, f, g, o))
        trace.cs.append(c)
        trace.c_tanh.append(ct)
        trace.hs.append(h)
    return trace


@dataclass
class _ForwardTrace:
    fwd: _DirectionTrace
    bwd: _DirectionTrace
    concat: list[np.ndarray]
    dropped: list[np.ndarray]
    drop_mask: Optional[list[np.ndarray]]
    logits: np.ndarray  # (T, C)


def _forward_trace(
    params: ModelParams,
    sequence: Sequence[np.ndarray],
    train_mode: bool,
    dropout_rate: float,
    rng: Optional[np.random.Generator],
) -> _ForwardTrace:
    if len(sequence) == 0:
        raise ValueError("forward needs a non-empty sequence")
    d = params.input_dim
    inputs = []
    for pos, x in enumerate(sequence):
        arr = np.asarray(x, dtype=np.float64).ravel()
        if arr.shape[0] != d:
            raise ValueError(f"position {pos}: feature dim {arr.shape[0]} != input_dim {d}")
        inputs.append(arr)

    fwd = _run_direction(params.wx_f, params.wh_f, params.b_f, inputs)
    bwd = _run_direction(params.wx_b, params.wh_b, params.b_b, inputs[::-1])

    length = len(inputs)
    concat = [
        np.concatenate([fwd.hs[t + 1], bwd.hs[length - t]]) for t in range(length)
    ]

    drop_mask: Optional[list[np.ndarray]] = None
    dropped = concat
    if train_mode and dropout_rate > 0.0:
        if rng is None:
            raise ValueError("train_mode dropout needs the run PRNG")
        keep = 1.0 - dropout_rate
        drop_mask = [
            (rng.random(concat[0].shape[0]) < keep).astype(np.float64) / keep
            for _ in range(length)
        ]
        dropped = [u * m for u, m in zip(concat, drop_mask)]

    logits = np.stack([u @ params.fc_w + params.fc_b for u in dropped])
    return _ForwardTrace(
        fwd=fwd, bwd=bwd, concat=concat, dropped=dropped, drop_mask=drop_mask, logits=logits
    )


def forward(
    params: ModelParams,
    sequence: Sequence[np.ndarray],
    train_mode: bool = False,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Per-position logits, shape (len(sequence), num_classes).

    Bidirectional hidden states are concatenated before the FC layer;
    dropout is applied to the BiLSTM output only when ``train_mode``.
    """
    return _forward_trace(params, sequence, train_mode, dropout_rate, rng).logits


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (max subtraction before exponentiation)."""
    arr = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("softmax requires finite logits")
    shifted = arr - arr.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def predict(probabilities: np.ndarray) -> np.ndarray:
    """Argmax class indices; ties resolve to the lowest (canonical) index."""
    return np.argmax(np.asarray(probabilities), axis=-1)


def _zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.tensors().items()}


def _backward_direction(
    wx: np.ndarray,
    wh: np.ndarray,
    trace: _DirectionTrace,
    dhs: Sequence[np.ndarray],
    grads: dict[str, np.ndarray],
    prefix: str,
) -> list[np.ndarray]:
    """BPTT through one direction; returns d(loss)/d(input) per step."""
    h_dim = wh.shape[1]
    length = len(trace.xs)
    dh_carry = np.zeros(h_dim)
    dc = np.zeros(h_dim)
    dxs = [np.zeros(wx.shape[1]) for _ in range(length)]
    for t in range(length - 1, -1, -1):
        i, f, g, o = trace.gates[t]
        ct = trace.c_tanh[t]
        dh = dhs[t] + dh_carry
        do = dh * ct
        dc = dc + dh * o * (1.0 - ct * ct)
        di = dc * g
        df = dc * trace.cs[t]  # cs[t] is c_{t-1}
        dg = dc * i
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ]
        )
        grads[f"wx_{prefix}"] += np.outer(dz, trace.xs[t])
        grads[f"wh_{prefix}"] += np.outer(dz, trace.hs[t])  # hs[t] is h_{t-1}
        grads[f"b_{prefix}"] += dz
        dxs[t] = wx.T @ dz
        dh_carry = wh.T @ dz
        dc = dc * f
    return dxs


def loss_and_grad(
    params: ModelParams,
    sequence: Sequence[np.ndarray],
    labels: Sequence[Optional[int]],
    train_mode: bool = False,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    want_input_grads: bool = False,
) -> tuple[float, dict[str, np.ndarray], Optional[list[np.ndarray]]]:
    """Mean cross-entropy over labeled positions plus analytic gradients.

    ``labels[t]`` is a class index or None; None positions (unlabeled or
    inaudible turns) contribute zero loss and zero gradient but still shape
    the recurrent states around them.
    """
    if len(labels) != len(sequence):
        raise ValueError("labels must align with the sequence")
    mask = [t for t, y in enumerate(labels) if y is not None]
    if not mask:
        raise ValueError("all positions are masked out; nothing to learn from")

    trace = _forward_trace(params, sequence, train_mode, dropout_rate, rng)
    probs = softmax(trace.logits)
    n = len(mask)
    loss = 0.0
    dlogits = np.zeros_like(trace.logits)
    for t in mask:
        y = labels[t]
        if not 0 <= y < params.num_classes:
            raise ValueError(f"label {y} out of range at position {t}")
        loss -= np.log(max(probs[t, y], 1e-300))
        dlogits[t] = probs[t]
        dlogits[t, y] -= 1.0
    loss /= n
    dlogits /= n

    grads = _zero_grads(params)
    length = len(sequence)
    dconcat: list[np.ndarray] = []
    for t in range(length):
        grads["fc_w"] += np.outer(trace.dropped[t], dlogits[t])
        grads["fc_b"] += dlogits[t]
        du = params.fc_w @ dlogits[t]
        if trace.drop_mask is not None:
            du = du * trace.drop_mask[t]
        dconcat.append(du)

    h = params.hidden_dim
    dh_fwd = [dconcat[t][:h] for t in range(length)]
    dh_bwd = [dconcat[length - 1 - t][h:] for t in range(length)]  # bwd time order

    dx_fwd = _backward_direction(params.wx_f, params.wh_f, trace.fwd, dh_fwd, grads, "f")
    dx_bwd = _backward_direction(params.wx_b, params.wh_b, trace.bwd, dh_bwd, grads, "b")

    input_grads: Optional[list[np.ndarray]] = None
    if want_input_grads:
        input_grads = [
            dx_fwd[t] + dx_bwd[length - 1 - t] for t in range(length)
        ]
    return loss, grads, input_grads


# ── Optimizer ─────────────────────────────────────────────────────────────

@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def clip_by_global_norm(grads: dict[str, np.ndarray], clip_norm: float) -> float:
    """Scale all gradients in place so the global L2 norm is <= clip_norm."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total > clip_norm and total > 0.0:
        scale = clip_norm / total
        for g in grads.values():
            g *= scale
    return total


def train_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> None:
    """One adaptive-moment update with bias correction, applied in place.

    Global-norm clipping runs first; non-finite gradients are rejected.
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise ValueError(f"non-finite gradient in tensor {name!r}")
    clip_by_global_norm(grads, config.clip_norm)
    tensors = params.tensors()
    if not state.m:
        state.m = {name: np.zeros_like(arr) for name, arr in tensors.items()}
        state.v = {name: np.zeros_like(arr) for name, arr in tensors.items()}
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    bias1 = 1.0 - b1**state.step
    bias2 = 1.0 - b2**state.step
    for name, arr in tensors.items():
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / bias1
        v_hat = state.v[name] / bias2
        arr -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)


# ── Checkpoints ───────────────────────────────────────────────────────────

def save_checkpoint(
    path: str | Path,
    config: ModelConfig,
    params: ModelParams,
    state: Optional[AdamState] = None,
    mask_label: str = "",
    providers: Optional[dict[str, str]] = None,
) -> None:
    """Self-describing checkpoint: JSON header plus float64 LE tensor blobs.

    The header records the model config, the ablation mask label, and the
    provider identities that produced the features, so a checkpoint can only
    be evaluated against compatible features.
    """
    tensors = dict(params.tensors())
    opt_meta: dict = {"step": 0}
    if state is not None and state.m:
        opt_meta["step"] = state.step
        for name in params.tensors():
            tensors[f"adam_m.{name}"] = state.m[name]
            tensors[f"adam_v.{name}"] = state.v[name]
    header = {
        "format": "emoturn-checkpoint-v1",
        "config": {
            "input_dim": config.input_dim,
            "hidden_dim": config.hidden_dim,
            "num_classes": config.num_classes,
            "dropout_rate": config.dropout_rate,
            "seed": config.seed,
        },
        "mask": mask_label,
        "providers": providers or {},
        "optimizer": opt_meta,
        "tensors": [
            {"name": name, "shape": list(arr.shape)} for name, arr in tensors.items()
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write(struct.pack("<I", len(header_bytes)))
        handle.write(header_bytes)
        for name, _meta in ((t["name"], t) for t in header["tensors"]):
            handle.write(np.ascontiguousarray(tensors[name], dtype="<f8").tobytes())


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    state: AdamState
    mask_label: str
    providers: dict[str, str]


def load_checkpoint(path: str | Path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("bad checkpoint magic")
    (header_len,) = struct.unpack_from("<I", blob, 4)
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from None
    if header.get("format") != "emoturn-checkpoint-v1":
        raise CheckpointError(f"unknown checkpoint format {header.get('format')!r}")
    offset = 8 + header_len
    tensors: dict[str, np.ndarray] = {}
    for meta in header["tensors"]:
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 8
        if end > len(blob):
            raise CheckpointError(f"checkpoint truncated at tensor {meta['name']!r}")
        tensors[meta["name"]] = np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise CheckpointError("trailing bytes after final tensor")

    cfg_raw = header["config"]
    config = ModelConfig(
        input_dim=int(cfg_raw["input_dim"]),
        hidden_dim=int(cfg_raw["hidden_dim"]),
        num_classes=int(cfg_raw["num_classes"]),
        dropout_rate=float(cfg_raw["dropout_rate"]),
        seed=int(cfg_raw["seed"]),
    )
    try:
        params = ModelParams(
            **{name: tensors[name] for name in
               ("wx_f", "wh_f", "b_f", "wx_b", "wh_b", "b_b", "fc_w", "fc_b")}
        )
    except KeyError as exc:
        raise CheckpointError(f"checkpoint missing tensor {exc}") from None
    state = AdamState(step=int(header["optimizer"].get("step", 0)))
    if any(name.startswith("adam_m.") for name in tensors):
        state.m = {n[len("adam_m."):]: t for n, t in tensors.items() if n.startswith("adam_m.")}
        state.v = {n[len("adam_v."):]: t for n, t in tensors.items() if n.startswith("adam_v.")}
    return Checkpoint(
        config=config,
        params=params,
        state=state,
        mask_label=str(header.get("mask", "")),
        providers={str(k): str(v) for k, v in header.get("providers", {}).items()},
    )
