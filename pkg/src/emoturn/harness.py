"""Experiment harness: training runs, evaluation, ablations, random search.

A run is fully described by a RunConfig; everything downstream (splits,
parameter init, dropout, shuffle order) derives its randomness from the
seeds inside it, so rerunning the same config reproduces history and
metrics bit for bit. Artifacts land in a directory named by the config's
content hash.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from hashlib import blake2b
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import EMOTION_INDEX, Corpus, EmotionLabel, Utterance, load_manifest, split
from .features import (
    ABLATION_ROWS,
    AblationMask,
    CacheKey,
    FeatureCache,
    MockProvider,
    SignalHook,
    fuse,
)
from .lexicon import (
    Lexicon,
    TransliterationTable,
    load_lexicon,
    load_transliteration,
    utterance_vad,
)
from .metrics import (
    MetricsReport,
    cohen_kappa,
    confusion_matrix,
    report_from_confusion,
)
from .model import (
    AdamState,
    Checkpoint,
    CheckpointError,
    ModelConfig,
    ModelParams,
    TrainConfig,
    forward,
    init_params,
    loss_and_grad,
    predict,
    save_checkpoint,
    softmax,
    train_step,
)
from .rng import SplitMix64, derive_seed
from .synthetic import SyntheticBundle, gen_synthetic

# Re-exported here because agreement and synthetic-corpus generation are part
# of the harness surface even though they live in their own files.
__all__ = [
    "RunConfig",
    "FeaturePipeline",
    "TrainResult",
    "train_run",
    "evaluate",
    "AblationRow",
    "AblationReport",
    "ablate",
    "SearchSpace",
    "Trial",
    "SearchResult",
    "random_search",
    "cohen_kappa",
    "gen_synthetic",
    "SyntheticBundle",
    "MetricsReport",
]


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines one training run."""

    manifest_path: str
    mask: AblationMask
    model: ModelConfig
    train: TrainConfig
    split_seed: int = 0
    split_mode: str = "conversation"
    provider_seed: int = 0
    lexicon_path: Optional[str] = None
    translit_path: Optional[str] = None
    hook_path: Optional[str] = None
    cache_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.model.input_dim != self.mask.fused_dim:
            raise ValueError(
                f"model input_dim {self.model.input_dim} does not match "
                f"mask {self.mask.label} fused dim {self.mask.fused_dim}"
            )
        if self.mask.use_vad and self.lexicon_path is None:
            raise ValueError("mask enables the VAD block but no lexicon_path is set")
        if self.split_mode not in ("utterance", "conversation"):
            raise ValueError(f"unknown split_mode {self.split_mode!r}")

    def to_json(self) -> dict:
        return {
            "manifest_path": self.manifest_path,
            "mask": self.mask.label,
            "model": {
                "input_dim": self.model.input_dim,
                "hidden_dim": self.model.hidden_dim,
                "num_classes": self.model.num_classes,
                "dropout_rate": self.model.dropout_rate,
                "seed": self.model.seed,
            },
            "train": {
                "learning_rate": self.train.learning_rate,
                "beta1": self.train.beta1,
                "beta2": self.train.beta2,
                "epsilon": self.train.epsilon,
                "max_epochs": self.train.max_epochs,
                "patience": self.train.patience,
                "clip_norm": self.train.clip_norm,
                "seed": self.train.seed,
            },
            "split_seed": self.split_seed,
            "split_mode": self.split_mode,
            "provider_seed": self.provider_seed,
            "lexicon_path": self.lexicon_path,
            "translit_path": self.translit_path,
            "hook_path": self.hook_path,
        }

    def content_hash(self) -> str:
        """Digest of the config fields (not of the files they point to)."""
        blob = json.dumps(self.to_json(), sort_keys=True).encode("utf-8")
        return blake2b(blob, digest_size=8).hexdigest()


def _lexicon_digest(lexicon: Lexicon) -> str:
    lines = "\n".join(
        f"{e.key}\t{e.valence!r}\t{e.arousal!r}\t{e.dominance!r}"
        for e in lexicon.entries()
    )
    return blake2b(lines.encode("utf-8"), digest_size=8).hexdigest()


class FeaturePipeline:
    """Turns utterances into fused feature vectors for one ablation mask.

    Speech and text embeddings come from the provider (optionally through
    the on-disk cache); VAD statistics are recomputed from the lexicon each
    time since a lookup is cheaper than a disk read.
    """

    def __init__(
        self,
        mask: AblationMask,
        provider,
        lexicon: Optional[Lexicon] = None,
        transliteration: Optional[TransliterationTable] = None,
        cache: Optional[FeatureCache] = None,
    ) -> None:
        if mask.use_vad and lexicon is None:
            raise ValueError("VAD block requires a lexicon")
        self.mask = mask
        self.provider = provider
        self.lexicon = lexicon
        self.transliteration = transliteration
        self.cache = cache

    @classmethod
    def from_config(cls, rc: RunConfig) -> "FeaturePipeline":
        hook = SignalHook.load(rc.hook_path) if rc.hook_path else None
        provider = MockProvider(seed=rc.provider_seed, hook=hook)
        lexicon = load_lexicon(rc.lexicon_path) if rc.lexicon_path else None
        translit = (
            load_transliteration(rc.translit_path) if rc.translit_path else None
        )
        cache = FeatureCache(rc.cache_dir) if rc.cache_dir else None
        return cls(rc.mask, provider, lexicon, translit, cache)

    @property
    def providers(self) -> dict[str, str]:
        """Identity of each enabled block's extractor, for checkpoint compat."""
        out: dict[str, str] = {}
        if self.mask.use_speech:
            out["speech"] = str(self.provider.provider_id("speech"))
        if self.mask.use_text:
            out["text"] = str(self.provider.provider_id("text"))
        if self.mask.use_vad:
            out["vad"] = f"vad-lexicon@{_lexicon_digest(self.lexicon)}"
        return out

    def _cached(self, utt_id: str, kind: str, key: str, compute) -> np.ndarray:
        if self.cache is None:
            return compute()
        cache_key = CacheKey(utt_id, self.provider.provider_id(kind), kind)
        return self.cache.get_or_compute(cache_key, compute)

    def utterance_vector(self, utt: Utterance) -> np.ndarray:
        speech = text = vad = None
        if self.mask.use_speech:
            speech = self._cached(
                utt.id, "speech", utt.audio.key,
                lambda: self.provider.speech_embed(utt.audio.key),
            )
        if self.mask.use_text:
            text = self._cached(
                utt.id, "text", utt.transcript,
                lambda: self.provider.text_embed(utt.transcript),
            )
        if self.mask.use_vad:
            vad = utterance_vad(
                utt.transcript, self.lexicon, self.transliteration
            ).as_vector()
        return fuse(self.mask, speech=speech, text=text, vad=vad)

    def conversation_features(
        self, conv
    ) -> tuple[list[np.ndarray], list[Optional[int]]]:
        xs = [self.utterance_vector(u) for u in conv.utterances]
        ys = [
            EMOTION_INDEX[u.labels.emotion] if u.labeled else None
            for u in conv.utterances
        ]
        return xs, ys


ConvData = tuple[list[np.ndarray], list[Optional[int]]]


def _prepare(pipeline: FeaturePipeline, corpus: Corpus) -> list[ConvData]:
    """Feature sequences per conversation; all-unlabeled ones are dropped."""
    data = []
    for conv in corpus:
        xs, ys = pipeline.conversation_features(conv)
        if any(y is not None for y in ys):
            data.append((xs, ys))
    return data


def _evaluate_prepared(params: ModelParams, data: Sequence[ConvData]) -> MetricsReport:
    trues: list[int] = []
    preds: list[int] = []
    for xs, ys in data:
        pred = predict(softmax(forward(params, xs)))
        for t, y in enumerate(ys):
            if y is not None:
                trues.append(y)
                preds.append(int(pred[t]))
    return report_from_confusion(confusion_matrix(trues, preds))


def _copy_state(state: AdamState) -> AdamState:
    return AdamState(
        step=state.step,
        m={k: v.copy() for k, v in state.m.items()},
        v={k: v.copy() for k, v in state.v.items()},
    )


def _dev_score(report: MetricsReport) -> float:
    # Model selection follows the headline metric; when no negative-class
    # examples exist the run cannot be ranked on it and scores zero.
    return 0.0 if report.negative.undefined else report.negative.value


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[dict]
    best_epoch: int
    best_dev_negative_precision: float
    run_dir: Optional[Path] = None


def train_run(rc: RunConfig, out_root: Optional[str | Path] = None) -> TrainResult:
    """Train under one config; early stopping on dev negative precision.

    Keeps the parameters from the best dev epoch, not the last one. When
    ``out_root`` is given, writes checkpoint.emck, history.jsonl, and the
    resolved config.json under ``out_root/<content_hash>/``.
    """
    corpus = load_manifest(rc.manifest_path)
    train_c, dev_c, _ = split(corpus, seed=rc.split_seed, mode=rc.split_mode)
    pipeline = FeaturePipeline.from_config(rc)
    train_data = _prepare(pipeline, train_c)
    dev_data = _prepare(pipeline, dev_c)
    if not train_data or not dev_data:
        raise ValueError("empty train or dev split; corpus too small to train on")

    params = init_params(rc.model)
    state = AdamState()
    drop_rng = np.random.Generator(
        np.random.PCG64(derive_seed("dropout", rc.model.seed, rc.train.seed))
    )
    order_rng = SplitMix64(derive_seed("order", rc.train.seed))

    best_params = params.copy()
    best_state = _copy_state(state)
    best_score = -math.inf
    best_epoch = -1
    history: list[dict] = []
    for epoch in range(rc.train.max_epochs):
        order = list(range(len(train_data)))
        order_rng.shuffle(order)
        loss_sum = 0.0
        n_labeled = 0
        for i in order:
            xs, ys = train_data[i]
            loss, grads, _ = loss_and_grad(
                params, xs, ys,
                train_mode=True, dropout_rate=rc.model.dropout_rate, rng=drop_rng,
            )
            train_step(params, grads, state, rc.train)
            n = sum(1 for y in ys if y is not None)
            loss_sum += loss * n
            n_labeled += n
        dev_report = _evaluate_prepared(params, dev_data)
        score = _dev_score(dev_report)
        history.append(
            {
                "epoch": epoch,
                "train_loss": loss_sum / n_labeled,
                "dev": dev_report.summary(),
            }
        )
        if score > best_score:
            best_score = score
            best_epoch = epoch
            best_params = params.copy()
            best_state = _copy_state(state)
        elif epoch - best_epoch >= rc.train.patience:
            break

    checkpoint = Checkpoint(
        config=rc.model,
        params=best_params,
        state=best_state,
        mask_label=rc.mask.label,
        providers=pipeline.providers,
    )
    run_dir: Optional[Path] = None
    if out_root is not None:
        run_dir = Path(out_root) / rc.content_hash()
        run_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(
            run_dir / "checkpoint.emck",
            rc.model, best_params, best_state, rc.mask.label, pipeline.providers,
        )
        with (run_dir / "history.jsonl").open("w", encoding="utf-8") as handle:
            for entry in history:
                handle.write(json.dumps(entry, sort_keys=True) + "\n")
        config_blob = json.dumps(rc.to_json(), indent=2, sort_keys=True)
        (run_dir / "config.json").write_text(config_blob + "\n", encoding="utf-8")
    return TrainResult(checkpoint, history, best_epoch, best_score, run_dir)


def evaluate(checkpoint: Checkpoint, rc: RunConfig, which: str = "test") -> MetricsReport:
    """Metrics on one split, guarded by the checkpoint's feature contract.

    The checkpoint must have been trained with the same ablation mask and
    the same provider identities the config resolves to; anything else
    would silently score garbage features.
    """
    if which not in ("train", "dev", "test"):
        raise ValueError(f"unknown split {which!r}")
    pipeline = FeaturePipeline.from_config(rc)
    if checkpoint.mask_label != rc.mask.label:
        raise CheckpointError(
            f"checkpoint was trained with mask {checkpoint.mask_label!r}, "
            f"config selects {rc.mask.label!r}"
        )
    if checkpoint.providers != pipeline.providers:
        raise CheckpointError(
            f"checkpoint providers {checkpoint.providers} do not match the "
            f"configured pipeline {pipeline.providers}"
        )
    corpus = load_manifest(rc.manifest_path)
    parts = split(corpus, seed=rc.split_seed, mode=rc.split_mode)
    sub = parts[("train", "dev", "test").index(which)]
    data = _prepare(pipeline, sub)
    if not data:
        raise ValueError(f"split {which!r} has no labeled utterances")
    return _evaluate_prepared(checkpoint.params, data)


# ── Ablation suite ────────────────────────────────────────────────────────


@dataclass(frozen=True)
class AblationRow:
    """Test metrics for one mask; None marks an undefined group value."""

    label: str
    neutral: float
    anger: float
    sad: float
    frustrated: float
    negative: Optional[float]
    positive: Optional[float]


_ABLATION_COLUMNS = ("Features", "Neu", "Ang", "Sad", "Fru", "Neg", "Pos")


@dataclass(frozen=True)
class AblationReport:
    rows: tuple[AblationRow, ...]

    def _cells(self) -> list[list[str]]:
        def fmt(v: Optional[float]) -> str:
            return "-" if v is None else f"{v:.4f}"

        out = [list(_ABLATION_COLUMNS)]
        for r in self.rows:
            out.append(
                [r.label, fmt(r.neutral), fmt(r.anger), fmt(r.sad),
                 fmt(r.frustrated), fmt(r.negative), fmt(r.positive)]
            )
        return out

    def to_text(self) -> str:
        cells = self._cells()
        widths = [max(len(row[c]) for row in cells) for c in range(len(cells[0]))]
        lines = []
        for i, row in enumerate(cells):
            padded = [row[0].ljust(widths[0])] + [
                v.rjust(widths[c]) for c, v in enumerate(row) if c > 0
            ]
            lines.append("  ".join(padded).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        def fmt(v: Optional[float]) -> str:
            return "" if v is None else f"{v:.6f}"

        lines = ["features,neutral,anger,sad,frustrated,negative,positive"]
        for r in self.rows:
            lines.append(
                ",".join(
                    [r.label, fmt(r.neutral), fmt(r.anger), fmt(r.sad),
                     fmt(r.frustrated), fmt(r.negative), fmt(r.positive)]
                )
            )
        return "\n".join(lines) + "\n"


def _row_from_report(label: str, report: MetricsReport) -> AblationRow:
    def group(g) -> Optional[float]:
        return None if g.undefined else g.value

    return AblationRow(
        label=label,
        neutral=report.per_class[EmotionLabel.NEUTRAL].precision,
        anger=report.per_class[EmotionLabel.ANGER].precision,
        sad=report.per_class[EmotionLabel.SAD].precision,
        frustrated=report.per_class[EmotionLabel.FRUSTRATED].precision,
        negative=group(report.negative),
        positive=group(report.positive),
    )


def _with_mask(base: RunConfig, mask: AblationMask) -> RunConfig:
    model = replace(base.model, input_dim=mask.fused_dim)
    return replace(base, mask=mask, model=model)


def ablate(
    base: RunConfig,
    out_root: Optional[str | Path] = None,
    jobs: int = 1,
) -> AblationReport:
    """Train and score the five mask configurations from the same base.

    Only the mask (and the input_dim it implies) varies between rows; every
    seed stays fixed. Rows execute in parallel when ``jobs`` > 1, each run
    owning its own PRNG streams, and the report is assembled in fixed row
    order afterwards.
    """
    configs = [_with_mask(base, mask) for mask in ABLATION_ROWS]

    def one(rc: RunConfig) -> AblationRow:
        result = train_run(rc, out_root=out_root)
        report = evaluate(result.checkpoint, rc, which="test")
        return _row_from_report(rc.mask.label, report)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, configs))
    else:
        rows = [one(rc) for rc in configs]
    return AblationReport(tuple(rows))


# ── Random hyper-parameter search ─────────────────────────────────────────


@dataclass(frozen=True)
class SearchSpace:
    """Sampling ranges: log-uniform lr, choice-set hidden, uniform dropout."""

    lr_min: float = 1e-4
    lr_max: float = 1e-2
    hidden_choices: tuple[int, ...] = (64, 128, 256)
    dropout_min: float = 0.0
    dropout_max: float = 0.5

    def __post_init__(self) -> None:
        if not self.hidden_choices:
            raise ValueError("hidden_choices must not be empty")
        if not 0 < self.lr_min <= self.lr_max:
            raise ValueError("need 0 < lr_min <= lr_max")
        if not 0.0 <= self.dropout_min <= self.dropout_max < 1.0:
            raise ValueError("need 0 <= dropout_min <= dropout_max < 1")


@dataclass(frozen=True)
class Trial:
    index: int
    config: RunConfig
    dev_negative_precision: float


@dataclass(frozen=True)
class SearchResult:
    best: Trial
    trials: tuple[Trial, ...]


def sample_config(base: RunConfig, space: SearchSpace, rng: SplitMix64) -> RunConfig:
    log_lr = math.log(space.lr_min) + rng.uniform() * (
        math.log(space.lr_max) - math.log(space.lr_min)
    )
    hidden = rng.choice(space.hidden_choices)
    dropout = space.dropout_min + rng.uniform() * (
        space.dropout_max - space.dropout_min
    )
    model = replace(base.model, hidden_dim=hidden, dropout_rate=dropout)
    train = replace(base.train, learning_rate=math.exp(log_lr))
    return replace(base, model=model, train=train)


def random_search(
    base: RunConfig,
    space: SearchSpace,
    budget: int,
    seed: int,
    out_root: Optional[str | Path] = None,
    jobs: int = 1,
) -> SearchResult:
    """Sample ``budget`` configs from the space and keep the dev-best one.

    All configs are drawn up front from one seeded stream, so the candidate
    set is identical whether trials then run serially or in a pool. Ties on
    the dev score go to the earlier sample index.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = SplitMix64(derive_seed("search", seed))
    configs = [sample_config(base, space, rng) for _ in range(budget)]

    def score(rc: RunConfig) -> float:
        return train_run(rc, out_root=out_root).best_dev_negative_precision

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(score, configs))
    else:
        scores = [score(rc) for rc in configs]
    trials = tuple(
        Trial(i, rc, s) for i, (rc, s) in enumerate(zip(configs, scores))
    )
    best = trials[0]
    for trial in trials[1:]:
        if trial.dev_negative_precision > best.dev_negative_precision:
            best = trial
    return SearchResult(best=best, trials=trials)
