"""Feature providers, ablation-masked fusion, and the on-disk feature cache.

Speech/text encoders and ASR are out-of-process adapters behind a small
file-based contract; the bundled mock provider generates deterministic
pseudo-random vectors so the whole pipeline runs with no external model. The
cache stores one little-endian float32 record per (utterance, provider,
block) key with a CRC32 guarding against corruption.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import subprocess
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .corpus import INAUDIBLE_MARKER, EMOTIONS

EMBED_DIM = 768
VAD_DIM = 10

CACHE_MAGIC = b"EMFV"


class AdapterError(RuntimeError):
    """External adapter failed or returned malformed output."""


class CacheCorruption(RuntimeError):
    """A cache record failed its integrity checks."""


@dataclass(frozen=True)
class ProviderId:
    """Identity of one feature extractor; (name, version) fixes semantics."""

    name: str
    version: str

    def __str__(self) -> str:
        return f"{self.name}@{self.version}"


@dataclass(frozen=True)
class AblationMask:
    """Which feature blocks are concatenated into the model input."""

    use_speech: bool = True
    use_text: bool = False
    use_vad: bool = False

    def __post_init__(self) -> None:
        if not (self.use_speech or self.use_text or self.use_vad):
            raise ValueError("ablation mask must enable at least one block")

    @property
    def fused_dim(self) -> int:
        return EMBED_DIM * self.use_speech + EMBED_DIM * self.use_text + VAD_DIM * self.use_vad

    @property
    def label(self) -> str:
        parts = []
        if self.use_text:
            parts.append("T")
        if self.use_speech:
            parts.append("W")
        if self.use_vad:
            parts.append("VAD")
        return "+".join(parts)

    @classmethod
    def parse(cls, label: str) -> "AblationMask":
        parts = {p.strip().upper() for p in label.split("+") if p.strip()}
        unknown = parts - {"T", "W", "VAD"}
        if unknown:
            raise ValueError(f"unknown ablation block(s): {sorted(unknown)}")
        return cls(use_speech="W" in parts, use_text="T" in parts, use_vad="VAD" in parts)


ABLATION_ROWS: tuple[AblationMask, ...] = (
    AblationMask.parse("W"),
    AblationMask.parse("T+W"),
    AblationMask.parse("W+VAD"),
    AblationMask.parse("T+VAD"),
    AblationMask.parse("T+W+VAD"),
)


def fuse(
    mask: AblationMask,
    speech: Optional[np.ndarray] = None,
    text: Optional[np.ndarray] = None,
    vad: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Concatenate enabled blocks in fixed [speech | text | vad] order.

    Blocks disabled by the mask are excluded entirely, never zero-filled; an
    enabled block must be present with its exact dimensionality.
    """
    blocks: list[np.ndarray] = []
    for enabled, block, name, dim in (
        (mask.use_speech, speech, "speech", EMBED_DIM),
        (mask.use_text, text, "text", EMBED_DIM),
        (mask.use_vad, vad, "vad", VAD_DIM),
    ):
        if not enabled:
            continue
        if block is None:
            raise ValueError(f"mask enables {name} but no {name} block was given")
        arr = np.asarray(block, dtype=np.float64).ravel()
        if arr.shape[0] != dim:
            raise ValueError(f"{name} block has dim {arr.shape[0]}, expected {dim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} block contains non-finite values")
        blocks.append(arr)
    return np.concatenate(blocks)


# ── Signal hooks for the synthetic corpus generator ───────────────────────

@dataclass(frozen=True)
class SignalHook:
    """Maps mock-provider keys to class indices for planted class structure.

    ``by_audio`` keys speech extraction (audio-ref keys); ``by_text`` keys
    text extraction (transcript strings). ``strength`` scales the planted
    class direction per block kind; absent kinds receive no injection.
    """

    seed: int
    by_audio: Mapping[str, int]
    by_text: Mapping[str, int]
    strength: Mapping[str, float]

    def class_of(self, kind: str, key: str) -> Optional[int]:
        if kind == "speech":
            return self.by_audio.get(key)
        if kind == "text":
            return self.by_text.get(key)
        return None

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "by_audio": dict(self.by_audio),
            "by_text": dict(self.by_text),
            "strength": dict(self.strength),
        }

    @classmethod
    def from_json(cls, raw: dict) -> "SignalHook":
        return cls(
            seed=int(raw["seed"]),
            by_audio={k: int(v) for k, v in raw["by_audio"].items()},
            by_text={k: int(v) for k, v in raw["by_text"].items()},
            strength={k: float(v) for k, v in raw["strength"].items()},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SignalHook":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _key_rng(*parts: str) -> np.random.Generator:
    digest = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=8).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))


def _unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    vec = rng.uniform(-1.0, 1.0, size=dim)
    norm = float(np.linalg.norm(vec))
    return (vec / norm).astype(np.float32)


def class_directions(seed: int, dim: int) -> np.ndarray:
    """Fixed per-class unit directions used for signal injection."""
    return np.stack(
        [_unit_vector(_key_rng("class-dir", str(seed), str(k)), dim) for k in range(len(EMOTIONS))]
    )


class MockProvider:
    """Deterministic stand-in for the speech and text encoders.

    Each vector is a unit-norm pseudo-random function of (seed, block kind,
    key). When a signal hook names the key, the hook's class direction is
    added at the configured strength, planting linearly recoverable class
    structure for that block.
    """

    def __init__(self, seed: int = 0, hook: Optional[SignalHook] = None) -> None:
        self.seed = seed
        self.hook = hook
        self._dirs: dict[int, np.ndarray] = {}

    def provider_id(self, kind: str) -> ProviderId:
        # The hook changes the emitted vectors, so it is part of the
        # extractor's identity; otherwise a checkpoint trained on hooked
        # features would silently evaluate against unhooked ones.
        version = f"seed{self.seed}"
        if self.hook is not None:
            blob = json.dumps(self.hook.to_json(), sort_keys=True).encode("utf-8")
            version += f"+hook{hashlib.blake2b(blob, digest_size=4).hexdigest()}"
        return ProviderId(name=f"mock-{kind}", version=version)

    def _embed(self, kind: str, key: str) -> np.ndarray:
        rng = _key_rng("mock", kind, str(self.seed), key)
        vec = _unit_vector(rng, EMBED_DIM).astype(np.float64)
        if self.hook is not None:
            cls = self.hook.class_of(kind, key)
            strength = float(self.hook.strength.get(kind, 0.0))
            if cls is not None and strength > 0.0:
                dim_dirs = self._dirs.get(self.hook.seed)
                if dim_dirs is None:
                    dim_dirs = class_directions(self.hook.seed, EMBED_DIM).astype(np.float64)
                    self._dirs[self.hook.seed] = dim_dirs
                vec = vec + strength * dim_dirs[cls]
        return vec.astype(np.float32)

    def speech_embed(self, audio_key: str) -> np.ndarray:
        return self._embed("speech", audio_key)

    def text_embed(self, transcript: str) -> np.ndarray:
        return self._embed("text", transcript)


class MockAsr:
    """ASR stand-in: returns the manifest's stored transcript verbatim."""

    def __init__(self, transcripts: Mapping[str, str]) -> None:
        self._transcripts = dict(transcripts)

    def provider_id(self) -> ProviderId:
        return ProviderId(name="mock-asr", version="v1")

    def transcribe(self, audio_key: str) -> str:
        text = self._transcripts.get(audio_key, "")
        return "" if text == INAUDIBLE_MARKER else text

    def transcribe_batch(self, audio_keys: Sequence[str]) -> list[str]:
        return [self.transcribe(key) for key in audio_keys]


# ── Binary record format and feature cache ────────────────────────────────

def encode_record(key: str, vector: np.ndarray) -> bytes:
    """Serialize one feature record.

    Layout: magic(4) | dim(uint32 LE) | key_len(uint32 LE) | key(utf-8) |
    crc32(uint32 LE) | dim little-endian float32 values. The CRC covers
    everything except the magic and itself.
    """
    vec = np.ascontiguousarray(np.asarray(vector, dtype="<f4"))
    if vec.ndim != 1:
        raise ValueError("record vector must be one-dimensional")
    key_bytes = key.encode("utf-8")
    dim_and_key = struct.pack("<II", vec.shape[0], len(key_bytes)) + key_bytes
    payload = vec.tobytes()
    crc = zlib.crc32(dim_and_key + payload) & 0xFFFFFFFF
    return CACHE_MAGIC + dim_and_key + struct.pack("<I", crc) + payload


def decode_record(blob: bytes) -> tuple[str, np.ndarray]:
    """Parse and verify one record; raises CacheCorruption on any damage."""
    if len(blob) < 16 or blob[:4] != CACHE_MAGIC:
        raise CacheCorruption("bad magic bytes")
    dim, key_len = struct.unpack_from("<II", blob, 4)
    header_end = 12 + key_len
    expected_len = header_end + 4 + dim * 4
    if len(blob) != expected_len:
        raise CacheCorruption(
            f"record length {len(blob)} does not match header (expected {expected_len})"
        )
    key_bytes = blob[12:header_end]
    (stored_crc,) = struct.unpack_from("<I", blob, header_end)
    payload = blob[header_end + 4 :]
    actual_crc = zlib.crc32(blob[4:header_end] + payload) & 0xFFFFFFFF
    if actual_crc != stored_crc:
        raise CacheCorruption("crc32 mismatch")
    try:
        key = key_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CacheCorruption(f"key is not valid utf-8: {exc}") from None
    vector = np.frombuffer(payload, dtype="<f4").copy()
    return key, vector


@dataclass(frozen=True)
class CacheKey:
    utterance_id: str
    provider: ProviderId
    block_kind: str

    def as_string(self) -> str:
        return f"{self.utterance_id}|{self.provider.name}|{self.provider.version}|{self.block_kind}"


class FeatureCache:
    """One record file per key under a root directory.

    Writes go through a temp file plus atomic replace, so concurrent readers
    with a single writer per key see either the old or the new record,
    never a torn one. ``get`` returns None for absent keys; corruption
    raises instead.
    """

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: CacheKey) -> Path:
        name = hashlib.blake2b(key.as_string().encode("utf-8"), digest_size=16).hexdigest()
        return self.root / f"{name}.vec"

    def put(self, key: CacheKey, vector: np.ndarray) -> None:
        blob = encode_record(key.as_string(), vector)
        fd, tmp_name = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(blob)
            os.replace(tmp_name, self._path(key))
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    def get(self, key: CacheKey) -> Optional[np.ndarray]:
        path = self._path(key)
        try:
            blob = path.read_bytes()
        except FileNotFoundError:
            return None
        stored_key, vector = decode_record(blob)
        if stored_key != key.as_string():
            raise CacheCorruption(
                f"record at {path.name} holds key {stored_key!r}, expected {key.as_string()!r}"
            )
        return vector

    def get_or_compute(self, key: CacheKey, compute) -> np.ndarray:
        cached = self.get(key)
        if cached is not None:
            return cached
        vector = np.asarray(compute(), dtype=np.float32)
        self.put(key, vector)
        return vector


# ── External command adapters ─────────────────────────────────────────────

class CommandEmbedProvider:
    """Embedding extractor run as an external command.

    The command is invoked as ``cmd... input_manifest output_dir``. The input
    manifest is JSON-lines of ``{"key": ..., "value": ...}`` where value is
    the audio-ref key (speech) or transcript (text). The adapter must write
    one ``<blake2b(key)>.vec`` record file per input, in the cache record
    format, into the output directory.
    """

    def __init__(self, command: Sequence[str], provider: ProviderId, kind: str) -> None:
        if kind not in ("speech", "text"):
            raise ValueError(f"unknown embed kind {kind!r}")
        self.command = list(command)
        self._provider = provider
        self.kind = kind

    def provider_id(self, kind: Optional[str] = None) -> ProviderId:
        return self._provider

    def embed_batch(self, items: Sequence[tuple[str, str]]) -> list[np.ndarray]:
        with tempfile.TemporaryDirectory(prefix="emoturn-adapter-") as workdir:
            manifest = Path(workdir) / "input.jsonl"
            out_dir = Path(workdir) / "out"
            out_dir.mkdir()
            with manifest.open("w", encoding="utf-8") as handle:
                for key, value in items:
                    handle.write(json.dumps({"key": key, "value": value}) + "\n")
            try:
                proc = subprocess.run(
                    self.command + [str(manifest), str(out_dir)],
                    capture_output=True,
                    text=True,
                )
            except OSError as exc:
                raise AdapterError(f"adapter command failed to start: {exc}") from None
            if proc.returncode != 0:
                raise AdapterError(
                    f"adapter exited with {proc.returncode}: {proc.stderr.strip()[:500]}"
                )
            vectors = []
            for key, _ in items:
                record_path = out_dir / f"{adapter_output_name(key)}.vec"
                if not record_path.exists():
                    raise AdapterError(f"adapter produced no record for key {key!r}")
                stored_key, vector = decode_record(record_path.read_bytes())
                if stored_key != key:
                    raise AdapterError(
                        f"adapter record key mismatch: {stored_key!r} != {key!r}"
                    )
                if vector.shape[0] != EMBED_DIM:
                    raise AdapterError(
                        f"adapter returned {vector.shape[0]} dims for {key!r}, "
                        f"expected {EMBED_DIM}"
                    )
                vectors.append(vector)
            return vectors

    def _embed_one(self, key: str, value: str) -> np.ndarray:
        return self.embed_batch([(key, value)])[0]

    def speech_embed(self, audio_key: str) -> np.ndarray:
        return self._embed_one(audio_key, audio_key)

    def text_embed(self, transcript: str) -> np.ndarray:
        return self._embed_one(transcript, transcript)


def adapter_output_name(key: str) -> str:
    """File stem an adapter must use for a given input key."""
    return hashlib.blake2b(key.encode("utf-8"), digest_size=16).hexdigest()
