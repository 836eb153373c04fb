"""Conversation corpus model: manifests, speaking turns, splits, statistics.

A corpus is a set of dyadic conversations, each an ordered list of speaking
turns (utterances). Manifests are UTF-8 JSON-lines with one utterance per
line; conversations are reconstructed by grouping on ``conversation_id`` and
sorting by ``index``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from .rng import SplitMix64

INAUDIBLE_MARKER = "<inaudible>"


class SpeakerRole(str, Enum):
    CUSTOMER = "customer"
    EXECUTIVE = "executive"


class EmotionLabel(str, Enum):
    """The nine emotion classes, in canonical order.

    The declaration order is the canonical ordering used for confusion
    matrices, argmax tie-breaking, and report rows.
    """

    NEUTRAL = "neutral"
    HAPPY = "happy"
    SAD = "sad"
    EXCITED = "excited"
    ANGER = "anger"
    FEAR = "fear"
    SURPRISED = "surprised"
    FRUSTRATED = "frustrated"
    DISGUST = "disgust"


class SentimentLabel(str, Enum):
    NEUTRAL = "neutral"
    POSITIVE = "positive"
    NEGATIVE = "negative"


EMOTIONS: tuple[EmotionLabel, ...] = tuple(EmotionLabel)
EMOTION_INDEX: dict[EmotionLabel, int] = {e: i for i, e in enumerate(EMOTIONS)}

NEGATIVE_EMOTIONS: frozenset[EmotionLabel] = frozenset(
    {
        EmotionLabel.ANGER,
        EmotionLabel.FRUSTRATED,
        EmotionLabel.DISGUST,
        EmotionLabel.SAD,
        EmotionLabel.FEAR,
    }
)
POSITIVE_EMOTIONS: frozenset[EmotionLabel] = frozenset(
    {EmotionLabel.HAPPY, EmotionLabel.SURPRISED, EmotionLabel.EXCITED}
)
NEUTRAL_EMOTIONS: frozenset[EmotionLabel] = frozenset({EmotionLabel.NEUTRAL})


def default_sentiment(emotion: EmotionLabel) -> SentimentLabel:
    """Sentiment group an emotion belongs to."""
    if emotion in NEGATIVE_EMOTIONS:
        return SentimentLabel.NEGATIVE
    if emotion in POSITIVE_EMOTIONS:
        return SentimentLabel.POSITIVE
    return SentimentLabel.NEUTRAL


class ManifestError(ValueError):
    """Raised for any malformed or inconsistent manifest content."""


@dataclass(frozen=True)
class VadAnnotation:
    """Valence/arousal/dominance on the 1-10 integer annotation scale."""

    valence: int
    arousal: int
    dominance: int

    def __post_init__(self) -> None:
        for name, value in (
            ("valence", self.valence),
            ("arousal", self.arousal),
            ("dominance", self.dominance),
        ):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ManifestError(f"vad.{name} must be an integer, got {value!r}")
            if not 1 <= value <= 10:
                raise ManifestError(f"label out of range: vad.{name}={value} not in [1, 10]")


NEUTRAL_VAD = VadAnnotation(5, 5, 5)


@dataclass(frozen=True)
class LabelSet:
    emotion: EmotionLabel
    sentiment: SentimentLabel
    vad: VadAnnotation


@dataclass(frozen=True)
class AudioRef:
    """Audio location: a file path, optionally narrowed to a time span."""

    path: str
    start_sec: Optional[float] = None
    end_sec: Optional[float] = None

    def __post_init__(self) -> None:
        has_start = self.start_sec is not None
        has_end = self.end_sec is not None
        if has_start != has_end:
            raise ManifestError("audio span needs both start_sec and end_sec")
        if has_start and self.end_sec <= self.start_sec:
            raise ManifestError(
                f"audio span end_sec={self.end_sec} must exceed start_sec={self.start_sec}"
            )

    @property
    def key(self) -> str:
        """Stable string identity, usable as a feature-provider key."""
        if self.start_sec is None:
            return self.path
        return f"{self.path}#{self.start_sec:.6f}-{self.end_sec:.6f}"


@dataclass(frozen=True)
class Utterance:
    """One speaking turn of one speaker, with optional gold labels."""

    id: str
    conversation_id: str
    index: int
    speaker: SpeakerRole
    audio: AudioRef
    transcript: str
    transcript_asr: Optional[str] = None
    inaudible: bool = False
    labels: Optional[LabelSet] = None

    def __post_init__(self) -> None:
        if self.inaudible:
            if self.transcript != INAUDIBLE_MARKER:
                raise ManifestError(
                    f"inaudible utterance {self.id!r} must carry the literal "
                    f"{INAUDIBLE_MARKER!r} transcript"
                )
            if self.labels is not None:
                raise ManifestError(f"inaudible utterance {self.id!r} cannot carry labels")

    @property
    def labeled(self) -> bool:
        return self.labels is not None


@dataclass(frozen=True)
class Conversation:
    id: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self) -> None:
        if not self.utterances:
            raise ManifestError(f"conversation {self.id!r} is empty")
        for pos, utt in enumerate(self.utterances):
            if utt.conversation_id != self.id:
                raise ManifestError(
                    f"utterance {utt.id!r} belongs to {utt.conversation_id!r}, "
                    f"not {self.id!r}"
                )
            if utt.index != pos:
                raise ManifestError(
                    f"conversation {self.id!r}: indices must be contiguous from 0, "
                    f"found {utt.index} at position {pos}"
                )


@dataclass(frozen=True)
class CorpusMeta:
    sample_rate_hz: int = 8000
    channels: int = 1
    source: str = ""


@dataclass(frozen=True)
class Corpus:
    conversations: tuple[Conversation, ...]
    meta: CorpusMeta = field(default_factory=CorpusMeta)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for conv in self.conversations:
            for utt in conv.utterances:
                if utt.id in seen:
                    raise ManifestError(f"duplicate utterance id {utt.id!r}")
                seen.add(utt.id)

    def __iter__(self) -> Iterator[Conversation]:
        return iter(self.conversations)

    @property
    def utterances(self) -> Iterator[Utterance]:
        for conv in self.conversations:
            yield from conv.utterances

    @property
    def n_utterances(self) -> int:
        return sum(len(c.utterances) for c in self.conversations)

    def labeled_utterances(self) -> list[Utterance]:
        return [u for u in self.utterances if u.labeled]


# ── Manifest I/O ──────────────────────────────────────────────────────────

def _parse_labels(raw: dict, line_no: int) -> LabelSet:
    try:
        emotion = EmotionLabel(raw["emotion"])
    except (KeyError, ValueError):
        raise ManifestError(
            f"line {line_no}: unknown emotion value {raw.get('emotion')!r}"
        ) from None
    try:
        sentiment = SentimentLabel(raw["sentiment"])
    except (KeyError, ValueError):
        raise ManifestError(
            f"line {line_no}: unknown sentiment value {raw.get('sentiment')!r}"
        ) from None
    vad_raw = raw.get("vad")
    if not isinstance(vad_raw, dict):
        raise ManifestError(f"line {line_no}: labels.vad must be an object")
    try:
        vad = VadAnnotation(
            valence=vad_raw.get("valence"),
            arousal=vad_raw.get("arousal"),
            dominance=vad_raw.get("dominance"),
        )
    except ManifestError as exc:
        raise ManifestError(f"line {line_no}: {exc}") from None
    return LabelSet(emotion=emotion, sentiment=sentiment, vad=vad)


def _parse_utterance(record: dict, line_no: int) -> Utterance:
    for fieldname in ("id", "conversation_id", "index", "speaker", "audio_path", "transcript"):
        if fieldname not in record:
            raise ManifestError(f"line {line_no}: missing field {fieldname!r}")
    try:
        speaker = SpeakerRole(record["speaker"])
    except ValueError:
        raise ManifestError(
            f"line {line_no}: unknown speaker value {record['speaker']!r}"
        ) from None
    try:
        audio = AudioRef(
            path=str(record["audio_path"]),
            start_sec=record.get("start_sec"),
            end_sec=record.get("end_sec"),
        )
    except ManifestError as exc:
        raise ManifestError(f"line {line_no}: {exc}") from None

    index = record["index"]
    if not isinstance(index, int) or isinstance(index, bool):
        raise ManifestError(f"line {line_no}: index must be an integer, got {index!r}")
    labels = None
    if record.get("labels") is not None:
        labels = _parse_labels(record["labels"], line_no)
    try:
        return Utterance(
            id=str(record["id"]),
            conversation_id=str(record["conversation_id"]),
            index=index,
            speaker=speaker,
            audio=audio,
            transcript=str(record["transcript"]),
            transcript_asr=record.get("transcript_asr"),
            inaudible=bool(record.get("inaudible", False)),
            labels=labels,
        )
    except ManifestError as exc:
        raise ManifestError(f"line {line_no}: {exc}") from None


def utterance_to_record(utt: Utterance) -> dict:
    record: dict = {
        "id": utt.id,
        "conversation_id": utt.conversation_id,
        "index": utt.index,
        "speaker": utt.speaker.value,
        "audio_path": utt.audio.path,
    }
    if utt.audio.start_sec is not None:
        record["start_sec"] = utt.audio.start_sec
        record["end_sec"] = utt.audio.end_sec
    record["transcript"] = utt.transcript
    if utt.transcript_asr is not None:
        record["transcript_asr"] = utt.transcript_asr
    if utt.inaudible:
        record["inaudible"] = True
    if utt.labels is not None:
        record["labels"] = {
            "emotion": utt.labels.emotion.value,
            "sentiment": utt.labels.sentiment.value,
            "vad": {
                "valence": utt.labels.vad.valence,
                "arousal": utt.labels.vad.arousal,
                "dominance": utt.labels.vad.dominance,
            },
        }
    return record


def build_corpus(utterances: Iterable[Utterance], meta: CorpusMeta = CorpusMeta()) -> Corpus:
    """Group utterances by conversation id, sort by index, and validate."""
    by_conv: dict[str, list[Utterance]] = {}
    for utt in utterances:
        by_conv.setdefault(utt.conversation_id, []).append(utt)
    conversations = []
    for conv_id, utts in by_conv.items():
        utts.sort(key=lambda u: u.index)
        conversations.append(Conversation(id=conv_id, utterances=tuple(utts)))
    return Corpus(conversations=tuple(conversations), meta=meta)


def load_manifest(path: str | Path) -> Corpus:
    """Load and validate a JSON-lines manifest.

    An optional ``{"manifest_meta": ...}`` line (conventionally first) carries
    corpus-level metadata; every other non-blank line is one utterance record.
    Errors name the offending line.
    """
    path = Path(path)
    meta = CorpusMeta()
    utterances: list[Utterance] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {line_no}: parse error: {exc.msg}") from None
            if not isinstance(record, dict):
                raise ManifestError(f"line {line_no}: record must be a JSON object")
            if "manifest_meta" in record:
                raw = record["manifest_meta"]
                meta = CorpusMeta(
                    sample_rate_hz=int(raw.get("sample_rate_hz", 8000)),
                    channels=int(raw.get("channels", 1)),
                    source=str(raw.get("source", "")),
                )
                continue
            utterances.append(_parse_utterance(record, line_no))
    return build_corpus(utterances, meta=meta)


def save_manifest(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as JSON-lines; ``load_manifest`` round-trips it exactly."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        meta = {
            "manifest_meta": {
                "sample_rate_hz": corpus.meta.sample_rate_hz,
                "channels": corpus.meta.channels,
                "source": corpus.meta.source,
            }
        }
        handle.write(json.dumps(meta, ensure_ascii=False) + "\n")
        for conv in corpus.conversations:
            for utt in conv.utterances:
                handle.write(json.dumps(utterance_to_record(utt), ensure_ascii=False) + "\n")


# ── Speaking-turn segmentation ────────────────────────────────────────────

@dataclass(frozen=True)
class Segment:
    """A raw diarized segment, before merging into speaking turns."""

    speaker: SpeakerRole
    start_sec: float
    end_sec: float
    text: str


def segment_turns(
    segments: Sequence[Segment],
    conversation_id: str = "conv",
    audio_path: str = "",
) -> list[Utterance]:
    """Merge consecutive same-speaker segments into speaking turns.

    Input must be sorted by start time and non-overlapping. Texts of merged
    segments are joined with a single space; the turn span runs from the first
    segment's start to the last segment's end. The output alternates speakers
    by construction.
    """
    for i, seg in enumerate(segments):
        if seg.end_sec <= seg.start_sec:
            raise ValueError(f"segment {i}: end_sec must exceed start_sec")
        if i > 0:
            prev = segments[i - 1]
            if seg.start_sec < prev.start_sec:
                raise ValueError(f"segment {i}: segments must be sorted by start_sec")
            if seg.start_sec < prev.end_sec:
                raise ValueError(
                    f"segment {i}: overlaps previous segment ending at {prev.end_sec}"
                )

    turns: list[Utterance] = []
    group: list[Segment] = []

    def flush() -> None:
        if not group:
            return
        idx = len(turns)
        turns.append(
            Utterance(
                id=f"{conversation_id}_t{idx:04d}",
                conversation_id=conversation_id,
                index=idx,
                speaker=group[0].speaker,
                audio=AudioRef(
                    path=audio_path,
                    start_sec=group[0].start_sec,
                    end_sec=group[-1].end_sec,
                ),
                transcript=" ".join(seg.text for seg in group),
            )
        )

    for seg in segments:
        if group and seg.speaker != group[0].speaker:
            flush()
            group = []
        group.append(seg)
    flush()
    return turns


# ── Train/dev/test splitting ──────────────────────────────────────────────

def _reindex(conv_id: str, utts: list[Utterance]) -> Conversation:
    renumbered = tuple(replace(u, index=pos) for pos, u in enumerate(utts))
    return Conversation(id=conv_id, utterances=renumbered)


def _subcorpus_from_utterances(utts: list[Utterance], meta: CorpusMeta) -> Corpus:
    by_conv: dict[str, list[Utterance]] = {}
    order: list[str] = []
    for utt in utts:
        if utt.conversation_id not in by_conv:
            order.append(utt.conversation_id)
        by_conv.setdefault(utt.conversation_id, []).append(utt)
    conversations = []
    for conv_id in order:
        group = sorted(by_conv[conv_id], key=lambda u: u.index)
        conversations.append(_reindex(conv_id, group))
    return Corpus(conversations=tuple(conversations), meta=meta)


def split(
    corpus: Corpus, seed: int, mode: str = "conversation"
) -> tuple[Corpus, Corpus, Corpus]:
    """Deterministic 80/10/10 train/dev/test split.

    ``utterance`` mode shuffles the labeled utterances and takes
    ``floor(0.8 N)`` for train and ``floor(0.1 N)`` for dev, remainder test;
    sub-corpora renumber utterance indices (ids are preserved). The default
    ``conversation`` mode shuffles conversations and assigns whole
    conversations greedily toward the same labeled-count targets, keeping
    model input sequences intact; later splits are always left at least one
    conversation each.

    Shuffling uses the documented SplitMix64 generator, so partitions are
    reproducible across implementations for a fixed (seed, mode).
    """
    rng = SplitMix64(seed)
    if mode == "utterance":
        labeled = corpus.labeled_utterances()
        if not labeled:
            raise ValueError("corpus has no labeled utterances to split")
        rng.shuffle(labeled)
        n = len(labeled)
        n_train = math.floor(0.8 * n)
        n_dev = math.floor(0.1 * n)
        parts = (
            labeled[:n_train],
            labeled[n_train : n_train + n_dev],
            labeled[n_train + n_dev :],
        )
        return tuple(_subcorpus_from_utterances(p, corpus.meta) for p in parts)

    if mode != "conversation":
        raise ValueError(f"unknown split mode {mode!r}")
    conversations = list(corpus.conversations)
    if len(conversations) < 3:
        raise ValueError(
            f"conversation-mode split needs at least 3 conversations, got {len(conversations)}"
        )
    rng.shuffle(conversations)
    total = sum(sum(1 for u in c.utterances if u.labeled) for c in conversations)
    targets = (0.8 * total, 0.1 * total)

    buckets: list[list[Conversation]] = [[], [], []]
    remaining = list(conversations)
    for which, target in enumerate(targets):
        count = 0
        # Keep one conversation in reserve for each split still to fill.
        while remaining and count < target and len(remaining) > (2 - which):
            conv = remaining.pop(0)
            buckets[which].append(conv)
            count += sum(1 for u in conv.utterances if u.labeled)
    buckets[2] = remaining
    return tuple(
        Corpus(conversations=tuple(bucket), meta=corpus.meta) for bucket in buckets
    )


# ── Class statistics ──────────────────────────────────────────────────────

@dataclass(frozen=True)
class ClassCount:
    emotion: EmotionLabel
    count: int
    percentage: float


def class_distribution(corpus: Corpus) -> list[ClassCount]:
    """Per-emotion counts and percentages over labeled utterances.

    Rows follow the canonical emotion order; classes with zero labeled
    utterances are included only when the corpus has labels at all.
    """
    counts = {emotion: 0 for emotion in EMOTIONS}
    total = 0
    for utt in corpus.utterances:
        if utt.labels is not None:
            counts[utt.labels.emotion] += 1
            total += 1
    if total == 0:
        return []
    return [
        ClassCount(emotion=e, count=counts[e], percentage=100.0 * counts[e] / total)
        for e in EMOTIONS
    ]
