"""Annotation backend: task queue, event-sourced log, agreement, export.

State is a pure function of the corpus plus an append-only JSONL event log;
replaying the log reconstructs exactly the live state, so desk-scale
deployments need no database. Each utterance is assigned to a fixed number
of annotators (default 2) by rotating through the annotator roster.
"""

from __future__ import annotations

import json
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .corpus import (
    INAUDIBLE_MARKER,
    Corpus,
    EmotionLabel,
    LabelSet,
    SentimentLabel,
    Utterance,
    VadAnnotation,
    build_corpus,
    default_sentiment,
)
from .metrics import cohen_kappa


class AnnotationError(ValueError):
    """Invalid annotation input or query."""


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's judgment of one utterance.

    ``skipped_inaudible`` marks a clip too degraded to judge; such records
    carry no labels. The latest record per (annotator, utterance) wins.
    """

    annotator_id: str
    utterance_id: str
    emotion: Optional[EmotionLabel] = None
    sentiment: Optional[SentimentLabel] = None
    vad: Optional[VadAnnotation] = None
    skipped_inaudible: bool = False
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if not self.annotator_id or not self.utterance_id:
            raise AnnotationError("annotator_id and utterance_id are required")
        has_labels = (
            self.emotion is not None
            or self.sentiment is not None
            or self.vad is not None
        )
        if self.skipped_inaudible and has_labels:
            raise AnnotationError("an inaudible skip cannot carry labels")
        if not self.skipped_inaudible:
            if self.emotion is None or self.sentiment is None or self.vad is None:
                raise AnnotationError(
                    "a non-skip record needs emotion, sentiment, and vad"
                )

    def to_json(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "utterance_id": self.utterance_id,
            "emotion": self.emotion.value if self.emotion else None,
            "sentiment": self.sentiment.value if self.sentiment else None,
            "vad": (
                [self.vad.valence, self.vad.arousal, self.vad.dominance]
                if self.vad
                else None
            ),
            "skipped_inaudible": self.skipped_inaudible,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "AnnotationRecord":
        try:
            emotion = EmotionLabel(raw["emotion"]) if raw.get("emotion") else None
            sentiment = (
                SentimentLabel(raw["sentiment"]) if raw.get("sentiment") else None
            )
        except ValueError as exc:
            raise AnnotationError(str(exc)) from None
        vad_raw = raw.get("vad")
        vad = None
        if vad_raw is not None:
            if not isinstance(vad_raw, (list, tuple)) or len(vad_raw) != 3:
                raise AnnotationError("vad must be a list of three integers")
            try:
                vad = VadAnnotation(int(vad_raw[0]), int(vad_raw[1]), int(vad_raw[2]))
            except (TypeError, ValueError) as exc:
                raise AnnotationError(f"bad vad values: {exc}") from None
        return cls(
            annotator_id=str(raw.get("annotator_id", "")),
            utterance_id=str(raw.get("utterance_id", "")),
            emotion=emotion,
            sentiment=sentiment,
            vad=vad,
            skipped_inaudible=bool(raw.get("skipped_inaudible", False)),
            timestamp=float(raw.get("timestamp", 0.0)),
        )


@dataclass(frozen=True)
class TaskAssignment:
    """Next unit of work for one annotator, as served to the UI."""

    utterance_id: str
    clip_url: str
    transcript: str
    policy: str
    position: int
    total: int


def rotation_assignment(
    utterance_count: int, annotator_ids: Sequence[str], per_utterance: int
) -> list[tuple[str, ...]]:
    """Annotators for each utterance index: rotate through the roster.

    Utterance j goes to ids[(j + m) % n] for m in 0..per_utterance-1, which
    spreads load evenly and gives every utterance exactly per_utterance
    distinct annotators.
    """
    n = len(annotator_ids)
    if not 1 <= per_utterance <= n:
        raise AnnotationError(
            f"per_utterance={per_utterance} needs between 1 and {n} annotators"
        )
    return [
        tuple(annotator_ids[(j + m) % n] for m in range(per_utterance))
        for j in range(utterance_count)
    ]


class AnnotationStore:
    """Event-sourced annotation state for one corpus and roster.

    All mutation goes through :meth:`submit`, which appends to the log under
    a lock before updating in-memory state; constructing a store over an
    existing log replays it.
    """

    POLICY = "rotation"

    def __init__(
        self,
        corpus: Corpus,
        annotator_ids: Sequence[str],
        log_path: str | Path,
        per_utterance: int = 2,
    ) -> None:
        ids = list(annotator_ids)
        if len(set(ids)) != len(ids) or not all(ids):
            raise AnnotationError("annotator ids must be unique and non-empty")
        self.corpus = corpus
        self.annotator_ids = ids
        self.per_utterance = per_utterance
        self._utterances = list(corpus.utterances)
        self._by_id = {u.id: u for u in self._utterances}
        assigned = rotation_assignment(len(self._utterances), ids, per_utterance)
        self._assignees = {
            u.id: assigned[j] for j, u in enumerate(self._utterances)
        }
        self._queues: dict[str, list[Utterance]] = {a: [] for a in ids}
        for j, utt in enumerate(self._utterances):
            for annotator in assigned[j]:
                self._queues[annotator].append(utt)
        # Active record per (annotator_id, utterance_id); later submissions
        # replace earlier ones.
        self._active: dict[tuple[str, str], AnnotationRecord] = {}
        self._lock = threading.Lock()
        self._log_path = Path(log_path)
        if self._log_path.exists():
            self._replay()

    def _replay(self) -> None:
        with self._log_path.open("r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = AnnotationRecord.from_json(json.loads(line))
                except (json.JSONDecodeError, AnnotationError, ValueError) as exc:
                    raise AnnotationError(
                        f"{self._log_path}:{line_no}: bad log record: {exc}"
                    ) from None
                self._apply(record)

    def _apply(self, record: AnnotationRecord) -> bool:
        key = (record.annotator_id, record.utterance_id)
        superseded = key in self._active
        self._active[key] = record
        return superseded

    def submit(self, record: AnnotationRecord) -> dict:
        """Validate, append to the log, and update state atomically."""
        if record.annotator_id not in self._queues:
            raise AnnotationError(f"unknown annotator {record.annotator_id!r}")
        if record.utterance_id not in self._by_id:
            raise AnnotationError(f"unknown utterance {record.utterance_id!r}")
        with self._lock:
            with self._log_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
            superseded = self._apply(record)
        return {"status": "ok", "superseded": superseded}

    def next_task(self, annotator_id: str) -> Optional[TaskAssignment]:
        """Lowest-index assigned utterance this annotator has not done yet."""
        if annotator_id not in self._queues:
            raise AnnotationError(f"unknown annotator {annotator_id!r}")
        with self._lock:
            queue = self._queues[annotator_id]
            done = sum(1 for u in queue if (annotator_id, u.id) in self._active)
            for utt in queue:
                if (annotator_id, utt.id) not in self._active:
                    return TaskAssignment(
                        utterance_id=utt.id,
                        clip_url=f"/api/clips/{utt.id}",
                        transcript=utt.transcript,
                        policy=self.POLICY,
                        position=done + 1,
                        total=len(queue),
                    )
        return None

    def utterance(self, utterance_id: str) -> Utterance:
        utt = self._by_id.get(utterance_id)
        if utt is None:
            raise AnnotationError(f"unknown utterance {utterance_id!r}")
        return utt

    def progress(self) -> dict:
        with self._lock:
            per_annotator = {}
            for annotator_id, queue in self._queues.items():
                done = sum(
                    1 for u in queue if (annotator_id, u.id) in self._active
                )
                per_annotator[annotator_id] = {"done": done, "total": len(queue)}
            complete = sum(
                1
                for utt in self._utterances
                if all(
                    (a, utt.id) in self._active for a in self._assignees[utt.id]
                )
            )
        return {
            "annotators": per_annotator,
            "utterances": {
                "total": len(self._utterances),
                "fully_annotated": complete,
            },
            "per_utterance": self.per_utterance,
        }

    def agreement(
        self, annotator_a: str, annotator_b: str, field: str
    ) -> tuple[float, int]:
        """Cohen's kappa between two annotators on co-annotated utterances."""
        if field not in ("emotion", "sentiment"):
            raise AnnotationError(f"field must be emotion or sentiment, got {field!r}")
        for annotator in (annotator_a, annotator_b):
            if annotator not in self._queues:
                raise AnnotationError(f"unknown annotator {annotator!r}")
        labels_a: list[str] = []
        labels_b: list[str] = []
        with self._lock:
            for utt in self._utterances:
                rec_a = self._active.get((annotator_a, utt.id))
                rec_b = self._active.get((annotator_b, utt.id))
                if rec_a is None or rec_b is None:
                    continue
                if rec_a.skipped_inaudible or rec_b.skipped_inaudible:
                    continue
                labels_a.append(getattr(rec_a, field).value)
                labels_b.append(getattr(rec_b, field).value)
        if not labels_a:
            raise AnnotationError(
                f"no overlap between {annotator_a!r} and {annotator_b!r}"
            )
        return cohen_kappa(labels_a, labels_b), len(labels_a)

    def records_for(self, utterance_id: str) -> list[AnnotationRecord]:
        with self._lock:
            return [
                self._active[(a, utterance_id)]
                for a in self.annotator_ids
                if (a, utterance_id) in self._active
            ]

    def export(self, policy: str = "agree") -> tuple[Corpus, list[str]]:
        """Labeled manifest plus the utterance ids needing adjudication.

        An utterance is resolved only once all its assigned annotators have
        submitted. ``agree`` requires a unanimous emotion; ``majority``
        takes the plurality emotion and sends ties to adjudication. Clips
        every reviewer skipped come out marked inaudible; pending ones
        come out unlabeled without an adjudication entry.
        """
        if policy not in ("agree", "majority"):
            raise AnnotationError(f"unknown export policy {policy!r}")
        exported: list[Utterance] = []
        adjudicate: list[str] = []
        for utt in self._utterances:
            records = self.records_for(utt.id)
            labels, inaudible, disputed = _resolve(
                records, self.per_utterance, policy
            )
            if disputed:
                adjudicate.append(utt.id)
            if utt.inaudible:
                # Source already masked this clip; keep it masked.
                inaudible, labels = True, None
            exported.append(
                Utterance(
                    id=utt.id,
                    conversation_id=utt.conversation_id,
                    index=utt.index,
                    speaker=utt.speaker,
                    audio=utt.audio,
                    transcript=INAUDIBLE_MARKER if inaudible else utt.transcript,
                    transcript_asr=utt.transcript_asr,
                    inaudible=inaudible,
                    labels=labels,
                )
            )
        return build_corpus(exported, meta=self.corpus.meta), adjudicate


def _mean_vad(records: Sequence[AnnotationRecord]) -> VadAnnotation:
    def comp(values: list[int]) -> int:
        mean = sum(values) / len(values)
        return min(10, max(1, int(mean + 0.5)))

    return VadAnnotation(
        comp([r.vad.valence for r in records]),
        comp([r.vad.arousal for r in records]),
        comp([r.vad.dominance for r in records]),
    )


def _resolve(
    records: list[AnnotationRecord], per_utterance: int, policy: str
) -> tuple[Optional[LabelSet], bool, bool]:
    """(labels, inaudible, needs_adjudication) for one utterance's records."""
    if len(records) < per_utterance:
        return None, False, False
    if all(r.skipped_inaudible for r in records):
        return None, True, False
    if any(r.skipped_inaudible for r in records):
        return None, False, True

    counts = Counter(r.emotion for r in records)
    ranked = counts.most_common()
    if policy == "agree":
        if len(ranked) > 1:
            return None, False, True
        winner = ranked[0][0]
    else:
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            return None, False, True
        winner = ranked[0][0]
    agreeing = [r for r in records if r.emotion == winner]
    sentiments = {r.sentiment for r in agreeing}
    sentiment = (
        sentiments.pop() if len(sentiments) == 1 else default_sentiment(winner)
    )
    labels = LabelSet(emotion=winner, sentiment=sentiment, vad=_mean_vad(agreeing))
    return labels, False, False
