"""Word-level VAD lexicon: loading, tokenization, per-utterance statistics.

Lexicon values live on their native [0, 1] scale and are never rescaled to
the 1-10 annotation scale; the two scales serve different roles (features vs
labels). Out-of-lexicon words are skipped and surface only through the
coverage statistic.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .corpus import INAUDIBLE_MARKER

VAD_FEATURE_DIM = 10

# ASCII punctuation plus quote/dash/ellipsis variants and the devanagari danda.
_STRIP_CHARS = (
    "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~" "‘’“”–—…«»।"
)


class LexiconError(ValueError):
    """Raised for malformed lexicon or transliteration files."""


@dataclass(frozen=True)
class LexiconEntry:
    key: str
    valence: float
    arousal: float
    dominance: float

    def __post_init__(self) -> None:
        for name, value in (
            ("valence", self.valence),
            ("arousal", self.arousal),
            ("dominance", self.dominance),
        ):
            if not 0.0 <= value <= 1.0:
                raise LexiconError(f"{name} value {value} for {self.key!r} not in [0, 1]")


class Lexicon:
    """Immutable word -> (valence, arousal, dominance) map."""

    def __init__(self, entries: Sequence[LexiconEntry]) -> None:
        table: dict[str, LexiconEntry] = {}
        for entry in entries:
            if entry.key in table:
                raise LexiconError(f"duplicate lexicon key {entry.key!r}")
            table[entry.key] = entry
        self._table = table

    def __len__(self) -> int:
        return len(self._table)

    def __contains__(self, key: str) -> bool:
        return key in self._table

    def get(self, key: str) -> Optional[LexiconEntry]:
        return self._table.get(key)

    def entries(self) -> list[LexiconEntry]:
        return sorted(self._table.values(), key=lambda e: e.key)


class TransliterationTable:
    """Deterministic source-token -> canonical-token map; identity by default."""

    def __init__(self, mapping: Optional[Mapping[str, str]] = None) -> None:
        self._mapping = dict(mapping or {})

    def canonical(self, token: str) -> str:
        return self._mapping.get(token, token)

    def __len__(self) -> int:
        return len(self._mapping)


def load_lexicon(path: str | Path) -> Lexicon:
    """Load a ``word<TAB>valence<TAB>arousal<TAB>dominance`` TSV.

    Lines starting with ``#`` are comments/headers; values must parse as
    reals in [0, 1]; duplicate keys (after normalization) are rejected.
    """
    path = Path(path)
    entries: list[LexiconEntry] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise LexiconError(
                    f"{path.name} line {line_no}: expected 4 tab-separated fields, "
                    f"got {len(parts)}"
                )
            word = normalize_token(parts[0])
            if not word:
                raise LexiconError(f"{path.name} line {line_no}: empty word")
            try:
                values = [float(p) for p in parts[1:]]
            except ValueError:
                raise LexiconError(
                    f"{path.name} line {line_no}: non-numeric VAD value"
                ) from None
            try:
                entries.append(LexiconEntry(word, *values))
            except LexiconError as exc:
                raise LexiconError(f"{path.name} line {line_no}: {exc}") from None
    try:
        return Lexicon(entries)
    except LexiconError as exc:
        raise LexiconError(f"{path.name}: {exc}") from None


def save_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    """Write a lexicon back to the TSV interchange format."""
    with Path(path).open("w", encoding="utf-8") as handle:
        handle.write("# word\tvalence\tarousal\tdominance\n")
        for entry in lexicon.entries():
            handle.write(
                f"{entry.key}\t{entry.valence:.6f}\t{entry.arousal:.6f}\t{entry.dominance:.6f}\n"
            )


def load_transliteration(path: str | Path) -> TransliterationTable:
    """Load a two-column TSV mapping source tokens to lexicon-script tokens."""
    path = Path(path)
    mapping: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise LexiconError(
                    f"{path.name} line {line_no}: expected 2 tab-separated fields"
                )
            mapping[normalize_token(parts[0])] = normalize_token(parts[1])
    return TransliterationTable(mapping)


def normalize_token(token: str) -> str:
    return token.strip(_STRIP_CHARS).lower()


def tokenize(transcript: str) -> list[str]:
    """Lowercased whitespace tokens with edge punctuation stripped.

    The literal inaudible marker tokenizes to the empty list.
    """
    if transcript.strip() == INAUDIBLE_MARKER:
        return []
    tokens = []
    for chunk in transcript.split():
        token = normalize_token(chunk)
        if token:
            tokens.append(token)
    return tokens


@dataclass(frozen=True)
class VadFeature:
    """Fixed 10-dim summary of word-level VAD values for one utterance.

    Layout: mean(v,a,d), min(v,a,d), max(v,a,d), coverage. All components sit
    in [0, 1]; when no token is found in the lexicon the nine statistics are
    zero and coverage is the found fraction (zero as well).
    """

    mean_v: float
    mean_a: float
    mean_d: float
    min_v: float
    min_a: float
    min_d: float
    max_v: float
    max_a: float
    max_d: float
    coverage: float

    def as_vector(self) -> list[float]:
        return [
            self.mean_v, self.mean_a, self.mean_d,
            self.min_v, self.min_a, self.min_d,
            self.max_v, self.max_a, self.max_d,
            self.coverage,
        ]


ZERO_VAD_FEATURE = VadFeature(*([0.0] * 10))


def utterance_vad(
    transcript: str,
    lexicon: Lexicon,
    transliteration: Optional[TransliterationTable] = None,
) -> VadFeature:
    """Token-level lexicon lookup aggregated to the fixed statistic vector.

    Tokens are normalized, transliterated, then looked up; statistics are
    computed over found tokens only. Missing words are skipped by design.
    """
    transliteration = transliteration or TransliterationTable()
    tokens = tokenize(transcript)
    if not tokens:
        return ZERO_VAD_FEATURE
    found: list[LexiconEntry] = []
    for token in tokens:
        entry = lexicon.get(transliteration.canonical(token))
        if entry is not None:
            found.append(entry)
    if not found:
        return VadFeature(*([0.0] * 9), coverage=0.0)
    vs = [e.valence for e in found]
    as_ = [e.arousal for e in found]
    ds = [e.dominance for e in found]
    n = len(found)
    return VadFeature(
        mean_v=sum(vs) / n, mean_a=sum(as_) / n, mean_d=sum(ds) / n,
        min_v=min(vs), min_a=min(as_), min_d=min(ds),
        max_v=max(vs), max_a=max(as_), max_d=max(ds),
        coverage=n / len(tokens),
    )
