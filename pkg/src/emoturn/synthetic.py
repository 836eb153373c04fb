"""Synthetic corpus generator for desk-scale verification.

Builds a labeled mock conversation corpus together with a word lexicon and a
mock-provider signal hook, arranged so the emotion class is recoverable from
exactly the feature blocks named in the signal spec:

- ``vad``: utterance words are drawn from per-class pools whose lexicon VAD
  values sit near class-specific anchors, so the 10-dim VAD statistics
  separate the classes through the real lexicon path.
- ``speech`` / ``text``: the hook tells the mock provider to add a class
  direction to the corresponding embedding.

Blocks absent from the signal spec stay pure noise: transcripts then come from a
single shared word pool (so VAD statistics are class-agnostic), and mock
embeddings are plain key hashes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .corpus import (
    EMOTIONS,
    EMOTION_INDEX,
    AudioRef,
    Corpus,
    CorpusMeta,
    EmotionLabel,
    LabelSet,
    SpeakerRole,
    Utterance,
    VadAnnotation,
    build_corpus,
    default_sentiment,
    save_manifest,
)
from .features import SignalHook
from .lexicon import Lexicon, LexiconEntry, save_lexicon
from .rng import SplitMix64

# Table-shaped default priors: heavily neutral, negatives ~37%, positives ~2%.
DEFAULT_PRIORS: dict[EmotionLabel, float] = {
    EmotionLabel.NEUTRAL: 3510 / 5754,
    EmotionLabel.ANGER: 863 / 5754,
    EmotionLabel.FRUSTRATED: 748 / 5754,
    EmotionLabel.DISGUST: 116 / 5754,
    EmotionLabel.SAD: 403 / 5754,
    EmotionLabel.FEAR: 19 / 5754,
    EmotionLabel.HAPPY: 57 / 5754,
    EmotionLabel.SURPRISED: 13 / 5754,
    EmotionLabel.EXCITED: 25 / 5754,
}

_WORDS_PER_POOL = 40
_WORDS_PER_UTTERANCE = 5
_VAD_JITTER = 0.05


def class_anchor(class_idx: int) -> tuple[float, float, float]:
    """Distinct (v, a, d) anchor per class, spread over the unit cube."""
    v = 0.15 + 0.35 * (class_idx % 3)
    a = 0.15 + 0.35 * ((class_idx // 3) % 3)
    d = 0.1 + 0.8 * class_idx / 8
    return v, a, d


def _vad_annotation(rng: SplitMix64, anchor: tuple[float, float, float]) -> VadAnnotation:
    values = []
    for x in anchor:
        scaled = int(round(1 + 9 * x)) + rng.randint(3) - 1
        values.append(min(10, max(1, scaled)))
    return VadAnnotation(*values)


@dataclass(frozen=True)
class SyntheticBundle:
    """Corpus plus everything needed to extract its planted features."""

    corpus: Corpus
    lexicon: Lexicon
    hook: SignalHook
    signal_spec: Mapping[str, float]
    seed: int

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        """Materialize manifest.jsonl, lexicon.tsv, and hook.json."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "manifest": out / "manifest.jsonl",
            "lexicon": out / "lexicon.tsv",
            "hook": out / "hook.json",
        }
        save_manifest(self.corpus, paths["manifest"])
        save_lexicon(self.lexicon, paths["lexicon"])
        self.hook.save(paths["hook"])
        return paths


def _build_lexicon(rng: SplitMix64, vad_strength: float) -> tuple[Lexicon, list[list[str]]]:
    """Per-class word pools; pool index 9 is the shared class-agnostic pool."""
    entries: list[LexiconEntry] = []
    pools: list[list[str]] = []
    center = 0.5

    def jittered(base: float) -> float:
        return min(1.0, max(0.0, base + (rng.uniform() * 2 - 1) * _VAD_JITTER))

    for k in range(len(EMOTIONS)):
        anchor = class_anchor(k)
        pool = []
        for j in range(_WORDS_PER_POOL):
            word = f"kw{k}{chr(ord('a') + j % 26)}{j}"
            pool.append(word)
            entries.append(
                LexiconEntry(
                    key=word,
                    valence=jittered(center + vad_strength * (anchor[0] - center)),
                    arousal=jittered(center + vad_strength * (anchor[1] - center)),
                    dominance=jittered(center + vad_strength * (anchor[2] - center)),
                )
            )
        pools.append(pool)
    shared = []
    for j in range(_WORDS_PER_POOL * 2):
        word = f"sw{chr(ord('a') + j % 26)}{j}"
        shared.append(word)
        entries.append(
            LexiconEntry(
                key=word,
                valence=rng.uniform(),
                arousal=rng.uniform(),
                dominance=rng.uniform(),
            )
        )
    pools.append(shared)
    return Lexicon(entries), pools


def gen_synthetic(
    n_conversations: int,
    n_utterances: int,
    class_priors: Optional[Mapping[EmotionLabel, float]] = None,
    signal_spec: Optional[Mapping[str, float]] = None,
    seed: int = 0,
) -> SyntheticBundle:
    """Deterministic synthetic corpus with planted, block-targeted signal.

    ``n_utterances`` is per conversation; ``signal_spec`` maps block kind
    (``speech``/``text``/``vad``) to a strength in (0, 1]. Priors must sum
    to 1.
    """
    priors = dict(class_priors) if class_priors is not None else dict(DEFAULT_PRIORS)
    if any(p < 0 for p in priors.values()) or abs(sum(priors.values()) - 1.0) > 1e-9:
        raise ValueError("class priors must be non-negative and sum to 1")
    if n_conversations < 1 or n_utterances < 1:
        raise ValueError("need at least one conversation and one utterance")
    spec = dict(signal_spec or {})
    unknown = set(spec) - {"speech", "text", "vad"}
    if unknown:
        raise ValueError(f"unknown signal block(s): {sorted(unknown)}")

    rng = SplitMix64(seed)
    lexicon, pools = _build_lexicon(rng, vad_strength=spec.get("vad", 0.0))
    use_class_pools = "vad" in spec

    cumulative: list[tuple[float, EmotionLabel]] = []
    acc = 0.0
    for e in EMOTIONS:
        acc += priors.get(e, 0.0)
        cumulative.append((acc, e))

    def sample_emotion() -> EmotionLabel:
        u = rng.uniform()
        for bound, e in cumulative:
            if u < bound:
                return e
        return cumulative[-1][1]

    by_audio: dict[str, int] = {}
    by_text: dict[str, int] = {}
    utterances: list[Utterance] = []
    counter = 0
    for ci in range(n_conversations):
        conv_id = f"syn{ci:03d}"
        for ui in range(n_utterances):
            emotion = sample_emotion()
            k = EMOTION_INDEX[emotion]
            pool = pools[k] if use_class_pools else pools[-1]
            words = [pool[rng.randint(len(pool))] for _ in range(_WORDS_PER_UTTERANCE)]
            # One out-of-lexicon token makes every transcript unique without
            # letting coverage vary by class.
            transcript = " ".join(words + [f"utt{counter}"])
            utt_id = f"{conv_id}_u{ui:04d}"
            audio = AudioRef(path=f"mock://{utt_id}.pcm", start_sec=None, end_sec=None)
            speaker = SpeakerRole.CUSTOMER if ui % 2 == 0 else SpeakerRole.EXECUTIVE
            utterances.append(
                Utterance(
                    id=utt_id,
                    conversation_id=conv_id,
                    index=ui,
                    speaker=speaker,
                    audio=audio,
                    transcript=transcript,
                    labels=LabelSet(
                        emotion=emotion,
                        sentiment=default_sentiment(emotion),
                        vad=_vad_annotation(rng, class_anchor(k)),
                    ),
                )
            )
            by_audio[audio.key] = k
            by_text[transcript] = k
            counter += 1

    hook = SignalHook(
        seed=seed,
        by_audio=by_audio if "speech" in spec else {},
        by_text=by_text if "text" in spec else {},
        strength={k: float(v) for k, v in spec.items() if k in ("speech", "text")},
    )
    corpus = build_corpus(utterances, meta=CorpusMeta(source=f"synthetic:seed{seed}"))
    return SyntheticBundle(
        corpus=corpus, lexicon=lexicon, hook=hook, signal_spec=spec, seed=seed
    )


def nearest_centroid_accuracy(features: np.ndarray, labels: list[int]) -> float:
    """Leave-one-out nearest-class-centroid accuracy of a linear probe.

    Each sample is scored against centroids that exclude it; otherwise a
    sample's own contribution to its class mean lets high-dimensional noise
    classify itself far above chance. Excluding x from a class of n shrinks
    to ||x - m'||^2 = (n/(n-1))^2 ||x - m||^2, so the correction is a scalar
    rescale of the own-class distance. Singleton classes get no leave-one-out
    centroid and cannot be predicted for their own sample.
    """
    feats = np.asarray(features, dtype=np.float64)
    ys = np.asarray(labels)
    if feats.shape[0] != ys.shape[0] or feats.shape[0] == 0:
        raise ValueError("features and labels must align and be non-empty")
    classes = sorted(set(int(y) for y in ys))
    counts = np.array([(ys == c).sum() for c in classes], dtype=np.float64)
    centroids = np.stack([feats[ys == c].mean(axis=0) for c in classes])
    dists = ((feats[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    for j, c in enumerate(classes):
        own = ys == c
        if counts[j] > 1:
            dists[own, j] *= (counts[j] / (counts[j] - 1.0)) ** 2
        else:
            dists[own, j] = np.inf
    pred = np.array([classes[j] for j in np.argmin(dists, axis=1)])
    return float((pred == ys).mean())
