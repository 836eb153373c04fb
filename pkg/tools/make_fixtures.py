"""Regenerate the bundled data fixtures.

Writes src/emoturn/data/nsed_shape.jsonl (a corpus with exactly the
published per-class utterance counts, 30 dyadic conversations) and
src/emoturn/data/paper_reference.csv (the published result tables, for
documentation only). Deterministic; safe to rerun.
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from emoturn.corpus import (
    AudioRef,
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
from emoturn.corpus import EMOTION_INDEX
from emoturn.rng import SplitMix64
from emoturn.synthetic import class_anchor

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "emoturn" / "data"

CLASS_COUNTS: dict[EmotionLabel, int] = {
    EmotionLabel.NEUTRAL: 3510,
    EmotionLabel.ANGER: 863,
    EmotionLabel.FRUSTRATED: 748,
    EmotionLabel.DISGUST: 116,
    EmotionLabel.SAD: 403,
    EmotionLabel.FEAR: 19,
    EmotionLabel.HAPPY: 57,
    EmotionLabel.SURPRISED: 13,
    EmotionLabel.EXCITED: 25,
}

WORDS = (
    "haan nahi theek hai sir madam please network problem recharge signal "
    "phone band ho gaya kal se paisa wapas chahiye complaint register kar "
    "do bill galat aya hello areey accha okay thank you bolo sun nahin aa "
    "raha balance khatam plan change karna internet slow chal raha service "
    "center gaya tha koi response nahi mila"
).split()

REFERENCE_CSV = """table,row,neutral,anger,sad,frustrated,negative,positive
encoders,wav2vec2-xlsr,0.81,,,,0.40,0.05
encoders,wav2vec2-xlsr-continual,0.89,,,,0.53,0.05
encoders,indic-wav2vec2,0.92,,,,0.57,0.10
encoders,indic-wav2vec2-continual,0.92,,,,0.61,0.14
features,W,0.92,0.74,0.63,0.69,0.61,0.14
features,T+W,0.93,0.76,0.64,0.71,0.64,0.15
features,W+VAD,0.95,0.75,0.64,0.71,0.65,0.15
features,T+VAD,0.95,0.78,0.65,0.72,0.65,0.15
features,T+W+VAD,0.96,0.79,0.67,0.74,0.66,0.16
"""


def vad_for(rng: SplitMix64, emotion: EmotionLabel) -> VadAnnotation:
    anchor = class_anchor(EMOTION_INDEX[emotion])
    values = []
    for x in anchor:
        scaled = int(round(1 + 9 * x)) + rng.randint(3) - 1
        values.append(min(10, max(1, scaled)))
    return VadAnnotation(*values)


def transcript_for(rng: SplitMix64) -> str:
    n = 4 + rng.randint(5)
    return " ".join(rng.choice(WORDS) for _ in range(n))


def main() -> None:
    rng = SplitMix64(20250815)
    labels: list[EmotionLabel] = []
    for emotion, count in CLASS_COUNTS.items():
        labels.extend([emotion] * count)
    assert len(labels) == 5754
    rng.shuffle(labels)

    # 30 conversations: 24 of 192 utterances plus 6 of 191 = 5754.
    sizes = [192] * 24 + [191] * 6
    assert sum(sizes) == len(labels)

    utterances: list[Utterance] = []
    cursor = 0
    for ci, size in enumerate(sizes):
        conv_id = f"c{ci:03d}"
        for ui in range(size):
            emotion = labels[cursor]
            cursor += 1
            start = ui * 3.0
            utterances.append(
                Utterance(
                    id=f"{conv_id}_u{ui:04d}",
                    conversation_id=conv_id,
                    index=ui,
                    speaker=SpeakerRole.CUSTOMER if ui % 2 == 0 else SpeakerRole.EXECUTIVE,
                    audio=AudioRef(
                        path=f"audio/{conv_id}.pcm",
                        start_sec=start,
                        end_sec=start + 2.5,
                    ),
                    transcript=transcript_for(rng),
                    labels=LabelSet(
                        emotion=emotion,
                        sentiment=default_sentiment(emotion),
                        vad=vad_for(rng, emotion),
                    ),
                )
            )

    corpus = build_corpus(
        utterances, meta=CorpusMeta(source="shape fixture: published class counts")
    )
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    manifest = DATA_DIR / "nsed_shape.jsonl"
    save_manifest(corpus, manifest)
    print(f"wrote {manifest} ({corpus.n_utterances} utterances)")

    reference = DATA_DIR / "paper_reference.csv"
    reference.write_text(REFERENCE_CSV, encoding="utf-8")
    print(f"wrote {reference}")


if __name__ == "__main__":
    main()
