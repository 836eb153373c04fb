import math

import pytest
from hypothesis import given, strategies as st

from emoturn.corpus import INAUDIBLE_MARKER
from emoturn.lexicon import (
    VAD_FEATURE_DIM,
    Lexicon,
    LexiconEntry,
    LexiconError,
    TransliterationTable,
    ZERO_VAD_FEATURE,
    load_lexicon,
    load_transliteration,
    normalize_token,
    save_lexicon,
    tokenize,
    utterance_vad,
)


def make_lexicon() -> Lexicon:
    return Lexicon([
        LexiconEntry("good", 0.9, 0.6, 0.7),
        LexiconEntry("bad", 0.1, 0.8, 0.3),
        LexiconEntry("theek", 0.6, 0.4, 0.5),
    ])


# ── Normalization and tokenization ────────────────────────────────────────


def test_normalize_strips_punctuation_and_lowercases():
    assert normalize_token("Hello!") == "hello"
    assert normalize_token("“quoted”") == "quoted"
    assert normalize_token("ठीक।") == "ठीक"
    assert normalize_token("--") == ""


def test_tokenize_basic():
    assert tokenize("Hello, THEEK hai!") == ["hello", "theek", "hai"]
    assert tokenize("   ") == []
    assert tokenize("") == []


def test_tokenize_inaudible_marker_is_empty():
    assert tokenize(INAUDIBLE_MARKER) == []


def test_tokenize_drops_pure_punctuation_tokens():
    assert tokenize("wait ... what ?!") == ["wait", "what"]


# ── Lexicon loading ───────────────────────────────────────────────────────


def test_load_lexicon_tsv(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text(
        "# word\tvalence\tarousal\tdominance\n"
        "Good\t0.9\t0.6\t0.7\n"
        "\n"
        "bad\t0.1\t0.8\t0.3\n"
    )
    lex = load_lexicon(path)
    assert len(lex) == 2
    assert lex.get("good").valence == 0.9
    assert "Good" not in lex  # keys are normalized


def test_load_lexicon_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("good\t0.9\t0.6\n")
    with pytest.raises(LexiconError, match="line 1.*4 tab-separated"):
        load_lexicon(path)
    path.write_text("good\t0.9\t0.6\tx\n")
    with pytest.raises(LexiconError, match="line 1.*non-numeric"):
        load_lexicon(path)
    path.write_text("good\t0.9\t0.6\t1.5\n")
    with pytest.raises(LexiconError, match="line 1"):
        load_lexicon(path)
    path.write_text("good\t0.9\t0.6\t0.7\nGOOD\t0.1\t0.1\t0.1\n")
    with pytest.raises(LexiconError, match="duplicate"):
        load_lexicon(path)


def test_entry_value_bounds():
    with pytest.raises(LexiconError, match="not in"):
        LexiconEntry("w", -0.1, 0.5, 0.5)
    with pytest.raises(LexiconError, match="not in"):
        LexiconEntry("w", 0.5, 1.1, 0.5)


def test_save_load_round_trip(tmp_path):
    lex = make_lexicon()
    path = tmp_path / "lex.tsv"
    save_lexicon(lex, path)
    loaded = load_lexicon(path)
    assert len(loaded) == len(lex)
    for entry in lex.entries():
        got = loaded.get(entry.key)
        assert math.isclose(got.valence, entry.valence, abs_tol=1e-6)
        assert math.isclose(got.arousal, entry.arousal, abs_tol=1e-6)
        assert math.isclose(got.dominance, entry.dominance, abs_tol=1e-6)


def test_load_transliteration(tmp_path):
    path = tmp_path / "translit.tsv"
    path.write_text("# source\tcanonical\nacha\taccha\nthik\ttheek\n")
    table = load_transliteration(path)
    assert table.canonical("acha") == "accha"
    assert table.canonical("unknown") == "unknown"
    assert len(table) == 2


# ── Per-utterance statistics ──────────────────────────────────────────────


def test_utterance_vad_hand_computed():
    lex = make_lexicon()
    feat = utterance_vad("good bad unknownword", lex)
    # Stats over the two found words only; coverage counts all three tokens.
    assert feat.mean_v == pytest.approx((0.9 + 0.1) / 2)
    assert feat.mean_a == pytest.approx((0.6 + 0.8) / 2)
    assert feat.mean_d == pytest.approx((0.7 + 0.3) / 2)
    assert feat.min_v == pytest.approx(0.1)
    assert feat.max_v == pytest.approx(0.9)
    assert feat.min_a == pytest.approx(0.6)
    assert feat.max_a == pytest.approx(0.8)
    assert feat.min_d == pytest.approx(0.3)
    assert feat.max_d == pytest.approx(0.7)
    assert feat.coverage == pytest.approx(2 / 3)


def test_utterance_vad_vector_layout():
    lex = make_lexicon()
    vec = utterance_vad("good", lex).as_vector()
    assert len(vec) == VAD_FEATURE_DIM
    # mean == min == max for a single found word.
    assert vec[0] == vec[3] == vec[6] == pytest.approx(0.9)
    assert vec[9] == pytest.approx(1.0)


def test_utterance_vad_empty_and_no_hits():
    lex = make_lexicon()
    assert utterance_vad("", lex) == ZERO_VAD_FEATURE
    assert utterance_vad(INAUDIBLE_MARKER, lex) == ZERO_VAD_FEATURE
    feat = utterance_vad("zzz qqq", lex)
    assert feat.coverage == 0.0
    assert feat.mean_v == 0.0


def test_utterance_vad_uses_transliteration():
    lex = make_lexicon()
    table = TransliterationTable({"thik": "theek"})
    feat = utterance_vad("thik", lex, table)
    assert feat.coverage == 1.0
    assert feat.mean_v == pytest.approx(0.6)


def test_punctuation_does_not_block_lookup():
    lex = make_lexicon()
    feat = utterance_vad("Good!!", lex)
    assert feat.coverage == 1.0


@given(
    st.lists(
        st.sampled_from(["good", "bad", "theek", "zzz", "qqq"]),
        min_size=1,
        max_size=12,
    )
)
def test_vad_stat_invariants(words):
    lex = make_lexicon()
    feat = utterance_vad(" ".join(words), lex)
    assert 0.0 <= feat.coverage <= 1.0
    if feat.coverage > 0:
        # Summation rounding can put the mean a few ulps outside [min, max].
        eps = 1e-12
        assert feat.min_v - eps <= feat.mean_v <= feat.max_v + eps
        assert feat.min_a - eps <= feat.mean_a <= feat.max_a + eps
        assert feat.min_d - eps <= feat.mean_d <= feat.max_d + eps
    vec = feat.as_vector()
    assert len(vec) == VAD_FEATURE_DIM
    assert all(0.0 <= x <= 1.0 for x in vec)
