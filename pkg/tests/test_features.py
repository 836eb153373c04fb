"""Masks, fusion, mock providers, the binary feature cache, and adapters."""

import json
import struct
import sys
import zlib
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emoturn.features import (
    ABLATION_ROWS,
    CACHE_MAGIC,
    EMBED_DIM,
    VAD_DIM,
    AblationMask,
    AdapterError,
    CacheCorruption,
    CacheKey,
    CommandEmbedProvider,
    FeatureCache,
    MockAsr,
    MockProvider,
    ProviderId,
    SignalHook,
    adapter_output_name,
    class_directions,
    decode_record,
    encode_record,
    fuse,
)
from emoturn.corpus import INAUDIBLE_MARKER
from emoturn.rng import SplitMix64


# ── Ablation masks ─────────────────────────────────────────────────────────

ALL_MASKS = [
    AblationMask(use_speech=s, use_text=t, use_vad=v)
    for s in (False, True)
    for t in (False, True)
    for v in (False, True)
    if s or t or v
]


def test_mask_labels():
    assert AblationMask(use_speech=True).label == "W"
    assert AblationMask(use_speech=True, use_text=True).label == "T+W"
    assert AblationMask(use_speech=True, use_vad=True).label == "W+VAD"
    assert AblationMask(use_speech=False, use_text=True, use_vad=True).label == "T+VAD"
    assert AblationMask(use_speech=True, use_text=True, use_vad=True).label == "T+W+VAD"
    assert AblationMask(use_speech=False, use_text=True).label == "T"
    assert AblationMask(use_speech=False, use_vad=True).label == "VAD"


def test_mask_parse_round_trip():
    for mask in ALL_MASKS:
        assert AblationMask.parse(mask.label) == mask


def test_mask_parse_tolerates_case_and_spaces():
    assert AblationMask.parse(" t + w ") == AblationMask(use_speech=True, use_text=True)
    assert AblationMask.parse("vad") == AblationMask(use_speech=False, use_vad=True)


def test_mask_fused_dims():
    assert AblationMask.parse("W").fused_dim == EMBED_DIM
    assert AblationMask.parse("T+W").fused_dim == 2 * EMBED_DIM
    assert AblationMask.parse("W+VAD").fused_dim == EMBED_DIM + VAD_DIM
    assert AblationMask.parse("T+VAD").fused_dim == EMBED_DIM + VAD_DIM
    assert AblationMask.parse("T+W+VAD").fused_dim == 2 * EMBED_DIM + VAD_DIM
    assert AblationMask.parse("VAD").fused_dim == VAD_DIM


def test_mask_requires_at_least_one_block():
    with pytest.raises(ValueError):
        AblationMask(use_speech=False, use_text=False, use_vad=False)


def test_mask_parse_rejects_unknown_block():
    with pytest.raises(ValueError, match="PITCH"):
        AblationMask.parse("W+pitch")


def test_ablation_rows_fixed_order():
    assert tuple(m.label for m in ABLATION_ROWS) == ("W", "T+W", "W+VAD", "T+VAD", "T+W+VAD")


# ── Fusion layout ──────────────────────────────────────────────────────────

def test_fuse_block_layout():
    speech = np.full(EMBED_DIM, 1.0)
    text = np.full(EMBED_DIM, 2.0)
    vad = np.arange(VAD_DIM, dtype=np.float64)
    fused = fuse(AblationMask.parse("T+W+VAD"), speech=speech, text=text, vad=vad)
    assert fused.shape == (2 * EMBED_DIM + VAD_DIM,)
    assert np.array_equal(fused[:EMBED_DIM], speech)
    assert np.array_equal(fused[EMBED_DIM : 2 * EMBED_DIM], text)
    assert np.array_equal(fused[2 * EMBED_DIM :], vad)


def test_fuse_skips_disabled_blocks():
    speech = np.full(EMBED_DIM, 3.0)
    vad = np.full(VAD_DIM, 4.0)
    fused = fuse(AblationMask.parse("W+VAD"), speech=speech, text=np.zeros(EMBED_DIM), vad=vad)
    assert fused.shape == (EMBED_DIM + VAD_DIM,)
    assert np.array_equal(fused[:EMBED_DIM], speech)
    assert np.array_equal(fused[EMBED_DIM:], vad)


def test_fuse_missing_enabled_block():
    with pytest.raises(ValueError, match="speech"):
        fuse(AblationMask.parse("W"))
    with pytest.raises(ValueError, match="vad"):
        fuse(AblationMask.parse("W+VAD"), speech=np.zeros(EMBED_DIM))


def test_fuse_rejects_wrong_dim():
    with pytest.raises(ValueError, match="dim"):
        fuse(AblationMask.parse("W"), speech=np.zeros(EMBED_DIM - 1))


def test_fuse_rejects_non_finite():
    bad = np.zeros(EMBED_DIM)
    bad[7] = np.nan
    with pytest.raises(ValueError, match="finite"):
        fuse(AblationMask.parse("W"), speech=bad)


# ── Mock providers ─────────────────────────────────────────────────────────

def test_mock_provider_deterministic():
    a = MockProvider(seed=7)
    b = MockProvider(seed=7)
    v1 = a.speech_embed("audio/x.pcm#1.000000-2.000000")
    v2 = b.speech_embed("audio/x.pcm#1.000000-2.000000")
    assert v1.dtype == np.float32
    assert v1.tobytes() == v2.tobytes()
    assert a.text_embed("kya scene hai").tobytes() == b.text_embed("kya scene hai").tobytes()


def test_mock_provider_seed_and_kind_sensitivity():
    p = MockProvider(seed=1)
    q = MockProvider(seed=2)
    assert not np.array_equal(p.speech_embed("k"), q.speech_embed("k"))
    assert not np.array_equal(p.speech_embed("k"), p.text_embed("k"))
    assert not np.array_equal(p.text_embed("k"), p.text_embed("k2"))


def test_mock_provider_unit_norm():
    p = MockProvider(seed=3)
    for key in ("a", "b", "some longer key"):
        assert np.linalg.norm(p.speech_embed(key)) == pytest.approx(1.0, abs=1e-6)
        assert np.linalg.norm(p.text_embed(key)) == pytest.approx(1.0, abs=1e-6)


def test_mock_provider_id_format():
    p = MockProvider(seed=42)
    assert str(p.provider_id("speech")) == "mock-speech@seed42"
    assert str(p.provider_id("text")) == "mock-text@seed42"


def test_mock_provider_id_reflects_hook():
    hook_a = SignalHook(seed=1, by_audio={"k": 0}, by_text={}, strength={"speech": 0.5})
    hook_b = SignalHook(seed=1, by_audio={"k": 1}, by_text={}, strength={"speech": 0.5})
    plain = str(MockProvider(seed=0).provider_id("speech"))
    with_a = str(MockProvider(seed=0, hook=hook_a).provider_id("speech"))
    with_b = str(MockProvider(seed=0, hook=hook_b).provider_id("speech"))
    assert plain != with_a
    assert with_a != with_b
    assert with_a.startswith("mock-speech@seed0+hook")


def test_hook_injects_class_direction():
    hook = SignalHook(seed=11, by_audio={"hit": 4}, by_text={}, strength={"speech": 0.8})
    base = MockProvider(seed=5).speech_embed("hit").astype(np.float64)
    hooked = MockProvider(seed=5, hook=hook).speech_embed("hit").astype(np.float64)
    direction = class_directions(11, EMBED_DIM)[4].astype(np.float64)
    # float32 round-trip on the sum leaves a few ulps of slack
    assert np.allclose(hooked, base + 0.8 * direction, atol=1e-6)


def test_hook_leaves_unlisted_keys_and_kinds_alone():
    hook = SignalHook(seed=11, by_audio={"hit": 4}, by_text={}, strength={"speech": 0.8})
    plain = MockProvider(seed=5)
    hooked = MockProvider(seed=5, hook=hook)
    assert hooked.speech_embed("miss").tobytes() == plain.speech_embed("miss").tobytes()
    assert hooked.text_embed("hit").tobytes() == plain.text_embed("hit").tobytes()


def test_hook_zero_strength_is_identity():
    hook = SignalHook(seed=11, by_audio={"hit": 2}, by_text={}, strength={"speech": 0.0})
    plain = MockProvider(seed=5)
    hooked = MockProvider(seed=5, hook=hook)
    assert hooked.speech_embed("hit").tobytes() == plain.speech_embed("hit").tobytes()


def test_signal_hook_json_round_trip(tmp_path):
    hook = SignalHook(
        seed=9,
        by_audio={"a#0.000000-1.000000": 0, "b": 8},
        by_text={"hello world": 3},
        strength={"speech": 0.9, "text": 0.45},
    )
    assert SignalHook.from_json(hook.to_json()) == hook
    path = tmp_path / "hook.json"
    hook.save(path)
    assert SignalHook.load(path) == hook


def test_class_directions_unit_and_distinct():
    dirs = class_directions(0, EMBED_DIM)
    assert dirs.shape == (9, EMBED_DIM)
    norms = np.linalg.norm(dirs, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-6)
    gram = np.abs(dirs @ dirs.T - np.eye(9))
    # random high-dim directions are near-orthogonal
    assert gram.max() < 0.2


def test_mock_asr_returns_stored_transcript():
    asr = MockAsr({"a.pcm": "kya baat hai", "b.pcm": INAUDIBLE_MARKER})
    assert asr.transcribe("a.pcm") == "kya baat hai"
    assert asr.transcribe("b.pcm") == ""
    assert asr.transcribe("missing.pcm") == ""
    assert asr.transcribe_batch(["a.pcm", "b.pcm"]) == ["kya baat hai", ""]
    assert str(asr.provider_id()) == "mock-asr@v1"


# ── Binary record format ───────────────────────────────────────────────────

def test_record_round_trip_exact():
    vec = np.array([0.0, -0.0, 1.5, -2.25, 3.4e38], dtype=np.float32)
    key, out = decode_record(encode_record("utt_0001|mock-speech|seed0|speech", vec))
    assert key == "utt_0001|mock-speech|seed0|speech"
    assert out.tobytes() == vec.tobytes()


def test_record_rejects_multidim_vector():
    with pytest.raises(ValueError):
        encode_record("k", np.zeros((2, 2), dtype=np.float32))


@settings(max_examples=150, deadline=None)
@given(
    key=st.text(max_size=60),
    values=st.lists(st.floats(width=32, allow_nan=True), min_size=0, max_size=32),
)
def test_record_round_trip_property(key, values):
    vec = np.array(values, dtype=np.float32)
    stored_key, out = decode_record(encode_record(key, vec))
    assert stored_key == key
    assert out.tobytes() == vec.tobytes()


def test_record_bad_magic():
    blob = encode_record("k", np.zeros(3, dtype=np.float32))
    with pytest.raises(CacheCorruption, match="magic"):
        decode_record(b"XXXX" + blob[4:])


def test_record_truncation_and_extension():
    blob = encode_record("k", np.ones(4, dtype=np.float32))
    with pytest.raises(CacheCorruption):
        decode_record(blob[:-1])
    with pytest.raises(CacheCorruption):
        decode_record(blob + b"\x00")
    with pytest.raises(CacheCorruption):
        decode_record(blob[:8])


def test_record_crc_mismatch():
    blob = bytearray(encode_record("k", np.ones(4, dtype=np.float32)))
    blob[-1] ^= 0x01  # flip one payload bit
    with pytest.raises(CacheCorruption, match="crc"):
        decode_record(bytes(blob))


def test_record_non_utf8_key():
    key_bytes = b"\xff\xfe"
    payload = np.ones(2, dtype="<f4").tobytes()
    dim_and_key = struct.pack("<II", 2, len(key_bytes)) + key_bytes
    crc = zlib.crc32(dim_and_key + payload) & 0xFFFFFFFF
    blob = CACHE_MAGIC + dim_and_key + struct.pack("<I", crc) + payload
    with pytest.raises(CacheCorruption, match="utf-8"):
        decode_record(blob)


# ── Feature cache ──────────────────────────────────────────────────────────

def _key(i: int) -> CacheKey:
    return CacheKey(
        utterance_id=f"utt_{i:04d}",
        provider=ProviderId(name="mock-speech", version=f"seed{i % 3}"),
        block_kind="speech" if i % 2 else "text",
    )


def test_cache_key_string():
    key = CacheKey("u1", ProviderId("mock-text", "seed4"), "text")
    assert key.as_string() == "u1|mock-text|seed4|text"


def test_cache_round_trip_randomized(tmp_path):
    cache = FeatureCache(tmp_path)
    rng = SplitMix64(20250815)
    stored = {}
    for i in range(1000):
        dim = 1 + rng.randint(64)
        vec = np.array(
            [(rng.uniform() - 0.5) * 2e6 for _ in range(dim)], dtype=np.float32
        )
        key = _key(i)
        cache.put(key, vec)
        stored[i] = (key, vec.tobytes())
    for i, (key, raw) in stored.items():
        out = cache.get(key)
        assert out is not None, f"record {i} missing"
        assert out.dtype == np.float32
        assert out.tobytes() == raw, f"record {i} not bit-exact"


def test_cache_get_absent_returns_none(tmp_path):
    cache = FeatureCache(tmp_path)
    assert cache.get(_key(0)) is None


def test_cache_overwrite_replaces_record(tmp_path):
    cache = FeatureCache(tmp_path)
    key = _key(1)
    cache.put(key, np.zeros(4, dtype=np.float32))
    cache.put(key, np.ones(4, dtype=np.float32))
    assert np.array_equal(cache.get(key), np.ones(4, dtype=np.float32))
    assert not list(Path(tmp_path).glob("*.tmp"))


def test_cache_detects_any_single_byte_corruption(tmp_path):
    cache = FeatureCache(tmp_path)
    key = _key(2)
    cache.put(key, np.array([1.0, -2.0, 3.5, 0.25], dtype=np.float32))
    path = next(Path(tmp_path).glob("*.vec"))
    pristine = path.read_bytes()
    for pos in range(len(pristine)):
        corrupted = bytearray(pristine)
        corrupted[pos] ^= 0x01
        path.write_bytes(bytes(corrupted))
        with pytest.raises(CacheCorruption):
            cache.get(key)
    path.write_bytes(pristine)
    assert cache.get(key) is not None


def test_cache_detects_record_under_wrong_key(tmp_path):
    cache = FeatureCache(tmp_path)
    a, b = _key(3), _key(4)
    cache.put(a, np.ones(2, dtype=np.float32))
    src = cache._path(a)
    src.replace(cache._path(b))
    with pytest.raises(CacheCorruption, match="holds key"):
        cache.get(b)


def test_cache_get_or_compute_computes_once(tmp_path):
    cache = FeatureCache(tmp_path)
    calls = []

    def compute():
        calls.append(1)
        return np.full(3, 7.0, dtype=np.float32)

    key = _key(5)
    first = cache.get_or_compute(key, compute)
    second = cache.get_or_compute(key, compute)
    assert len(calls) == 1
    assert first.tobytes() == second.tobytes()


# ── Command adapters ───────────────────────────────────────────────────────

GOOD_ADAPTER = """\
import json, sys
from pathlib import Path
import numpy as np
from emoturn.features import EMBED_DIM, adapter_output_name, encode_record

manifest, out_dir = sys.argv[1], sys.argv[2]
for line in Path(manifest).read_text(encoding="utf-8").splitlines():
    item = json.loads(line)
    fill = float(sum(item["value"].encode("utf-8")) % 997)
    vec = np.full(EMBED_DIM, fill, dtype=np.float32)
    blob = encode_record(item["key"], vec)
    Path(out_dir, adapter_output_name(item["key"]) + ".vec").write_bytes(blob)
"""


def _write_adapter(tmp_path, body):
    script = tmp_path / "adapter.py"
    script.write_text(body, encoding="utf-8")
    return [sys.executable, str(script)]


def test_command_provider_happy_path(tmp_path):
    cmd = _write_adapter(tmp_path, GOOD_ADAPTER)
    provider = CommandEmbedProvider(cmd, ProviderId("xlsr", "v1"), kind="speech")
    vecs = provider.embed_batch([("k1", "hello"), ("k2", "zzz")])
    assert len(vecs) == 2
    assert vecs[0].shape == (EMBED_DIM,)
    assert vecs[0][0] == float(sum(b"hello") % 997)
    assert vecs[1][0] == float(sum(b"zzz") % 997)
    assert provider.speech_embed("hello")[0] == vecs[0][0]
    assert str(provider.provider_id("speech")) == "xlsr@v1"


def test_command_provider_text_kind(tmp_path):
    cmd = _write_adapter(tmp_path, GOOD_ADAPTER)
    provider = CommandEmbedProvider(cmd, ProviderId("muril", "v2"), kind="text")
    vec = provider.text_embed("kya haal hai")
    assert vec[0] == float(sum("kya haal hai".encode()) % 997)


def test_command_provider_rejects_unknown_kind():
    with pytest.raises(ValueError, match="kind"):
        CommandEmbedProvider(["true"], ProviderId("x", "v"), kind="prosody")


def test_command_provider_nonzero_exit(tmp_path):
    cmd = _write_adapter(tmp_path, "import sys; sys.stderr.write('boom'); sys.exit(3)")
    provider = CommandEmbedProvider(cmd, ProviderId("x", "v"), kind="speech")
    with pytest.raises(AdapterError, match="boom"):
        provider.embed_batch([("k", "v")])


def test_command_provider_missing_record(tmp_path):
    cmd = _write_adapter(tmp_path, "import sys\n")  # writes nothing
    provider = CommandEmbedProvider(cmd, ProviderId("x", "v"), kind="speech")
    with pytest.raises(AdapterError, match="no record"):
        provider.embed_batch([("k", "v")])


def test_command_provider_key_mismatch(tmp_path):
    body = GOOD_ADAPTER.replace(
        'encode_record(item["key"], vec)', 'encode_record("wrong", vec)'
    )
    cmd = _write_adapter(tmp_path, body)
    provider = CommandEmbedProvider(cmd, ProviderId("x", "v"), kind="speech")
    with pytest.raises(AdapterError, match="mismatch"):
        provider.embed_batch([("k", "v")])


def test_command_provider_wrong_dim(tmp_path):
    body = GOOD_ADAPTER.replace("np.full(EMBED_DIM, fill", "np.full(7, fill")
    cmd = _write_adapter(tmp_path, body)
    provider = CommandEmbedProvider(cmd, ProviderId("x", "v"), kind="speech")
    with pytest.raises(AdapterError, match="dims"):
        provider.embed_batch([("k", "v")])


def test_command_provider_unlaunchable_command():
    provider = CommandEmbedProvider(
        ["/nonexistent/adapter-binary"], ProviderId("x", "v"), kind="speech"
    )
    with pytest.raises(AdapterError, match="failed to start"):
        provider.embed_batch([("k", "v")])


def test_adapter_output_name_is_stable_hex():
    name = adapter_output_name("some key")
    assert name == adapter_output_name("some key")
    assert len(name) == 32
    int(name, 16)
