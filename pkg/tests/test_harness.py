"""End-to-end training harness: configs, pipeline, runs, ablation, search."""

import json
from dataclasses import replace

import numpy as np
import pytest

from emoturn.corpus import (
    EMOTIONS,
    AudioRef,
    Conversation,
    Corpus,
    CorpusMeta,
    SpeakerRole,
    Utterance,
    load_manifest,
    split,
)
from emoturn.features import ABLATION_ROWS, AblationMask, MockProvider
from emoturn.harness import (
    AblationReport,
    AblationRow,
    FeaturePipeline,
    RunConfig,
    SearchSpace,
    ablate,
    evaluate,
    random_search,
    sample_config,
    train_run,
)
from emoturn.model import CheckpointError, ModelConfig, TrainConfig
from emoturn.rng import SplitMix64
from emoturn.synthetic import gen_synthetic

UNIFORM = {e: 1.0 / len(EMOTIONS) for e in EMOTIONS}


@pytest.fixture(scope="module")
def corpus_paths(tmp_path_factory):
    """Separable synthetic corpus: every block carries strong planted signal."""
    out = tmp_path_factory.mktemp("separable")
    bundle = gen_synthetic(
        14, 10,
        class_priors=UNIFORM,
        signal_spec={"speech": 0.9, "text": 0.9, "vad": 0.9},
        seed=101,
    )
    return bundle.write(out)


def _rc(paths, mask_label="W", hidden=8, epochs=2, lr=3e-3, patience=50,
        dropout=0.1, **kw):
    mask = AblationMask.parse(mask_label)
    model = ModelConfig(
        input_dim=mask.fused_dim, hidden_dim=hidden,
        dropout_rate=dropout, seed=kw.pop("model_seed", 0),
    )
    train = TrainConfig(
        learning_rate=lr, max_epochs=epochs, patience=patience,
        seed=kw.pop("train_seed", 0),
    )
    return RunConfig(
        manifest_path=str(paths["manifest"]),
        mask=mask,
        model=model,
        train=train,
        lexicon_path=str(paths["lexicon"]),
        hook_path=str(paths["hook"]),
        **kw,
    )


# ── RunConfig ──────────────────────────────────────────────────────────────

def test_run_config_validation(corpus_paths):
    with pytest.raises(ValueError, match="input_dim"):
        RunConfig(
            manifest_path="m.jsonl",
            mask=AblationMask.parse("W"),
            model=ModelConfig(input_dim=10, hidden_dim=4),
            train=TrainConfig(),
        )
    with pytest.raises(ValueError, match="lexicon"):
        RunConfig(
            manifest_path="m.jsonl",
            mask=AblationMask.parse("W+VAD"),
            model=ModelConfig(input_dim=778, hidden_dim=4),
            train=TrainConfig(),
        )
    with pytest.raises(ValueError, match="split_mode"):
        _rc(corpus_paths, split_mode="speaker")


def test_run_config_hash_is_stable_and_sensitive(corpus_paths):
    rc = _rc(corpus_paths)
    assert rc.content_hash() == _rc(corpus_paths).content_hash()
    assert len(rc.content_hash()) == 16
    changed = replace(rc, train=replace(rc.train, learning_rate=1e-4))
    assert changed.content_hash() != rc.content_hash()
    # the cache location is an execution detail, not part of the run identity
    cached = replace(rc, cache_dir="/tmp/some-cache")
    assert cached.content_hash() == rc.content_hash()


# ── Feature pipeline ───────────────────────────────────────────────────────

def test_pipeline_providers_and_vector_dims(corpus_paths):
    rc = _rc(corpus_paths, mask_label="T+W+VAD")
    pipeline = FeaturePipeline.from_config(rc)
    providers = pipeline.providers
    # the hook participates in the provider identity
    assert providers["speech"].startswith("mock-speech@seed0+hook")
    assert providers["text"].startswith("mock-text@seed0+hook")
    assert providers["vad"].startswith("vad-lexicon@")
    without_hook = replace(rc, hook_path=None)
    bare = FeaturePipeline.from_config(without_hook).providers
    assert bare["speech"] == "mock-speech@seed0"
    assert bare["speech"] != providers["speech"]

    corpus = load_manifest(rc.manifest_path)
    utt = next(corpus.utterances)
    assert pipeline.utterance_vector(utt).shape == (rc.mask.fused_dim,)

    speech_only = FeaturePipeline.from_config(_rc(corpus_paths, mask_label="W"))
    assert set(speech_only.providers) == {"speech"}
    assert speech_only.utterance_vector(utt).shape == (768,)


def test_pipeline_vad_identity_tracks_lexicon_content(corpus_paths, tmp_path):
    rc = _rc(corpus_paths, mask_label="W+VAD")
    original = FeaturePipeline.from_config(rc).providers["vad"]
    # perturb one lexicon value and the digest must move
    lines = (tmp_path / "lex.tsv", corpus_paths["lexicon"].read_text(encoding="utf-8"))
    mutated = lines[1].replace("\t0.", "\t0.9", 1)
    lines[0].write_text(mutated, encoding="utf-8")
    rc2 = replace(rc, lexicon_path=str(lines[0]))
    assert FeaturePipeline.from_config(rc2).providers["vad"] != original


def test_pipeline_cache_round_trip(corpus_paths, tmp_path):
    rc = _rc(corpus_paths, mask_label="T+W", cache_dir=str(tmp_path / "cache"))
    corpus = load_manifest(rc.manifest_path)
    utt = next(corpus.utterances)
    first = FeaturePipeline.from_config(rc).utterance_vector(utt)
    records = list((tmp_path / "cache").glob("*.vec"))
    assert len(records) == 2  # one speech, one text
    again = FeaturePipeline.from_config(rc).utterance_vector(utt)
    assert np.array_equal(first, again)


def test_pipeline_drops_conversations_without_labels():
    from emoturn.harness import _prepare

    def utt(conv, i, labeled):
        from emoturn.corpus import LabelSet, EmotionLabel, SentimentLabel, VadAnnotation

        labels = None
        if labeled:
            labels = LabelSet(
                emotion=EmotionLabel.HAPPY,
                sentiment=SentimentLabel.POSITIVE,
                vad=VadAnnotation(5, 5, 5),
            )
        return Utterance(
            id=f"{conv}_u{i}", conversation_id=conv, index=i,
            speaker=SpeakerRole.CUSTOMER if i % 2 == 0 else SpeakerRole.EXECUTIVE,
            audio=AudioRef(path=f"mock://{conv}_{i}.pcm"),
            transcript=f"word {conv} {i}", labels=labels,
        )

    convs = [
        Conversation(id="c0", utterances=(utt("c0", 0, True), utt("c0", 1, False))),
        Conversation(id="c1", utterances=(utt("c1", 0, False), utt("c1", 1, False))),
    ]
    corpus = Corpus(conversations=tuple(convs), meta=CorpusMeta())
    pipeline = FeaturePipeline(AblationMask.parse("W"), MockProvider(seed=0))
    data = _prepare(pipeline, corpus)
    assert len(data) == 1
    xs, ys = data[0]
    assert len(xs) == 2
    assert ys == [1, None]  # happy is class index 1; unlabeled stays None


# ── Training runs ──────────────────────────────────────────────────────────

def test_train_run_history_and_artifacts(corpus_paths, tmp_path):
    rc = _rc(corpus_paths, mask_label="W", hidden=8, epochs=2)
    result = train_run(rc, out_root=tmp_path)

    assert [h["epoch"] for h in result.history] == [0, 1]
    for entry in result.history:
        assert entry["train_loss"] > 0.0
        assert 0.0 <= entry["dev"]["accuracy"] <= 1.0
        assert "negative_weighted_precision" in entry["dev"]
    scores = [h["dev"]["negative_weighted_precision"] for h in result.history]
    assert result.best_dev_negative_precision == max(scores)
    assert result.best_epoch == scores.index(max(scores))

    run_dir = tmp_path / rc.content_hash()
    assert result.run_dir == run_dir
    assert (run_dir / "checkpoint.emck").is_file()
    history_lines = (run_dir / "history.jsonl").read_text().splitlines()
    assert len(history_lines) == 2
    assert json.loads(history_lines[0])["epoch"] == 0
    config = json.loads((run_dir / "config.json").read_text())
    assert config == rc.to_json()
    assert result.checkpoint.mask_label == "W"
    assert set(result.checkpoint.providers) == {"speech"}


def test_train_run_is_bitwise_reproducible(corpus_paths, tmp_path):
    rc = _rc(corpus_paths, mask_label="W", hidden=8, epochs=2)
    first = train_run(rc, out_root=tmp_path / "a")
    second = train_run(rc, out_root=tmp_path / "b")
    ck_a = (first.run_dir / "checkpoint.emck").read_bytes()
    ck_b = (second.run_dir / "checkpoint.emck").read_bytes()
    assert ck_a == ck_b
    hist_a = (first.run_dir / "history.jsonl").read_bytes()
    hist_b = (second.run_dir / "history.jsonl").read_bytes()
    assert hist_a == hist_b


def test_train_run_seed_changes_outcome(corpus_paths):
    base = _rc(corpus_paths, mask_label="W", hidden=8, epochs=1)
    other = _rc(corpus_paths, mask_label="W", hidden=8, epochs=1, model_seed=1)
    a = train_run(base)
    b = train_run(other)
    assert a.history[0]["train_loss"] != b.history[0]["train_loss"]


def test_training_learns_planted_signal(corpus_paths):
    rc = _rc(corpus_paths, mask_label="T+W+VAD", hidden=24, epochs=8, lr=3e-3)
    result = train_run(rc)
    best_acc = max(h["dev"]["accuracy"] for h in result.history)
    assert best_acc >= 0.9


def test_early_stopping_respects_patience(corpus_paths):
    rc = _rc(
        corpus_paths, mask_label="T+W+VAD", hidden=24, epochs=40, lr=3e-3,
        patience=2,
    )
    result = train_run(rc)
    assert len(result.history) < 40, "training never stopped early"
    # the run extends exactly `patience` epochs past the best one
    assert len(result.history) - 1 == result.best_epoch + 2
    assert result.best_dev_negative_precision >= 0.9


def test_checkpoint_holds_best_epoch_parameters(corpus_paths):
    rc = _rc(corpus_paths, mask_label="W", hidden=12, epochs=4)
    result = train_run(rc)
    dev_report = evaluate(result.checkpoint, rc, which="dev")
    recorded = result.history[result.best_epoch]["dev"]
    assert dev_report.accuracy == recorded["accuracy"]
    assert dev_report.negative.value == recorded["negative_weighted_precision"]


# ── Evaluation guards ──────────────────────────────────────────────────────

def test_evaluate_split_sizes_and_purity(corpus_paths):
    rc = _rc(corpus_paths, mask_label="W", hidden=8, epochs=1)
    result = train_run(rc)
    corpus = load_manifest(rc.manifest_path)
    parts = split(corpus, seed=rc.split_seed, mode=rc.split_mode)
    for which, part in zip(("train", "dev", "test"), parts):
        report = evaluate(result.checkpoint, rc, which=which)
        assert report.n_examples == len(list(part.labeled_utterances()))
    one = evaluate(result.checkpoint, rc, which="test")
    two = evaluate(result.checkpoint, rc, which="test")
    assert one.summary() == two.summary()
    with pytest.raises(ValueError, match="split"):
        evaluate(result.checkpoint, rc, which="holdout")


def test_evaluate_rejects_mask_mismatch(corpus_paths):
    rc = _rc(corpus_paths, mask_label="W", hidden=8, epochs=1)
    result = train_run(rc)
    other = _rc(corpus_paths, mask_label="T+W", hidden=8, epochs=1)
    with pytest.raises(CheckpointError, match="mask"):
        evaluate(result.checkpoint, other, which="test")


def test_evaluate_rejects_provider_mismatch(corpus_paths):
    rc = _rc(corpus_paths, mask_label="W", hidden=8, epochs=1)
    result = train_run(rc)
    reseeded = replace(rc, provider_seed=3)
    with pytest.raises(CheckpointError, match="providers"):
        evaluate(result.checkpoint, reseeded, which="test")


# ── Ablation ───────────────────────────────────────────────────────────────

def test_with_mask_resizes_model_input(corpus_paths):
    from emoturn.harness import _with_mask

    base = _rc(corpus_paths, mask_label="T+W+VAD", hidden=8, epochs=1)
    dims = [_with_mask(base, m).model.input_dim for m in ABLATION_ROWS]
    assert dims == [768, 1536, 778, 778, 1546]
    full = AblationMask.parse("T+W+VAD").fused_dim
    assert all(d <= full for d in dims)


def test_ablate_produces_five_rows_in_fixed_order(corpus_paths, tmp_path):
    base = _rc(corpus_paths, mask_label="T+W+VAD", hidden=10, epochs=2)
    report = ablate(base, out_root=tmp_path)
    assert [r.label for r in report.rows] == ["W", "T+W", "W+VAD", "T+VAD", "T+W+VAD"]
    for row in report.rows:
        for value in (row.neutral, row.anger, row.sad, row.frustrated):
            assert 0.0 <= value <= 1.0
    # one run directory per mask config
    assert len(list(tmp_path.iterdir())) == 5


def test_ablate_parallel_matches_serial(corpus_paths):
    base = _rc(corpus_paths, mask_label="T+W+VAD", hidden=8, epochs=1)
    serial = ablate(base, jobs=1)
    parallel = ablate(base, jobs=3)
    assert serial == parallel


def test_ablation_report_formatting():
    report = AblationReport(
        rows=(
            AblationRow("W", 0.92, 0.74, 0.63, 0.69, 0.61, 0.14),
            AblationRow("T+W+VAD", 0.96, 0.79, 0.67, 0.74, 0.66, None),
        )
    )
    text = report.to_text()
    lines = text.splitlines()
    assert lines[0].split() == ["Features", "Neu", "Ang", "Sad", "Fru", "Neg", "Pos"]
    assert set(lines[1]) <= {"-", " "}
    assert "0.9200" in lines[2]
    assert lines[3].rstrip().endswith("-")

    csv = report.to_csv()
    csv_lines = csv.splitlines()
    assert csv_lines[0] == "features,neutral,anger,sad,frustrated,negative,positive"
    assert csv_lines[1].startswith("W,0.920000")
    assert csv_lines[2].endswith(",")  # undefined positive renders empty


# ── Random search ──────────────────────────────────────────────────────────

def test_search_space_validation():
    with pytest.raises(ValueError):
        SearchSpace(hidden_choices=())
    with pytest.raises(ValueError):
        SearchSpace(lr_min=0.0)
    with pytest.raises(ValueError):
        SearchSpace(lr_min=1e-2, lr_max=1e-3)
    with pytest.raises(ValueError):
        SearchSpace(dropout_min=0.4, dropout_max=0.2)


def test_sample_config_stays_inside_space(corpus_paths):
    base = _rc(corpus_paths, mask_label="W", hidden=8, epochs=1)
    space = SearchSpace(
        lr_min=1e-4, lr_max=1e-2, hidden_choices=(8, 16), dropout_min=0.1,
        dropout_max=0.3,
    )
    rng = SplitMix64(5)
    lrs = []
    for _ in range(50):
        rc = sample_config(base, space, rng)
        assert 1e-4 <= rc.train.learning_rate <= 1e-2
        assert rc.model.hidden_dim in (8, 16)
        assert 0.1 <= rc.model.dropout_rate <= 0.3
        assert rc.mask == base.mask
        lrs.append(rc.train.learning_rate)
    # log-uniform sampling spreads across decades, not just the top one
    assert min(lrs) < 3e-4 and max(lrs) > 3e-3


def test_random_search_budget_and_determinism(corpus_paths):
    base = _rc(corpus_paths, mask_label="W", hidden=8, epochs=1)
    space = SearchSpace(
        lr_min=1e-3, lr_max=1e-2, hidden_choices=(8,), dropout_min=0.0,
        dropout_max=0.2,
    )
    with pytest.raises(ValueError, match="budget"):
        random_search(base, space, budget=0, seed=0)

    result = random_search(base, space, budget=3, seed=9)
    assert len(result.trials) == 3
    assert [t.index for t in result.trials] == [0, 1, 2]
    best_score = max(t.dev_negative_precision for t in result.trials)
    first_best = next(
        t for t in result.trials if t.dev_negative_precision == best_score
    )
    assert result.best == first_best

    again = random_search(base, space, budget=3, seed=9)
    for a, b in zip(result.trials, again.trials):
        assert a.config == b.config
        assert a.dev_negative_precision == b.dev_negative_precision

    other_seed = random_search(base, space, budget=3, seed=10)
    assert [t.config.train.learning_rate for t in other_seed.trials] != [
        t.config.train.learning_rate for t in result.trials
    ]


def test_random_search_parallel_matches_serial(corpus_paths):
    base = _rc(corpus_paths, mask_label="W", hidden=8, epochs=1)
    space = SearchSpace(
        lr_min=1e-3, lr_max=1e-2, hidden_choices=(8,), dropout_min=0.0,
        dropout_max=0.2,
    )
    serial = random_search(base, space, budget=2, seed=4, jobs=1)
    parallel = random_search(base, space, budget=2, seed=4, jobs=2)
    assert serial.trials == parallel.trials
    assert serial.best == parallel.best
