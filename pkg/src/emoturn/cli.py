"""Command-line entry point tying the pipeline together.

Exit codes: 0 success, 1 domain error (bad data, incompatible checkpoint),
2 usage error. Option precedence is flags > config file > defaults; config
files hold one key=value per line with # comments.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .annotate import AnnotationStore
from .corpus import (
    Segment,
    SpeakerRole,
    build_corpus,
    class_distribution,
    load_manifest,
    save_manifest,
    segment_turns,
    split,
)
from .corpus import EMOTIONS
from .features import (
    AblationMask,
    AdapterError,
    CacheCorruption,
    FeatureCache,
    MockProvider,
    SignalHook,
)
from .harness import (
    FeaturePipeline,
    RunConfig,
    SearchSpace,
    ablate,
    evaluate,
    random_search,
    train_run,
)
from .lexicon import load_lexicon, load_transliteration
from .metrics import MetricsReport, cohen_kappa
from .model import CheckpointError, ModelConfig, TrainConfig, load_checkpoint
from .synthetic import DEFAULT_PRIORS, gen_synthetic

_MODEL_DEFAULTS = ModelConfig(input_dim=1)
_TRAIN_DEFAULTS = TrainConfig()


def _load_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _resolve(args, config: dict[str, str], name: str, default, cast=str):
    """Flag beats config file beats default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        try:
            return cast(config[name])
        except ValueError:
            raise ValueError(
                f"config key {name}: cannot parse {config[name]!r}"
            ) from None
    return default


_RUN_KEYS = {
    "manifest", "mask", "hidden_dim", "dropout", "learning_rate", "max_epochs",
    "patience", "clip_norm", "seed", "model_seed", "train_seed", "split_seed",
    "split_mode", "provider_seed", "lexicon", "translit", "hook", "cache_dir",
}


def _build_run_config(args) -> RunConfig:
    config = _load_config_file(args.config) if getattr(args, "config", None) else {}
    unknown = set(config) - _RUN_KEYS
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")

    def get(name, default, cast=str):
        return _resolve(args, config, name, default, cast)

    manifest = get("manifest", None)
    if manifest is None:
        raise ValueError("config key manifest: a manifest path is required")
    mask = AblationMask.parse(get("mask", "T+W+VAD"))
    seed = get("seed", 0, int)
    model = ModelConfig(
        input_dim=mask.fused_dim,
        hidden_dim=get("hidden_dim", _MODEL_DEFAULTS.hidden_dim, int),
        dropout_rate=get("dropout", _MODEL_DEFAULTS.dropout_rate, float),
        seed=get("model_seed", seed, int),
    )
    train = TrainConfig(
        learning_rate=get("learning_rate", _TRAIN_DEFAULTS.learning_rate, float),
        max_epochs=get("max_epochs", _TRAIN_DEFAULTS.max_epochs, int),
        patience=get("patience", _TRAIN_DEFAULTS.patience, int),
        clip_norm=get("clip_norm", _TRAIN_DEFAULTS.clip_norm, float),
        seed=get("train_seed", seed, int),
    )
    return RunConfig(
        manifest_path=manifest,
        mask=mask,
        model=model,
        train=train,
        split_seed=get("split_seed", seed, int),
        split_mode=get("split_mode", "conversation"),
        provider_seed=get("provider_seed", seed, int),
        lexicon_path=get("lexicon", None),
        translit_path=get("translit", None),
        hook_path=get("hook", None),
        cache_dir=get("cache_dir", None),
    )


def _render_report(report: MetricsReport) -> str:
    lines = [f"{'emotion':<12}{'prec':>8}{'recall':>8}{'f1':>8}{'support':>9}"]
    for emotion in EMOTIONS:
        m = report.per_class[emotion]
        flag = "*" if m.precision_undefined else ""
        lines.append(
            f"{emotion.value:<12}{m.precision:>8.4f}{m.recall:>8.4f}"
            f"{m.f1:>8.4f}{m.support:>9d}{flag}"
        )
    lines.append(f"accuracy {report.accuracy:.4f} on {report.n_examples} examples")

    def group_line(name, group):
        if group.undefined:
            return f"{name} weighted precision: undefined (no examples)"
        note = f" (absent: {', '.join(group.absent)})" if group.absent else ""
        return f"{name} weighted precision: {group.value:.4f}{note}"

    lines.append(group_line("negative", report.negative))
    lines.append(group_line("positive", report.positive))
    lines.append(f"neutral precision: {report.neutral_precision:.4f}")
    return "\n".join(lines) + "\n"


# ── Subcommand handlers ───────────────────────────────────────────────────


def _cmd_ingest(args) -> int:
    by_conv: dict[str, list[Segment]] = {}
    audio: dict[str, str] = {}
    with open(args.segments, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                conv_id = str(rec["conversation_id"])
                seg = Segment(
                    speaker=SpeakerRole(rec["speaker"]),
                    start_sec=float(rec["start_sec"]),
                    end_sec=float(rec["end_sec"]),
                    text=str(rec.get("text", "")),
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{args.segments}:{line_no}: {exc}") from None
            by_conv.setdefault(conv_id, []).append(seg)
            audio.setdefault(conv_id, str(rec.get("audio_path", "")))
    utterances = []
    for conv_id, segments in by_conv.items():
        utterances.extend(segment_turns(segments, conv_id, audio[conv_id]))
    corpus = build_corpus(utterances)
    save_manifest(corpus, args.out)
    print(
        f"ingested {sum(len(s) for s in by_conv.values())} segments into "
        f"{corpus.n_utterances} turns across {len(by_conv)} conversations -> {args.out}"
    )
    return 0


def _cmd_validate(args) -> int:
    corpus = load_manifest(args.manifest)
    labeled = len(corpus.labeled_utterances())
    print(
        f"ok: {len(corpus.conversations)} conversations, "
        f"{corpus.n_utterances} utterances, {labeled} labeled"
    )
    return 0


def _cmd_stats(args) -> int:
    corpus = load_manifest(args.manifest)
    rows = class_distribution(corpus)
    print(f"{'emotion':<12}{'count':>7}{'percent':>9}")
    for row in rows:
        print(f"{row.emotion.value:<12}{row.count:>7d}{row.percentage:>8.1f}%")
    total = sum(r.count for r in rows)
    print(f"{'total':<12}{total:>7d}{100.0:>8.1f}%")
    return 0


def _cmd_split(args) -> int:
    corpus = load_manifest(args.manifest)
    parts = split(corpus, seed=args.seed, mode=args.mode)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "dev", "test"), parts):
        path = out_dir / f"{name}.jsonl"
        save_manifest(part, path)
        labeled = len(part.labeled_utterances())
        print(f"{name}: {part.n_utterances} utterances ({labeled} labeled) -> {path}")
    return 0


def _cmd_extract(args) -> int:
    corpus = load_manifest(args.manifest)
    mask = AblationMask.parse(args.mask)
    hook = SignalHook.load(args.hook) if args.hook else None
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    translit = load_transliteration(args.translit) if args.translit else None
    pipeline = FeaturePipeline(
        mask,
        MockProvider(seed=args.provider_seed, hook=hook),
        lexicon,
        translit,
        FeatureCache(args.cache_dir),
    )
    count = 0
    for conv in corpus:
        for utt in conv.utterances:
            pipeline.utterance_vector(utt)
            count += 1
    print(f"extracted {count} utterance vectors (dim {mask.fused_dim}) "
          f"into cache {args.cache_dir}")
    return 0


def _cmd_train(args) -> int:
    rc = _build_run_config(args)
    result = train_run(rc, out_root=args.out_root)
    last = result.history[-1]
    print(f"run {rc.content_hash()}: {len(result.history)} epochs")
    print(
        f"best epoch {result.best_epoch}: "
        f"dev negative weighted precision {result.best_dev_negative_precision:.4f}"
    )
    print(f"final train loss {last['train_loss']:.4f}")
    if result.run_dir is not None:
        print(f"artifacts in {result.run_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    try:
        mask = AblationMask.parse(checkpoint.mask_label)
    except ValueError as exc:
        raise CheckpointError(f"checkpoint has no usable mask label: {exc}") from None
    rc = RunConfig(
        manifest_path=args.manifest,
        mask=mask,
        model=checkpoint.config,
        train=_TRAIN_DEFAULTS,
        split_seed=args.seed,
        split_mode=args.split_mode,
        provider_seed=args.provider_seed,
        lexicon_path=args.lexicon,
        translit_path=args.translit,
        hook_path=args.hook,
        cache_dir=args.cache_dir,
    )
    report = evaluate(checkpoint, rc, which=args.split)
    sys.stdout.write(_render_report(report))
    return 0


def _cmd_ablate(args) -> int:
    base = _build_run_config(args)
    report = ablate(base, out_root=args.out_root, jobs=args.jobs)
    text = report.to_text()
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        csv_path = out.with_suffix(".csv")
        csv_path.write_text(report.to_csv(), encoding="utf-8")
        print(f"report written to {out} and {csv_path}")
    return 0


def _cmd_search(args) -> int:
    base = _build_run_config(args)
    space = SearchSpace(
        lr_min=args.lr_min,
        lr_max=args.lr_max,
        hidden_choices=tuple(int(h) for h in args.hidden_choices.split(",")),
        dropout_min=args.dropout_min,
        dropout_max=args.dropout_max,
    )
    result = random_search(
        base, space, budget=args.budget, seed=args.search_seed,
        out_root=args.out_root, jobs=args.jobs,
    )
    for trial in result.trials:
        cfg = trial.config
        print(
            f"trial {trial.index}: lr {cfg.train.learning_rate:.6f} "
            f"hidden {cfg.model.hidden_dim} dropout {cfg.model.dropout_rate:.3f} "
            f"-> dev neg precision {trial.dev_negative_precision:.4f}"
        )
    best = result.best
    print(f"best: trial {best.index} "
          f"(dev neg precision {best.dev_negative_precision:.4f})")
    print(json.dumps(best.config.to_json(), indent=2, sort_keys=True))
    return 0


def _read_label_file(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as handle:
        return [line.strip() for line in handle if line.strip()]


def _cmd_kappa(args) -> int:
    labels_a = _read_label_file(args.a)
    labels_b = _read_label_file(args.b)
    print(cohen_kappa(labels_a, labels_b))
    return 0


def _parse_signal_spec(text: str) -> dict[str, float]:
    spec: dict[str, float] = {}
    if not text:
        return spec
    for part in text.split(","):
        if "=" not in part:
            raise ValueError(
                f"signal spec {part!r}: expected block=strength (e.g. vad=0.9)"
            )
        block, strength = part.split("=", 1)
        spec[block.strip()] = float(strength)
    return spec


def _cmd_gen_synthetic(args) -> int:
    if args.priors == "uniform":
        priors = {e: 1.0 / len(EMOTIONS) for e in EMOTIONS}
    else:
        priors = dict(DEFAULT_PRIORS)
    bundle = gen_synthetic(
        n_conversations=args.conversations,
        n_utterances=args.utterances,
        class_priors=priors,
        signal_spec=_parse_signal_spec(args.signal),
        seed=args.seed,
    )
    paths = bundle.write(args.out_dir)
    print(
        f"wrote {bundle.corpus.n_utterances} utterances in "
        f"{len(bundle.corpus.conversations)} conversations"
    )
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    corpus = load_manifest(args.manifest)
    store = AnnotationStore(
        corpus,
        annotator_ids=[a.strip() for a in args.annotators.split(",") if a.strip()],
        log_path=args.log,
        per_utterance=args.per_utterance,
    )
    app = create_app(store, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ── Parser ────────────────────────────────────────────────────────────────


def _add_run_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--manifest", help="corpus manifest (JSONL)")
    sub.add_argument("--config", help="key=value config file; flags win")
    sub.add_argument("--mask", help="feature blocks, e.g. T+W+VAD (default)")
    sub.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    sub.add_argument("--dropout", type=float)
    sub.add_argument("--learning-rate", dest="learning_rate", type=float)
    sub.add_argument("--max-epochs", dest="max_epochs", type=int)
    sub.add_argument("--patience", type=int)
    sub.add_argument("--clip-norm", dest="clip_norm", type=float)
    sub.add_argument("--seed", type=int, help="master seed for split/init/order")
    sub.add_argument("--model-seed", dest="model_seed", type=int)
    sub.add_argument("--train-seed", dest="train_seed", type=int)
    sub.add_argument("--split-seed", dest="split_seed", type=int)
    sub.add_argument("--split-mode", dest="split_mode",
                     choices=("conversation", "utterance"))
    sub.add_argument("--provider-seed", dest="provider_seed", type=int)
    sub.add_argument("--lexicon", help="VAD lexicon TSV")
    sub.add_argument("--translit", help="transliteration table TSV")
    sub.add_argument("--hook", help="mock-provider signal hook JSON")
    sub.add_argument("--cache-dir", dest="cache_dir", help="feature cache dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emoturn",
        description="speech emotion recognition toolkit for dyadic conversations",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="merge diarized segments into a manifest")
    p.add_argument("--segments", required=True, help="segment JSONL file")
    p.add_argument("--out", required=True, help="output manifest path")
    p.set_defaults(func=_cmd_ingest)

    p = subs.add_parser("validate", help="check a manifest against the schema")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_validate)

    p = subs.add_parser("stats", help="labeled class distribution of a manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_stats)

    p = subs.add_parser("split", help="write train/dev/test manifests")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("conversation", "utterance"),
                   default="conversation")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=_cmd_split)

    p = subs.add_parser("extract", help="compute features into the cache")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mask", default="T+W+VAD")
    p.add_argument("--cache-dir", dest="cache_dir", required=True)
    p.add_argument("--provider-seed", dest="provider_seed", type=int, default=0)
    p.add_argument("--lexicon")
    p.add_argument("--translit")
    p.add_argument("--hook")
    p.set_defaults(func=_cmd_extract)

    p = subs.add_parser("train", help="train one model configuration")
    _add_run_options(p)
    p.add_argument("--out-root", dest="out_root", default="runs",
                   help="directory holding per-run artifact folders")
    p.set_defaults(func=_cmd_train)

    p = subs.add_parser("evaluate", help="score a checkpoint on one split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--seed", type=int, default=0, help="split seed used in training")
    p.add_argument("--split-mode", dest="split_mode",
                   choices=("conversation", "utterance"), default="conversation")
    p.add_argument("--provider-seed", dest="provider_seed", type=int, default=0)
    p.add_argument("--lexicon")
    p.add_argument("--translit")
    p.add_argument("--hook")
    p.add_argument("--cache-dir", dest="cache_dir")
    p.set_defaults(func=_cmd_evaluate)

    p = subs.add_parser("ablate", help="train and score the five mask rows")
    _add_run_options(p)
    p.add_argument("--out", help="write the text report here (CSV alongside)")
    p.add_argument("--out-root", dest="out_root", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_ablate)

    p = subs.add_parser("search", help="random hyper-parameter search")
    _add_run_options(p)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--search-seed", dest="search_seed", type=int, default=0)
    p.add_argument("--lr-min", dest="lr_min", type=float, default=1e-4)
    p.add_argument("--lr-max", dest="lr_max", type=float, default=1e-2)
    p.add_argument("--hidden-choices", dest="hidden_choices", default="64,128,256")
    p.add_argument("--dropout-min", dest="dropout_min", type=float, default=0.0)
    p.add_argument("--dropout-max", dest="dropout_max", type=float, default=0.5)
    p.add_argument("--out-root", dest="out_root", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_search)

    p = subs.add_parser("kappa", help="agreement between two label files")
    p.add_argument("--a", required=True, help="labels, one per line")
    p.add_argument("--b", required=True, help="labels, one per line")
    p.set_defaults(func=_cmd_kappa)

    p = subs.add_parser("gen-synthetic", help="generate a synthetic corpus")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--conversations", type=int, default=30)
    p.add_argument("--utterances", type=int, default=20,
                   help="utterances per conversation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--signal", default="",
                   help="planted blocks, e.g. vad=0.9,text=0.45")
    p.add_argument("--priors", choices=("table", "uniform"), default="table")
    p.set_defaults(func=_cmd_gen_synthetic)

    p = subs.add_parser("serve", help="run the annotation service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--annotators", required=True, help="comma-separated ids")
    p.add_argument("--log", default="annotations.jsonl")
    p.add_argument("--per-utterance", dest="per_utterance", type=int, default=2)
    p.add_argument("--static-dir", dest="static_dir", default="static")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, CheckpointError, AdapterError, CacheCorruption, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
