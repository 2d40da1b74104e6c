"""Command-line interface: stats, prepare, evaluate, predict.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

from .config import ConfigError, ExperimentConfig, parse_predictors, config_from_dict, load_config
from .corpus import CorpusError, compute_stats, load_dataset, save_jsonl
from .evaluation import EvalReport, build_index, prepare_data, run_experiment, write_report
from .predictors import INTEGER_PREDICTORS, PREDICTOR_NAMES, UnknownPredictorError, canonical_name, make_predictor
from .textnorm import WordlistError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

log = logging.getLogger("reviewsim")


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException, code: int) -> None:
        super().__init__(f"{stage} failed: {exc}")
        self.code = code


def _exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, WordlistError, UnknownPredictorError)):
        return EXIT_CONFIG
    return EXIT_DATA


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag any error raised inside with the pipeline phase it came from."""
    log.info("%s", name)
    try:
        yield
    except StageError:
        raise
    except (ConfigError, WordlistError, UnknownPredictorError, CorpusError, OSError, ValueError) as exc:
        raise StageError(name, exc, _exit_code_for(exc)) from exc


# --------------------------------------------------------------------------
# Config assembly
# --------------------------------------------------------------------------


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file plus flag overrides; flags win."""
    if args.config:
        cfg = load_config(args.config)
    elif getattr(args, "dataset", None):
        cfg = None
    else:
        raise ConfigError("no --config given and no --dataset to build one from")

    overrides = {
        "dataset": getattr(args, "dataset", None),
        "threads": args.threads,
        "output_dir": args.output_dir,
        "weighting": getattr(args, "weighting", None),
        "normalize": getattr(args, "normalize", None),
        "split_seed": getattr(args, "seed", None),
        "prune_k": getattr(args, "prune_k", None),
    }
    if getattr(args, "predictors", None):
        overrides["predictors"] = parse_predictors([p.strip() for p in args.predictors.split(",") if p.strip()])
    if cfg is None:
        cfg = config_from_dict({"dataset": args.dataset, "predictors": list(PREDICTOR_NAMES)})
    overrides = {k: v for k, v in overrides.items() if v is not None}
    cfg = cfg.with_overrides(**overrides)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def _format_stats(stats) -> str:
    lines = [
        f"{'reviews':<26}{stats.n_reviews:>12,}",
        f"{'users':<26}{stats.n_users:>12,}",
        f"{'items':<26}{stats.n_items:>12,}",
        f"{'median words per review':<26}{stats.median_words_per_review:>12,}",
    ]
    for star in sorted(stats.rating_histogram, reverse=True):
        lines.append(f"{f'{star}-star reviews':<26}{stats.rating_histogram[star]:>12,}")
    return "\n".join(lines)


def cmd_stats(args: argparse.Namespace) -> int:
    path = args.dataset
    if path is None:
        if not args.config:
            raise StageError("stats", ConfigError("give a dataset path or --config"), EXIT_CONFIG)
        with stage("load config"):
            path = load_config(args.config).dataset
    with stage("parse"):
        ds, errors = load_dataset(path)
    print(_format_stats(compute_stats(ds)))
    if errors:
        print(f"warning: {len(errors)} malformed record(s) skipped", file=sys.stderr)
        for err in errors[: 10 if args.verbose else 0]:
            print(f"  {err}", file=sys.stderr)
    return EXIT_OK


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_prepare(args: argparse.Namespace) -> int:
    with stage("load config"):
        cfg = resolve_config(args)
    out = Path(cfg.output_dir or ".")
    with stage("prepare data"):
        prepared = prepare_data(cfg)
        out.mkdir(parents=True, exist_ok=True)
        train_path, test_path = out / "train.jsonl", out / "test.jsonl"
        save_jsonl(prepared.train, train_path)
        save_jsonl(prepared.test, test_path)
    d = prepared.descriptor
    manifest = {
        "config_hash": cfg.config_hash(),
        "dataset": json.loads(json.dumps(d.__dict__, default=str)),
        "files": {
            "train.jsonl": {"records": d.n_train, "sha256": _file_digest(train_path)},
            "test.jsonl": {"records": d.n_test, "sha256": _file_digest(test_path)},
        },
    }
    manifest["dataset"]["histogram"] = {str(k): v for k, v in d.histogram.items()}
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (out / "manifest.json").write_text(text, encoding="utf-8")
    print(f"reviews: {d.n_loaded} loaded -> {d.n_pruned} after prune k={d.prune_k}")
    print(f"split: {d.n_train} train / {d.n_test} test (seed {d.split_seed})")
    print(f"manifest: {out / 'manifest.json'} sha256={hashlib.sha256(text.encode()).hexdigest()[:16]}")
    return EXIT_OK


def ablation_table(on: EvalReport, off: EvalReport) -> str:
    """Side-by-side MAE/RMSE with normalization on and off."""
    header = f"{'Algorithm':<12} {'MAE on':>8} {'RMSE on':>8} {'MAE off':>8} {'RMSE off':>8}"
    lines = [header, "-" * len(header)]

    def fmt(x: float | None) -> str:
        return "-" if x is None else f"{x:.4f}"

    for row in on.rows:
        other = off.row(row.predictor)
        lines.append(
            f"{row.predictor:<12} {fmt(row.mae):>8} {fmt(row.rmse):>8} {fmt(other.mae):>8} {fmt(other.rmse):>8}"
        )
    return "\n".join(lines)


def _evaluate_one(cfg: ExperimentConfig, output_dir: Path | None) -> EvalReport:
    with stage("prepare data"):
        prepared = prepare_data(cfg)
    with stage("build profiles"):
        index = build_index(cfg, prepared.train) if len(prepared.train) else None
    with stage("predict"):
        report, records = run_experiment(cfg, index=index, prepared=prepared)
    for name, secs in report.timings.items():
        log.info("%s: %.2fs", name, secs)
    if output_dir is not None:
        with stage("write report"):
            write_report(report, records, output_dir)
    return report


def cmd_evaluate(args: argparse.Namespace) -> int:
    with stage("load config"):
        cfg = resolve_config(args)
    out = Path(cfg.output_dir) if cfg.output_dir else None
    if args.ablation:
        on = _evaluate_one(cfg.with_overrides(normalize=True), out / "norm_on" if out else None)
        off = _evaluate_one(cfg.with_overrides(normalize=False), out / "norm_off" if out else None)
        print(ablation_table(on, off))
        failed = [r for rep in (on, off) for r in rep.rows if r.error]
    else:
        report = _evaluate_one(cfg, out)
        print(report.format_table())
        failed = [r for r in report.rows if r.error]
    for row in failed:
        print(f"warning: {row.predictor} could not run: {row.error}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    with stage("load config"):
        name = canonical_name(args.predictor)
        cfg = resolve_config(args)
        knobs = next((p.knobs for p in cfg.predictors if p.name == name), {})
        predictor = make_predictor(name, **knobs)
    with stage("prepare data"):
        prepared = prepare_data(cfg)
        if not len(prepared.train):
            raise CorpusError("training split is empty")
    with stage("build profiles"):
        index = build_index(cfg, prepared.train)
    pred = predictor(args.user, args.item, index)
    shown = f"{pred.value:.0f}" if name in INTEGER_PREDICTORS or pred.value.is_integer() else f"{pred.value:.4f}"
    print(f"predictor: {name}")
    print(f"user: {args.user}")
    print(f"item: {args.item}")
    print(f"prediction: {shown}")
    print(f"fallback: {pred.fallback_used.value}")
    if pred.per_rating_similarities is not None:
        for r, s in sorted(pred.per_rating_similarities.items()):
            print(f"similarity_{r} = {s!r}")
    if pred.neighbors:
        print(f"neighbors: {len(pred.neighbors)}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="experiment config file (YAML or JSON)")
    common.add_argument("--verbose", "-v", action="count", default=0)
    common.add_argument("--threads", type=int, help="worker threads for prediction")
    common.add_argument("--output-dir", "-o", help="directory for written files")

    def pipeline_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--dataset", help="dataset path (overrides the config)")
        p.add_argument("--predictors", help="comma-separated predictor names (overrides the config)")
        p.add_argument("--weighting", choices=("tf", "tfidf"))
        p.add_argument("--seed", type=int, help="split seed")
        p.add_argument("--prune-k", type=int)
        norm = p.add_mutually_exclusive_group()
        norm.add_argument("--normalize", dest="normalize", action="store_true", default=None)
        norm.add_argument("--no-normalize", dest="normalize", action="store_false")

    parser = argparse.ArgumentParser(prog="reviewsim", description="Review-text rating prediction experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common], help="print dataset statistics")
    p.add_argument("dataset", nargs="?", help="SNAP or JSONL file (default: dataset from --config)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("prepare", parents=[common], help="write train/test splits and a manifest")
    pipeline_flags(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("evaluate", parents=[common], help="run the configured predictors and report MAE/RMSE")
    pipeline_flags(p)
    p.add_argument("--ablation", action="store_true", help="run with normalization on and off, side by side")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common], help="predict one user/item pair")
    pipeline_flags(p)
    p.add_argument("user")
    p.add_argument("item")
    p.add_argument("--predictor", "-p", default="CM")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, WordlistError, UnknownPredictorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
