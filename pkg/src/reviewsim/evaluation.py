"""MAE/RMSE metrics and the end-to-end experiment harness.

An experiment runs parse, prune, (sample), split, profile building and then
scores every configured predictor on every test review. Reports can be
written as an aligned table, as JSON, and as a flat per-prediction CSV log
from which the metrics can be recomputed independently.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .config import ExperimentConfig
from .corpus import Dataset, RecordError, load_dataset, prune_min_ratings, split_train_test, stratified_sample
from .predictors import INTEGER_PREDICTORS, Fallback, Prediction, make_predictor, round_half_up
from .profiles import ProfileIndex, build_profiles, load_snapshot, save_snapshot
from .textnorm import NormConfig

Pair = tuple[float, float]


def _errors(pairs: Iterable[Pair]) -> list[Fraction]:
    return [Fraction(p) - Fraction(a) for p, a in pairs]


def _sqrt_rounded(q: Fraction) -> float:
    """Correctly rounded square root of a non-negative rational."""
    if q == 0:
        return 0.0
    num, den = q.numerator, q.denominator
    # scale by 4**k so the integer root carries well over 53 significant bits
    k = max(0, (140 - num.bit_length() + den.bit_length()) // 2)
    scaled, rem = divmod(num << (2 * k), den)
    root = math.isqrt(scaled)
    sticky = int(rem != 0 or root * root != scaled)
    # (root + sticky/2) / 2**k lies strictly between the same two rounding boundaries as the true root
    return float(Fraction(2 * root + sticky, 1 << (k + 1)))


def mae(pairs: Iterable[Pair]) -> float:
    """Mean absolute error of (predicted, actual) pairs.

    Both metrics are computed exactly and rounded once, so the result does
    not depend on pair order and MAE <= RMSE holds in floating point too.
    """
    errors = _errors(pairs)
    if not errors:
        raise ValueError("mae of an empty prediction set")
    return float(sum(abs(e) for e in errors) / len(errors))


def rmse(pairs: Iterable[Pair]) -> float:
    """Root mean squared error of (predicted, actual) pairs."""
    errors = _errors(pairs)
    if not errors:
        raise ValueError("rmse of an empty prediction set")
    return _sqrt_rounded(sum(e * e for e in errors) / len(errors))


@dataclass(frozen=True)
class PredictionRecord:
    predictor: str
    user: str
    item: str
    predicted: float
    actual: int
    fallback: str


@dataclass
class ReportRow:
    predictor: str
    mae: float | None
    rmse: float | None
    n_predictions: int
    fallbacks: dict[str, int] = field(default_factory=dict)
    error: str | None = None


@dataclass
class DatasetDescriptor:
    source: str
    parse_errors: int
    n_loaded: int
    prune_k: int
    n_pruned: int
    sample: dict | None
    sample_before_prune: bool
    train_fraction: float
    split_seed: int
    n_train: int
    n_test: int
    histogram: dict[int, int]
    provenance: list[str]


@dataclass
class EvalReport:
    rows: list[ReportRow]
    dataset: DatasetDescriptor
    config_hash: str
    normalize: bool
    weighting: str
    timings: dict[str, float] = field(default_factory=dict, compare=False)

    def row(self, predictor: str) -> ReportRow:
        for r in self.rows:
            if r.predictor == predictor:
                return r
        raise KeyError(predictor)

    def to_dict(self, include_timings: bool = False) -> dict:
        d = asdict(self)
        if not include_timings:
            d.pop("timings")
        d["dataset"]["histogram"] = {str(k): v for k, v in self.dataset.histogram.items()}
        return d

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True)

    def format_table(self) -> str:
        title = f"normalization {'on' if self.normalize else 'off'}, {self.weighting}"
        header = f"{'Algorithm':<12} {'MAE':>8} {'RMSE':>8} {'n':>7} {'fallback':>9}"
        lines = [title, header, "-" * len(header)]
        for r in self.rows:
            if r.error is not None:
                lines.append(f"{r.predictor:<12} {'error':>8} {'':>8} {r.n_predictions:>7} {'':>9}  {r.error}")
                continue
            n_fb = sum(v for k, v in r.fallbacks.items() if k != Fallback.NONE.value)
            mae_s = f"{r.mae:.4f}" if r.mae is not None else "-"
            rmse_s = f"{r.rmse:.4f}" if r.rmse is not None else "-"
            lines.append(f"{r.predictor:<12} {mae_s:>8} {rmse_s:>8} {r.n_predictions:>7} {n_fb:>9}")
        return "\n".join(lines)


# --------------------------------------------------------------------------
# Prediction log
# --------------------------------------------------------------------------

LOG_FIELDS = ("predictor", "user", "item", "predicted", "actual", "fallback")


def write_prediction_log(records: Iterable[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_FIELDS)
        for rec in records:
            writer.writerow([rec.predictor, rec.user, rec.item, repr(rec.predicted), rec.actual, rec.fallback])


def read_prediction_log(path: str | Path) -> list[PredictionRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [
            PredictionRecord(
                row["predictor"], row["user"], row["item"], float(row["predicted"]), int(row["actual"]), row["fallback"]
            )
            for row in csv.DictReader(fh)
        ]


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------


@dataclass
class PreparedData:
    train: Dataset
    test: Dataset
    pruned: Dataset
    descriptor: DatasetDescriptor
    parse_errors: list[RecordError]


def prepare_data(config: ExperimentConfig) -> PreparedData:
    """Load, prune, optionally sample and split, as configured."""
    loaded, errors = load_dataset(config.dataset)
    ds = loaded
    s = config.sample
    if s is not None and config.sample_before_prune:
        ds = stratified_sample(ds, s.n, s.dist, s.seed)
    ds = prune_min_ratings(ds, config.prune_k)
    pruned = ds
    if s is not None and not config.sample_before_prune:
        ds = stratified_sample(ds, s.n, s.dist, s.seed)
    if len(ds):
        train, test = split_train_test(ds, config.train_fraction, config.split_seed)
    else:
        train = test = ds.derive((), "split skipped: empty dataset")
    descriptor = DatasetDescriptor(
        source=Path(config.dataset).name,
        parse_errors=len(errors),
        n_loaded=len(loaded),
        prune_k=config.prune_k,
        n_pruned=len(pruned),
        sample=None if s is None else {"n": s.n, "dist": {str(k): v for k, v in sorted(s.dist.items())}, "seed": s.seed},
        sample_before_prune=config.sample_before_prune,
        train_fraction=config.train_fraction,
        split_seed=config.split_seed,
        n_train=len(train),
        n_test=len(test),
        histogram=ds.histogram(),
        provenance=list(ds.provenance),
    )
    return PreparedData(train, test, pruned, descriptor, errors)


def norm_config_for(config: ExperimentConfig) -> NormConfig:
    if not config.normalize:
        return NormConfig.disabled()
    return NormConfig.standard(config.stopwords, config.slang)


def build_index(config: ExperimentConfig, train: Dataset) -> ProfileIndex:
    """Build profiles, reusing a snapshot on disk when one matches this config."""
    if config.snapshot:
        cached = load_snapshot(config.snapshot, config.config_hash())
        if cached is not None:
            return cached
    index = build_profiles(train, norm_config_for(config), config.weighting)
    if config.snapshot:
        save_snapshot(index, config.snapshot, config.config_hash())
    return index


def score_predictions(
    name: str, predictions: Sequence[Prediction], test: Dataset, round_all: bool = False
) -> tuple[ReportRow, list[PredictionRecord]]:
    records = []
    fallbacks = {fb.value: 0 for fb in Fallback}
    for pred, review in zip(predictions, test.reviews):
        value = pred.value
        if round_all and name not in INTEGER_PREDICTORS:
            value = float(round_half_up(value))
        fallbacks[pred.fallback_used.value] += 1
        records.append(PredictionRecord(name, review.user_id, review.item_id, value, review.rating, pred.fallback_used.value))
    pairs = [(rec.predicted, rec.actual) for rec in records]
    row = ReportRow(
        predictor=name,
        mae=mae(pairs) if pairs else None,
        rmse=rmse(pairs) if pairs else None,
        n_predictions=len(records),
        fallbacks=fallbacks,
    )
    return row, records


def run_experiment(
    config: ExperimentConfig, *, index: ProfileIndex | None = None, prepared: PreparedData | None = None
) -> tuple[EvalReport, list[PredictionRecord]]:
    """Run every configured predictor over the test split.

    Returns the report and the flat prediction log. A predictor that fails
    (or has no training data to work from) gets an error row.
    """
    prepared = prepared or prepare_data(config)
    train, test = prepared.train, prepared.test
    timings: dict[str, float] = {}
    build_error = None
    if index is None and len(train):
        t0 = time.perf_counter()
        index = build_index(config, train)
        timings["build_profiles"] = time.perf_counter() - t0
    elif index is None:
        build_error = "empty training split"

    rows: list[ReportRow] = []
    log: list[PredictionRecord] = []
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        for spec in config.predictors:
            if build_error is not None:
                rows.append(ReportRow(spec.name, None, None, len(test), error=build_error))
                continue
            t0 = time.perf_counter()
            try:
                fn = make_predictor(spec.name, **spec.knobs)

                def one(review, fn=fn):
                    return fn(review.user_id, review.item_id, index)

                # map() keeps test order; the metrics are exact sums and order-free anyway
                preds = list(pool.map(one, test.reviews)) if pool else [one(r) for r in test.reviews]
                row, records = score_predictions(spec.name, preds, test, config.round_all)
            except Exception as exc:  # report, don't drop the row
                rows.append(ReportRow(spec.name, None, None, len(test), error=f"{type(exc).__name__}: {exc}"))
                continue
            timings[spec.name] = time.perf_counter() - t0
            rows.append(row)
            log.extend(records)
    finally:
        if pool:
            pool.shutdown()

    report = EvalReport(
        rows=rows,
        dataset=prepared.descriptor,
        config_hash=config.config_hash(),
        normalize=config.normalize,
        weighting=config.weighting,
        timings=timings,
    )
    return report, log


def write_report(report: EvalReport, log: Sequence[PredictionRecord], output_dir: str | Path) -> dict[str, Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "report.json",
        "table": out / "report.txt",
        "log": out / "predictions.csv",
    }
    paths["json"].write_text(report.to_json() + "\n", encoding="utf-8")
    paths["table"].write_text(report.format_table() + "\n", encoding="utf-8")
    write_prediction_log(log, paths["log"])
    return paths


def metrics_from_log(records: Iterable[PredictionRecord]) -> dict[str, tuple[float, float, int]]:
    """Recompute (MAE, RMSE, n) per predictor from a prediction log."""
    grouped: dict[str, list[Pair]] = {}
    for rec in records:
        grouped.setdefault(rec.predictor, []).append((rec.predicted, float(rec.actual)))
    return {name: (mae(p), rmse(p), len(p)) for name, p in grouped.items()}
