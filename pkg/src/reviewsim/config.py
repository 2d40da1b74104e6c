"""Declarative experiment configuration (YAML or JSON) with validation and a stable hash."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .corpus import STARS
from .predictors import PREDICTOR_KNOBS, UnknownPredictorError, canonical_name

# Star mixes used for the 100k samples in the original experiments.
DISTRIBUTIONS: dict[str, dict[int, float]] = {
    "imbalanced": {5: 0.55, 4: 0.21, 3: 0.10, 2: 0.06, 1: 0.08},
    "balanced": {5: 0.33, 4: 0.31, 3: 0.15, 2: 0.09, 1: 0.12},
}


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass(frozen=True)
class SampleSpec:
    n: int
    dist: dict[int, float]
    seed: int = 0


@dataclass(frozen=True)
class PredictorSpec:
    name: str
    knobs: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    predictors: tuple[PredictorSpec, ...]
    prune_k: int = 5
    sample: SampleSpec | None = None
    sample_before_prune: bool = False
    train_fraction: float = 0.8
    split_seed: int = 0
    normalize: bool = True
    stopwords: str | None = None
    slang: str | None = None
    weighting: str = "tfidf"
    round_all: bool = False
    # run-time settings below do not change results and are left out of the hash
    output_dir: str | None = None
    threads: int = 1
    snapshot: str | None = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not self.dataset:
            raise ConfigError("dataset path is required")
        if not isinstance(self.prune_k, int) or self.prune_k < 1:
            raise ConfigError(f"prune_k must be an integer >= 1, got {self.prune_k!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"split fraction must lie in (0, 1), got {self.train_fraction!r}")
        if self.weighting not in ("tf", "tfidf"):
            raise ConfigError(f"weighting must be 'tf' or 'tfidf', got {self.weighting!r}")
        if not self.predictors:
            raise ConfigError("predictor list is empty")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for spec in self.predictors:
            bad = set(spec.knobs) - PREDICTOR_KNOBS[spec.name]
            if bad:
                raise ConfigError(f"predictor {spec.name} does not accept {', '.join(sorted(bad))}")
        if self.sample is not None:
            s = self.sample
            if s.n < 1:
                raise ConfigError("sample n must be >= 1")
            if set(s.dist) - set(STARS) or any(p < 0 for p in s.dist.values()):
                raise ConfigError(f"sample distribution must map stars 1..5 to non-negative shares: {s.dist}")
            if abs(math.fsum(s.dist.values()) - 1.0) > 1e-9:
                raise ConfigError(f"sample distribution sums to {math.fsum(s.dist.values())!r}, expected 1")

    def result_fields(self) -> dict[str, Any]:
        """The settings that determine results, in canonical JSON-ready form."""
        d = asdict(self)
        for key in ("output_dir", "threads", "snapshot"):
            d.pop(key)
        if self.sample is not None:
            d["sample"]["dist"] = {str(s): self.sample.dist.get(s, 0.0) for s in STARS}
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.result_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, **changes: Any) -> "ExperimentConfig":
        """Copy with non-None values replaced (command-line flags win over the file)."""
        changes = {k: v for k, v in changes.items() if v is not None}
        try:
            return replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _parse_dist(raw: Any) -> dict[int, float]:
    if isinstance(raw, str):
        if raw not in DISTRIBUTIONS:
            raise ConfigError(f"unknown distribution {raw!r}; known: {', '.join(DISTRIBUTIONS)}")
        return dict(DISTRIBUTIONS[raw])
    if not isinstance(raw, Mapping):
        raise ConfigError("sample.dist must be a preset name or a star -> share mapping")
    try:
        return {int(k): float(v) for k, v in raw.items()}
    except (TypeError, ValueError):
        raise ConfigError(f"bad sample distribution {raw!r}") from None


def parse_predictors(raw: Any) -> tuple[PredictorSpec, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ConfigError("predictors must be a list")
    specs = []
    for entry in raw:
        if isinstance(entry, str):
            name, knobs = entry, {}
        elif isinstance(entry, Mapping) and "name" in entry:
            name = entry["name"]
            knobs = {k: v for k, v in entry.items() if k != "name"}
        else:
            raise ConfigError(f"bad predictor entry {entry!r}")
        try:
            specs.append(PredictorSpec(canonical_name(str(name)), dict(knobs)))
        except UnknownPredictorError as exc:
            raise ConfigError(str(exc)) from None
    return tuple(specs)


_TOP_LEVEL = {
    "dataset", "prune_k", "sample", "sample_before_prune", "split", "normalize", "stopwords", "slang",
    "weighting", "predictors", "round_all", "output_dir", "threads", "snapshot",
}


def config_from_dict(data: Mapping[str, Any], base_dir: str | Path | None = None) -> ExperimentConfig:
    """Build a config from parsed YAML/JSON. Relative paths resolve against ``base_dir``."""
    unknown = set(data) - _TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def path(value: Any) -> str | None:
        if value is None:
            return None
        p = Path(str(value))
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        return str(p)

    sample = None
    if data.get("sample") is not None:
        raw = data["sample"]
        if not isinstance(raw, Mapping) or "n" not in raw or "dist" not in raw:
            raise ConfigError("sample needs 'n' and 'dist'")
        sample = SampleSpec(int(raw["n"]), _parse_dist(raw["dist"]), int(raw.get("seed", 0)))
    split = data.get("split") or {}
    if not isinstance(split, Mapping):
        raise ConfigError("split must be a mapping with 'fraction' and 'seed'")
    return ExperimentConfig(
        dataset=path(data.get("dataset")) or "",
        predictors=parse_predictors(data.get("predictors")),
        prune_k=data.get("prune_k", 5),
        sample=sample,
        sample_before_prune=bool(data.get("sample_before_prune", False)),
        train_fraction=float(split.get("fraction", 0.8)),
        split_seed=int(split.get("seed", 0)),
        normalize=bool(data.get("normalize", True)),
        stopwords=path(data.get("stopwords")),
        slang=path(data.get("slang")),
        weighting=data.get("weighting", "tfidf"),
        round_all=bool(data.get("round_all", False)),
        output_dir=path(data.get("output_dir")),
        threads=int(data.get("threads", 1)),
        snapshot=path(data.get("snapshot")),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data, base_dir=path.parent)
