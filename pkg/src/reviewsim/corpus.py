"""Review corpora: SNAP parsing, deduplication, k-core pruning, sampling and splitting."""
from __future__ import annotations

import gzip
import io
import json
import math
import random
import statistics
from collections import Counter
from dataclasses import asdict, dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

STARS = (1, 2, 3, 4, 5)

# SNAP key -> Review attribute
SNAP_KEYS = {
    "product/productId": "item_id",
    "review/userId": "user_id",
    "review/profileName": "profile_name",
    "review/helpfulness": "helpfulness",
    "review/score": "rating",
    "review/time": "timestamp",
    "review/summary": "summary",
    "review/text": "text",
}
REQUIRED_KEYS = ("product/productId", "review/userId", "review/score", "review/text")


class CorpusError(ValueError):
    """Raised for invalid datasets or infeasible sampling requests."""


@dataclass(frozen=True)
class Review:
    user_id: str
    item_id: str
    rating: int
    text: str
    summary: str = ""
    helpfulness: tuple[int, int] = (0, 0)
    timestamp: int = 0
    profile_name: str = ""

    def __post_init__(self) -> None:
        if not self.user_id or not self.item_id:
            raise CorpusError("user_id and item_id must be non-empty")
        if self.rating not in STARS:
            raise CorpusError(f"rating must be one of 1..5, got {self.rating!r}")
        found, total = self.helpfulness
        if found < 0 or total < 0 or found > total:
            raise CorpusError(f"invalid helpfulness {found}/{total}")

    def to_record(self) -> dict:
        record = asdict(self)
        record["helpfulness"] = list(self.helpfulness)
        return record

    @classmethod
    def from_record(cls, record: Mapping) -> "Review":
        return cls(
            user_id=record["user_id"],
            item_id=record["item_id"],
            rating=int(record["rating"]),
            text=record["text"],
            summary=record.get("summary", ""),
            helpfulness=tuple(record.get("helpfulness", (0, 0))),
            timestamp=int(record.get("timestamp", 0)),
            profile_name=record.get("profile_name", ""),
        )


@dataclass(frozen=True)
class Dataset:
    reviews: tuple[Review, ...]
    provenance: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.reviews)

    def __iter__(self) -> Iterator[Review]:
        return iter(self.reviews)

    def derive(self, reviews: Iterable[Review], step: str) -> "Dataset":
        return Dataset(tuple(reviews), self.provenance + (step,))

    def histogram(self) -> dict[int, int]:
        counts = Counter(r.rating for r in self.reviews)
        return {s: counts.get(s, 0) for s in STARS}


@dataclass(frozen=True)
class DatasetStats:
    n_reviews: int
    n_users: int
    n_items: int
    rating_histogram: dict[int, int] = field(default_factory=dict)
    median_words_per_review: int = 0


class RecordError(NamedTuple):
    line: int
    message: str

    def __str__(self) -> str:
        return f"record at line {self.line}: {self.message}"


class ParseResult(NamedTuple):
    reviews: list[Review]
    errors: list[RecordError]


# --------------------------------------------------------------------------
# SNAP format
# --------------------------------------------------------------------------


def _parse_score(raw: str) -> int:
    try:
        value = Decimal(raw.strip())
    except InvalidOperation:
        raise CorpusError(f"unparseable score {raw!r}") from None
    if not value.is_finite() or value != value.to_integral_value():
        raise CorpusError(f"non-integral score {raw!r}")
    star = int(value)
    if star not in STARS:
        raise CorpusError(f"score {raw!r} out of range 1..5")
    return star


def _parse_helpfulness(raw: str) -> tuple[int, int]:
    found, sep, total = raw.strip().partition("/")
    if not sep:
        raise CorpusError(f"malformed helpfulness {raw!r}")
    try:
        pair = (int(found), int(total))
    except ValueError:
        raise CorpusError(f"malformed helpfulness {raw!r}") from None
    if pair[0] < 0 or pair[1] < 0 or pair[0] > pair[1]:
        raise CorpusError(f"invalid helpfulness {raw!r}")
    return pair


def _build_review(fields: dict[str, str]) -> Review:
    missing = [k for k in REQUIRED_KEYS if k not in fields]
    if missing:
        raise CorpusError("missing " + ", ".join(missing))
    kwargs: dict = {
        "item_id": fields["product/productId"].strip(),
        "user_id": fields["review/userId"].strip(),
        "rating": _parse_score(fields["review/score"]),
        "text": fields["review/text"],
        "summary": fields.get("review/summary", ""),
        "profile_name": fields.get("review/profileName", ""),
    }
    if "review/helpfulness" in fields:
        kwargs["helpfulness"] = _parse_helpfulness(fields["review/helpfulness"])
    if "review/time" in fields:
        try:
            kwargs["timestamp"] = int(fields["review/time"].strip())
        except ValueError:
            raise CorpusError(f"malformed time {fields['review/time']!r}") from None
    return Review(**kwargs)


def parse_snap_stream(lines: Iterable[str]) -> ParseResult:
    """Parse SNAP ``key: value`` records separated by blank lines.

    Malformed records are skipped and reported in ``errors`` with the line
    number (1-based) of their first line; parsing always continues.
    """
    reviews: list[Review] = []
    errors: list[RecordError] = []
    fields: dict[str, str] = {}
    problems: list[str] = []
    start = 0

    def flush() -> None:
        if problems:
            errors.append(RecordError(start, "; ".join(problems)))
            return
        try:
            reviews.append(_build_review(fields))
        except CorpusError as exc:
            errors.append(RecordError(start, str(exc)))

    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            if start:
                flush()
            fields, problems, start = {}, [], 0
            continue
        if not start:
            start = lineno
        key, sep, value = line.partition(":")
        if not sep:
            problems.append(f"line {lineno} is not a key:value pair")
            continue
        if key not in SNAP_KEYS:
            continue
        if key in fields:
            problems.append(f"duplicate key {key!r}")
            continue
        fields[key] = value[1:] if value.startswith(" ") else value
    if start:
        flush()
    return ParseResult(reviews, errors)


def format_snap(reviews: Iterable[Review]) -> Iterator[str]:
    """Yield SNAP-formatted lines (newline-terminated) for ``reviews``."""
    for r in reviews:
        found, total = r.helpfulness
        yield f"product/productId: {r.item_id}\n"
        yield f"review/userId: {r.user_id}\n"
        yield f"review/profileName: {r.profile_name}\n"
        yield f"review/helpfulness: {found}/{total}\n"
        yield f"review/score: {r.rating}.0\n"
        yield f"review/time: {r.timestamp}\n"
        yield f"review/summary: {r.summary}\n"
        yield f"review/text: {r.text}\n"
        yield "\n"


def _open_text(path: Path, mode: str = "rt"):
    if path.suffix == ".gz":
        return gzip.open(path, mode, encoding="utf-8", errors="replace", newline="")
    return open(path, mode, encoding="utf-8", errors="replace", newline="")


def read_snap(path: str | Path) -> ParseResult:
    path = Path(path)
    with _open_text(path) as fh:
        return parse_snap_stream(fh)


def write_snap(reviews: Iterable[Review], path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".gz":
        # empty name and mtime=0 keep the archive bytes reproducible
        with open(path, "wb") as raw, gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as gz:
            with io.TextIOWrapper(gz, encoding="utf-8", newline="") as fh:
                fh.writelines(format_snap(reviews))
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.writelines(format_snap(reviews))


# --------------------------------------------------------------------------
# JSONL dataset serialization
# --------------------------------------------------------------------------


def save_jsonl(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in dataset.reviews:
            fh.write(json.dumps(r.to_record(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def load_jsonl(path: str | Path) -> Dataset:
    reviews = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                reviews.append(Review.from_record(json.loads(line)))
    return Dataset(tuple(reviews), (f"load {Path(path).name}",))


def load_dataset(path: str | Path) -> tuple[Dataset, list[RecordError]]:
    """Load a SNAP (plain or .gz) or JSONL file and deduplicate it."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    if path.name.endswith(".jsonl"):
        ds = load_jsonl(path)
        return deduplicate(ds), []
    reviews, errors = read_snap(path)
    return deduplicate(Dataset(tuple(reviews), (f"parse {path.name}",))), errors


# --------------------------------------------------------------------------
# Protocol operations
# --------------------------------------------------------------------------


def deduplicate(dataset: Dataset) -> Dataset:
    """Keep one review per (user, item): the latest by timestamp, later position on ties."""
    keep: dict[tuple[str, str], int] = {}
    for idx, r in enumerate(dataset.reviews):
        key = (r.user_id, r.item_id)
        prev = keep.get(key)
        if prev is None or r.timestamp >= dataset.reviews[prev].timestamp:
            keep[key] = idx
    if len(keep) == len(dataset.reviews):
        return dataset
    chosen = sorted(keep.values())
    return dataset.derive((dataset.reviews[i] for i in chosen), f"dedupe {len(dataset)}->{len(chosen)}")


def prune_min_ratings(dataset: Dataset, k: int) -> Dataset:
    """Iteratively drop users and items with fewer than ``k`` reviews until stable."""
    if k < 1:
        raise CorpusError("k must be >= 1")
    reviews = list(dataset.reviews)
    while True:
        users = Counter(r.user_id for r in reviews)
        items = Counter(r.item_id for r in reviews)
        kept = [r for r in reviews if users[r.user_id] >= k and items[r.item_id] >= k]
        if len(kept) == len(reviews):
            break
        reviews = kept
    return dataset.derive(reviews, f"prune k={k} {len(dataset)}->{len(reviews)}")


def _round_count(x: float) -> float:
    # absorb float noise such as 100 * 0.29 == 28.999999999999996
    nearest = round(x)
    return float(nearest) if abs(x - nearest) < 1e-9 else x


def allocate_counts(n: int, dist: Mapping[int, float]) -> dict[int, int]:
    """Largest-remainder allocation of ``n`` items over star proportions."""
    if n < 0:
        raise CorpusError("sample size must be non-negative")
    unknown = set(dist) - set(STARS)
    if unknown:
        raise CorpusError(f"distribution has invalid star values {sorted(unknown)}")
    if any(p < 0 for p in dist.values()) or not math.isclose(sum(dist.values()), 1.0, abs_tol=1e-9):
        raise CorpusError("distribution proportions must be non-negative and sum to 1")
    exact = {s: _round_count(n * dist.get(s, 0.0)) for s in STARS}
    counts = {s: math.floor(v) for s, v in exact.items()}
    leftover = n - sum(counts.values())
    by_remainder = sorted(STARS, key=lambda s: (-(exact[s] - counts[s]), -s))
    for s in by_remainder[:leftover]:
        counts[s] += 1
    return counts


def stratified_sample(dataset: Dataset, n: int, dist: Mapping[int, float], seed: int) -> Dataset:
    """Draw exactly the allocated number of reviews per star, uniformly within each star.

    The sample keeps the input order of the chosen reviews.
    """
    counts = allocate_counts(n, dist)
    by_star: dict[int, list[int]] = {s: [] for s in STARS}
    for idx, r in enumerate(dataset.reviews):
        by_star[r.rating].append(idx)
    for s in STARS:
        if counts[s] > len(by_star[s]):
            raise CorpusError(
                f"infeasible sample: need {counts[s]} reviews with {s} stars, only {len(by_star[s])} available"
            )
    rng = random.Random(seed)
    chosen: list[int] = []
    for s in STARS:
        chosen.extend(rng.sample(by_star[s], counts[s]))
    chosen.sort()
    return dataset.derive(
        (dataset.reviews[i] for i in chosen),
        f"sample n={n} dist={','.join(f'{s}:{dist.get(s, 0.0):g}' for s in STARS)} seed={seed}",
    )


def split_train_test(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random record-level partition; ``|train| = round(train_fraction * n)`` (half up)."""
    if not 0.0 < train_fraction < 1.0:
        raise CorpusError("train_fraction must lie in (0, 1)")
    if not dataset.reviews:
        raise CorpusError("cannot split an empty dataset")
    n = len(dataset.reviews)
    n_train = math.floor(_round_count(train_fraction * n) + 0.5)
    order = list(range(n))
    random.Random(seed).shuffle(order)
    train_idx = sorted(order[:n_train])
    test_idx = sorted(order[n_train:])
    tag = f"split fraction={train_fraction:g} seed={seed}"
    return (
        dataset.derive((dataset.reviews[i] for i in train_idx), f"{tag} train={n_train}"),
        dataset.derive((dataset.reviews[i] for i in test_idx), f"{tag} test={n - n_train}"),
    )


def compute_stats(dataset: Dataset | Sequence[Review]) -> DatasetStats:
    reviews = dataset.reviews if isinstance(dataset, Dataset) else tuple(dataset)
    counts = Counter(r.rating for r in reviews)
    words = [len(r.text.split()) for r in reviews]
    return DatasetStats(
        n_reviews=len(reviews),
        n_users=len({r.user_id for r in reviews}),
        n_items=len({r.item_id for r in reviews}),
        rating_histogram={s: counts.get(s, 0) for s in STARS},
        median_words_per_review=statistics.median_low(words) if words else 0,
    )
