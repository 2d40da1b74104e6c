#!/usr/bin/env python3
"""Build the public-corpus test fixture in SNAP format.

Source: the RentTheRunway review corpus (Misra, Wan & McAuley, RecSys 2018),
as redistributed in the ``rating-model`` 0.1.0 wheel on PyPI
(``rating_model/data/data.csv``). Ratings are on a 2..10 scale in steps of 2
and are mapped to 1..5 stars. The fixture keeps one product category and is
pruned to its k-core.

    python scripts/build_public_sample.py --out tests/data/rtr_dress_k5.snap.gz
"""
from __future__ import annotations

import argparse
import csv
import subprocess
import sys
import tempfile
import zipfile
from datetime import datetime, timezone
from pathlib import Path

from reviewsim.corpus import Dataset, Review, deduplicate, prune_min_ratings, write_snap, compute_stats

WHEEL = "rating-model==0.1.0"
MEMBER = "rating_model/data/data.csv"


def fetch_csv(workdir: Path) -> Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", WHEEL, "--no-deps", "-d", str(workdir), "-q"],
        check=True,
    )
    wheel = next(workdir.glob("rating_model-*.whl"))
    target = workdir / "data.csv"
    with zipfile.ZipFile(wheel) as zf, open(target, "wb") as out:
        out.write(zf.read(MEMBER))
    return target


def one_line(text: str) -> str:
    return " ".join(text.split())


def convert(csv_path: Path, category: str | None) -> list[Review]:
    reviews = []
    csv.field_size_limit(10_000_000)
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if category and row["category"] != category:
                continue
            if not row["rating"] or not row["review_text"].strip():
                continue
            stamp = datetime.strptime(row["review_date"], "%B %d, %Y").replace(tzinfo=timezone.utc)
            reviews.append(
                Review(
                    user_id=f"RTR{row['user_id']}",
                    item_id=f"RTR{row['item_id']}",
                    rating=int(float(row["rating"])) // 2,
                    text=one_line(row["review_text"]),
                    summary=one_line(row["review_summary"]),
                    timestamp=int(stamp.timestamp()),
                )
            )
    return reviews


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--csv", type=Path, help="existing data.csv (skips the download)")
    parser.add_argument("--category", default="dress")
    parser.add_argument("-k", type=int, default=5)
    parser.add_argument("--out", type=Path, required=True)
    args = parser.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        csv_path = args.csv or fetch_csv(Path(tmp))
        reviews = convert(csv_path, args.category)
    ds = deduplicate(Dataset(tuple(reviews), ("rtr",)))
    ds = prune_min_ratings(ds, args.k)
    write_snap(ds.reviews, args.out)
    stats = compute_stats(ds)
    print(f"wrote {args.out}: {stats}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
