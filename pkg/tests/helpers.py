"""Shared fixture builders for the test suite."""
from __future__ import annotations

import random
from pathlib import Path

from reviewsim.corpus import Dataset, Review

DATA = Path(__file__).parent / "data"
RTR_SAMPLE = DATA / "rtr_dress_k5.snap.gz"
PORTER_VOCAB = DATA / "porter_voc.tsv.gz"

SAMPLE_RECORD = """\
product/productId: B00006HAXW
review/userId: A1RSDE90N6RSZF
review/profileName: Joseph M. Kotow
review/helpfulness: 9/9
review/score: 5.0
review/time: 1042502400
review/summary: Pittsburgh - Home of the OLDIES
review/text: "I have all of the doo wop DVD's and this one is as good or better than the 1st ones. Remember once these performers are gone, we'll never get to see them again. Rhino did an excellent job and if you like or love doo wop and Rock n Roll you'll LOVE this DVD !!".
"""


def ds(*rows, provenance=()) -> Dataset:
    """Dataset from (user, item, rating[, text[, timestamp]]) tuples."""
    reviews = []
    for n, row in enumerate(rows):
        user, item, rating = row[:3]
        text = row[3] if len(row) > 3 else f"review {n}"
        ts = row[4] if len(row) > 4 else n
        reviews.append(Review(user, item, rating, text, timestamp=ts))
    return Dataset(tuple(reviews), tuple(provenance))


PRUNE_FIXTURE = (("u1", "i1", 5), ("u1", "i2", 4), ("u2", "i1", 3), ("u2", "i2", 2), ("u3", "i1", 1))


def micro_corpus(rng: random.Random, max_reviews: int = 6, max_vocab: int = 8):
    """Random tiny corpus: (user, item, rating, tokens) with unique (user, item) pairs."""
    vocab = [f"w{k}" for k in range(rng.randint(1, max_vocab))]
    pairs = [(f"u{a}", f"i{b}") for a in range(3) for b in range(3)]
    chosen = rng.sample(pairs, rng.randint(1, max_reviews))
    rows = []
    for user, item in chosen:
        tokens = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 5)))
        rows.append((user, item, rng.randint(1, 5), tokens))
    return rows


def dataset_from_tokens(rows) -> Dataset:
    return Dataset(
        tuple(Review(u, i, r, " ".join(toks), timestamp=n) for n, (u, i, r, toks) in enumerate(rows)), ("micro",)
    )
