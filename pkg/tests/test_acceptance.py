"""Acceptance suite. Each test is tagged with the criterion it checks; a PASS/FAIL
line per criterion is printed in the terminal summary.

Criteria 5 to 7 are directional checks on the public RentTheRunway sample
(dress category, 5-core, 11,750 reviews) with the default protocol: 80/20
split, seed 0, TF-IDF weighting. They are asserted as stated; when the
ordering does not hold on this corpus the test fails and prints the measured
numbers.
"""
from __future__ import annotations

import gzip
import math
import random
import time
import unicodedata
from collections import Counter

import pytest

from helpers import PORTER_VOCAB, RTR_SAMPLE, dataset_from_tokens, ds, micro_corpus
from oracle import NaiveModel
from reviewsim.config import config_from_dict
from reviewsim.corpus import (
    STARS,
    allocate_counts,
    format_snap,
    load_dataset,
    prune_min_ratings,
    split_train_test,
    stratified_sample,
)
from reviewsim.evaluation import mae, rmse, run_experiment, score_predictions
from reviewsim.predictors import INTEGER_PREDICTORS, PREDICTOR_NAMES, Fallback, Prediction, bucket_similarity, make_predictor
from reviewsim.profiles import build_profiles
from reviewsim.textnorm import NormConfig, normalize, porter_stem
from reviewsim.vectorspace import TermVector, cosine

C1 = "oracle equivalence on 200+ micro-corpora, < 10 s"
C2 = "cosine and bucket-similarity properties"
C3 = "normalization postconditions on 10k reviews; full Porter vocabulary"
C4 = "MAE <= RMSE on 100+ logs; hand-computed metric examples"
C5 = "CM/MCM/ACM: normalization on beats off in MAE and RMSE"
C6 = "MCM MAE < CM MAE"
C7 = "CF-MCM and CF-ACM MAE below CM, MCM and ACM"
C8 = "protocol fidelity: prune, sample counts, split sizes, reproducibility"


# --------------------------------------------------------------------------
# 1. Oracle equivalence
# --------------------------------------------------------------------------


@pytest.mark.criterion(1, C1)
def test_c1_oracle_equivalence():
    rng = random.Random(20240601)
    users = ("u0", "u1", "u2", "u-unknown")
    items = ("i0", "i1", "i2", "i-unknown")
    n_corpora = 0
    n_checks = 0
    mismatches = []
    start = time.perf_counter()
    for n in range(240):
        weighting = "tfidf" if n % 2 == 0 else "tf"
        rows = micro_corpus(rng, max_reviews=6, max_vocab=8)
        assert len(rows) <= 6 and len({t for *_, toks in rows for t in toks}) <= 8
        idx = build_profiles(dataset_from_tokens(rows), NormConfig.disabled(), weighting=weighting)
        oracle = NaiveModel(rows, weighting)
        for name in PREDICTOR_NAMES:
            fn = make_predictor(name)
            for u in users:
                for i in items:
                    got = fn(u, i, idx)
                    want, kind = oracle.predict(name, u, i)
                    n_checks += 1
                    exact = name in INTEGER_PREDICTORS or name == "random"
                    ok = got.value == want if exact else abs(got.value - want) <= 1e-9
                    if not ok or got.fallback_used.value != kind:
                        mismatches.append((name, u, i, got.value, want, rows))
        n_corpora += 1
    elapsed = time.perf_counter() - start
    print(f"criterion 1: {n_corpora} corpora, {n_checks} predictions, {len(mismatches)} mismatches, {elapsed:.2f}s")
    assert n_corpora >= 200
    assert mismatches == []
    assert elapsed < 10.0


# --------------------------------------------------------------------------
# 2. Similarity properties
# --------------------------------------------------------------------------


def _dense_cosine(a, b):
    terms = sorted(set(a) | set(b))
    x = [a.get(t, 0.0) for t in terms]
    y = [b.get(t, 0.0) for t in terms]
    nx = math.sqrt(sum(v * v for v in x))
    ny = math.sqrt(sum(v * v for v in y))
    if nx == 0 or ny == 0:
        return 0.0
    return sum(p * q for p, q in zip(x, y)) / (nx * ny)


def _random_vector(rng):
    size = rng.randint(0, 20)
    return {f"t{rng.randrange(40)}": rng.choice([rng.random() * 10, float(rng.randint(1, 5))]) for _ in range(size)}


@pytest.mark.criterion(2, C2)
def test_c2_cosine_properties():
    rng = random.Random(7)
    vectors = [_random_vector(rng) for _ in range(1200)]
    for a, b in zip(vectors, vectors[1:] + vectors[:1]):
        va, vb = TermVector(a), TermVector(b)
        s = cosine(va, vb)
        assert 0.0 <= s <= 1.0
        assert s == cosine(vb, va)
        c = rng.uniform(0.01, 100)
        assert abs(cosine(va.scaled(c), vb) - s) <= 1e-9
        assert abs(s - _dense_cosine(a, b)) <= 1e-9


@pytest.mark.criterion(2, C2)
def test_c2_bucket_properties():
    rng = random.Random(8)
    vocab = list("abcdefgh")

    def bucket(max_reviews):
        return [[rng.choice(vocab) for _ in range(rng.randint(0, 6))] for _ in range(rng.randint(1, max_reviews))]

    for _ in range(600):
        a, b = bucket(4), bucket(4)
        mcm = bucket_similarity(a, b, "MCM")
        acm = bucket_similarity(a, b, "ACM")
        assert mcm >= acm - 1e-12
    for _ in range(600):
        a, b = bucket(1), bucket(1)
        sims = [bucket_similarity(a, b, v) for v in ("CM", "MCM", "ACM")]
        assert sims[0] == sims[1] == sims[2]


# --------------------------------------------------------------------------
# 3. Normalization
# --------------------------------------------------------------------------


@pytest.mark.criterion(3, C3)
def test_c3_normalization_postconditions():
    dataset, _ = load_dataset(RTR_SAMPLE)
    texts = [r.text for r in dataset.reviews[:10_000]]
    assert len(texts) == 10_000
    cfg = NormConfig.standard()
    bad = Counter()
    n_tokens = 0
    for text in texts:
        for tok in normalize(text, cfg):
            n_tokens += 1
            if any(unicodedata.category(ch)[0] == "N" for ch in tok):
                bad["digit"] += 1
            if any(unicodedata.category(ch)[0] in "PSC" for ch in tok):
                bad["punctuation"] += 1
            if tok in cfg.stopwords:
                bad["stopword"] += 1
    print(f"criterion 3: {n_tokens} tokens from 10,000 reviews, violations {dict(bad)}")
    assert n_tokens > 100_000
    assert not bad


@pytest.mark.criterion(3, C3)
def test_c3_porter_vocabulary():
    with gzip.open(PORTER_VOCAB, "rt", encoding="utf-8") as fh:
        pairs = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    agree = sum(porter_stem(w) == s for w, s in pairs)
    print(f"criterion 3: Porter agreement {agree}/{len(pairs)}")
    assert len(pairs) == 23531
    assert agree == len(pairs)


# --------------------------------------------------------------------------
# 4. Metrics
# --------------------------------------------------------------------------


@pytest.mark.criterion(4, C4)
def test_c4_metric_examples():
    assert abs(mae([(4, 4), (2, 2)]) - 0.0) <= 1e-12
    assert abs(mae([(5, 4), (3, 4)]) - 1.0) <= 1e-12
    assert abs(mae([(4.5, 5), (2, 4), (3, 3)]) - (0.5 + 2 + 0) / 3) <= 1e-12
    assert abs(rmse([(4, 4)]) - 0.0) <= 1e-12
    assert abs(rmse([(5, 3)]) - 2.0) <= 1e-12
    assert abs(rmse([(5, 4), (1, 4)]) - math.sqrt(5)) <= 1e-12


@pytest.mark.criterion(4, C4)
def test_c4_mae_le_rmse_on_random_logs():
    rng = random.Random(99)
    for n in range(150):
        size = rng.randint(1, 200)
        test = ds(*[(f"u{k}", f"i{k}", rng.randint(1, 5)) for k in range(size)])
        preds = []
        for _ in range(size):
            value = float(rng.randint(1, 5)) if n % 3 == 0 else rng.uniform(1, 5)
            fb = rng.choice(list(Fallback))
            preds.append(Prediction(value, "x", fb))
        row, records = score_predictions("x", preds, test, round_all=n % 5 == 0)
        assert row.n_predictions == size
        assert row.mae <= row.rmse
        pairs = [(r.predicted, r.actual) for r in records]
        assert row.mae == mae(pairs) and row.rmse == rmse(pairs)


# --------------------------------------------------------------------------
# 5-7. Directional reproduction on the public sample
# --------------------------------------------------------------------------

DIRECTIONAL = ["CM", "MCM", "ACM", "CF-MCM", "CF-ACM"]


@pytest.fixture(scope="module")
def rtr_reports():
    base = {"dataset": str(RTR_SAMPLE), "prune_k": 5, "split": {"fraction": 0.8, "seed": 0}, "weighting": "tfidf"}
    on, _ = run_experiment(config_from_dict({**base, "normalize": True, "predictors": DIRECTIONAL}))
    off, _ = run_experiment(config_from_dict({**base, "normalize": False, "predictors": ["CM", "MCM", "ACM"]}))
    assert on.dataset.n_pruned == 11_750 and on.dataset.n_test == 2_350
    return on, off


def _fmt(report, names):
    return ", ".join(f"{n} MAE={report.row(n).mae:.4f} RMSE={report.row(n).rmse:.4f}" for n in names)


@pytest.mark.criterion(5, C5)
@pytest.mark.slow
def test_c5_normalization_helps(rtr_reports):
    on, off = rtr_reports
    print(f"criterion 5: on:  {_fmt(on, ['CM', 'MCM', 'ACM'])}")
    print(f"criterion 5: off: {_fmt(off, ['CM', 'MCM', 'ACM'])}")
    failures = [
        f"{name} {metric}: on={getattr(on.row(name), metric):.4f} off={getattr(off.row(name), metric):.4f}"
        for name in ("CM", "MCM", "ACM")
        for metric in ("mae", "rmse")
        if not getattr(on.row(name), metric) < getattr(off.row(name), metric)
    ]
    assert failures == []


@pytest.mark.criterion(6, C6)
@pytest.mark.slow
def test_c6_mcm_beats_cm(rtr_reports):
    on, _ = rtr_reports
    print(f"criterion 6: {_fmt(on, ['CM', 'MCM'])}")
    assert on.row("MCM").mae < on.row("CM").mae


@pytest.mark.criterion(7, C7)
@pytest.mark.slow
def test_c7_cf_beats_user_item(rtr_reports):
    on, _ = rtr_reports
    print(f"criterion 7: {_fmt(on, DIRECTIONAL)}")
    failures = [
        f"{cf} MAE {on.row(cf).mae:.4f} !< {ui} MAE {on.row(ui).mae:.4f}"
        for cf in ("CF-MCM", "CF-ACM")
        for ui in ("CM", "MCM", "ACM")
        if not on.row(cf).mae < on.row(ui).mae
    ]
    assert failures == []


# --------------------------------------------------------------------------
# 8. Protocol fidelity
# --------------------------------------------------------------------------


def _synthetic_corpus(n_reviews=20_000, seed=5):
    """Skewed bipartite corpus: many light users and items, so pruning has work to do."""
    rng = random.Random(seed)
    seen = set()
    rows = []
    while len(rows) < n_reviews:
        u = int(rng.paretovariate(1.2)) % 4000
        i = int(rng.paretovariate(1.1)) % 3000
        if (u, i) in seen:
            continue
        seen.add((u, i))
        rows.append((f"u{u}", f"i{i}", rng.choices(STARS, weights=(8, 6, 10, 21, 55))[0], "text", len(rows)))
    return ds(*rows)


def _degrees_ok(dataset, k):
    users = Counter(r.user_id for r in dataset)
    items = Counter(r.item_id for r in dataset)
    return min(users.values()) >= k and min(items.values()) >= k


@pytest.mark.criterion(8, C8)
def test_c8_prune_min_degrees():
    synthetic = _synthetic_corpus()
    pruned = prune_min_ratings(synthetic, 5)
    print(f"criterion 8: synthetic prune k=5 {len(synthetic)} -> {len(pruned)}")
    assert 0 < len(pruned) < len(synthetic)
    assert _degrees_ok(pruned, 5)
    rtr, _ = load_dataset(RTR_SAMPLE)
    assert prune_min_ratings(rtr, 5).reviews == rtr.reviews and _degrees_ok(rtr, 5)
    # a random 90% of the real sample breaks the 5-core; pruning must restore it
    rng = random.Random(0)
    subset = rtr.derive((r for r in rtr.reviews if rng.random() < 0.9), "subset")
    out = prune_min_ratings(subset, 5)
    print(f"criterion 8: public subset prune k=5 {len(subset)} -> {len(out)}")
    assert 0 < len(out) < len(subset) and _degrees_ok(out, 5)


@pytest.mark.criterion(8, C8)
def test_c8_sample_counts_exact():
    synthetic = _synthetic_corpus()
    for n, dist in [
        (1_000, {5: 0.55, 4: 0.21, 3: 0.10, 2: 0.06, 1: 0.08}),
        (1_000, {5: 0.33, 4: 0.31, 3: 0.15, 2: 0.09, 1: 0.12}),
        (777, {5: 0.2, 4: 0.2, 3: 0.2, 2: 0.2, 1: 0.2}),
    ]:
        sample = stratified_sample(synthetic, n, dist, seed=1)
        assert sample.histogram() == allocate_counts(n, dist)
        assert len(sample) == n
    balanced = stratified_sample(synthetic, 100, {5: 0.33, 4: 0.31, 3: 0.15, 2: 0.09, 1: 0.12}, seed=0)
    assert balanced.histogram() == {5: 33, 4: 31, 3: 15, 2: 9, 1: 12}


@pytest.mark.criterion(8, C8)
def test_c8_split_sizes_exact():
    rtr, _ = load_dataset(RTR_SAMPLE)
    train, test = split_train_test(rtr, 0.8, seed=0)
    assert (len(train), len(test)) == (9_400, 2_350)
    for n in (10, 11, 99, 1_001):
        tr, te = split_train_test(ds(*[(f"u{k}", "i", 3) for k in range(n)]), 0.8, seed=2)
        assert len(tr) == math.floor(0.8 * n + 0.5 + 1e-9) and len(tr) + len(te) == n


@pytest.mark.criterion(8, C8)
def test_c8_bit_reproducible():
    def pipeline():
        loaded, _ = load_dataset(RTR_SAMPLE)
        pruned = prune_min_ratings(loaded, 5)
        sampled = stratified_sample(pruned, 2_000, {5: 0.5, 4: 0.3, 3: 0.15, 2: 0.04, 1: 0.01}, seed=3)
        train, test = split_train_test(sampled, 0.8, seed=4)
        index = build_profiles(train, NormConfig.standard())
        cfg = config_from_dict(
            {
                "dataset": str(RTR_SAMPLE),
                "prune_k": 5,
                "sample": {"n": 2_000, "dist": {5: 0.5, 4: 0.3, 3: 0.15, 2: 0.04, 1: 0.01}, "seed": 3},
                "split": {"fraction": 0.8, "seed": 4},
                "predictors": ["MCM", "CF-MCM", "random"],
            }
        )
        report, log = run_experiment(cfg)
        return (
            "".join(format_snap(pruned.reviews)),
            "".join(format_snap(sampled.reviews)),
            [(r.user_id, r.item_id) for r in train],
            [(r.user_id, r.item_id) for r in test],
            index.fingerprint(),
            report.to_json(),
            log,
        )

    first, second = pipeline(), pipeline()
    for a, b in zip(first, second):
        assert a == b


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
