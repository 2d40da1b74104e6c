"""Rating predictors.

Text-based user-item predictors (CM, MCM, ACM) pick the star whose user and
item review buckets are most similar. Text-weighted collaborative filtering
(CF-MCM, CF-ACM) uses bucket similarity between users as neighbour weights in
the mean-centred CF aggregate. Rating-vector CF (Pearson, cosine), a bias
baseline and a uniform random guesser serve as baselines.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from statistics import fmean
from typing import Callable, Literal, Sequence

from .corpus import STARS
from .profiles import ProfileIndex, UserProfile, Weighting
from .vectorspace import IdfTable, TermVector, cosine, term_vector

# Similarities within this distance of the maximum are treated as tied.
TIE_TOLERANCE = 1e-12


class SimilarityVariant(str, Enum):
    CM = "CM"
    MCM = "MCM"
    ACM = "ACM"


class CFVariant(str, Enum):
    CF_MCM = "CF-MCM"
    CF_ACM = "CF-ACM"


class Fallback(str, Enum):
    NONE = "none"
    USER_MEAN = "user_mean"
    ITEM_MEAN = "item_mean"
    GLOBAL_MEAN = "global_mean"


@dataclass(frozen=True)
class NeighborWeight:
    user_id: str
    weight: float


@dataclass(frozen=True)
class Prediction:
    value: float
    method: str
    fallback_used: Fallback = Fallback.NONE
    per_rating_similarities: dict[int, float] | None = None
    neighbors: tuple[NeighborWeight, ...] = ()


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def clamp_rating(x: float) -> float:
    return min(5.0, max(1.0, x))


def _fallback(
    u: str,
    i: str,
    index: ProfileIndex,
    method: str,
    *,
    to_star: bool,
    similarities: dict[int, float] | None = None,
) -> Prediction:
    """Cold-start cascade: user mean, then item mean, then global mean."""
    if u in index.users:
        value, kind = index.users[u].mean_rating, Fallback.USER_MEAN
    elif i in index.items:
        value, kind = index.items[i].mean_rating, Fallback.ITEM_MEAN
    else:
        value, kind = index.global_mean, Fallback.GLOBAL_MEAN
    value = clamp_rating(value)
    if to_star:
        value = float(round_half_up(value))
    return Prediction(value, method, kind, similarities)


# --------------------------------------------------------------------------
# User-item bucket similarity
# --------------------------------------------------------------------------


def _pairwise(a: Sequence[TermVector], b: Sequence[TermVector]) -> list[float]:
    return [cosine(x, y) for x in a for y in b]


def _bucket_similarity_vectors(
    a_concat: TermVector,
    a_reviews: Sequence[TermVector],
    b_concat: TermVector,
    b_reviews: Sequence[TermVector],
    variant: SimilarityVariant,
) -> float:
    if not a_reviews or not b_reviews:
        return 0.0
    if variant is SimilarityVariant.CM:
        return cosine(a_concat, b_concat)
    sims = _pairwise(a_reviews, b_reviews)
    if variant is SimilarityVariant.MCM:
        return max(sims)
    return math.fsum(sims) / len(sims)


def bucket_similarity(
    a: Sequence[Sequence[str]],
    b: Sequence[Sequence[str]],
    variant: SimilarityVariant | str,
    idf: IdfTable | None = None,
) -> float:
    """Similarity of two review buckets given as lists of token lists.

    CM compares the concatenations, MCM takes the best review pair and ACM
    the mean over all review pairs. An empty side gives 0.
    """
    variant = SimilarityVariant(variant)
    a_vecs = [term_vector(t, idf) for t in a]
    b_vecs = [term_vector(t, idf) for t in b]
    a_concat = term_vector((tok for t in a for tok in t), idf)
    b_concat = term_vector((tok for t in b for tok in t), idf)
    return _bucket_similarity_vectors(a_concat, a_vecs, b_concat, b_vecs, variant)


def _pick_star(sims: dict[int, float], user_mean: float, tie_break: str) -> int:
    best = max(sims.values())
    tied = [r for r in STARS if sims[r] >= best - TIE_TOLERANCE]
    if tie_break == "user_mean":
        return min(tied, key=lambda r: (abs(r - user_mean), -r))
    if tie_break == "max_star":
        return max(tied)
    if tie_break == "min_star":
        return min(tied)
    raise ValueError(f"unknown tie_break {tie_break!r}")


def predict_user_item(
    u: str,
    i: str,
    variant: SimilarityVariant | str,
    index: ProfileIndex,
    *,
    tie_break: str = "user_mean",
    weighting: Weighting | None = None,
) -> Prediction:
    """Predict the star whose user and item buckets are most similar."""
    variant = SimilarityVariant(variant)
    method = variant.value
    user = index.users.get(u)
    item = index.items.get(i)
    if user is None or item is None:
        return _fallback(u, i, index, method, to_star=True)
    sims = {
        r: _bucket_similarity_vectors(
            index.concat_vector(user, r, weighting),
            index.review_vectors(user, r, weighting),
            index.concat_vector(item, r, weighting),
            index.review_vectors(item, r, weighting),
            variant,
        )
        for r in STARS
    }
    if max(sims.values()) <= 0.0:
        return _fallback(u, i, index, method, to_star=True, similarities=sims)
    star = _pick_star(sims, user.mean_rating, tie_break)
    return Prediction(float(star), method, Fallback.NONE, sims)


# --------------------------------------------------------------------------
# Collaborative filtering
# --------------------------------------------------------------------------


def text_cf_weight(
    u: UserProfile,
    v: UserProfile,
    variant: CFVariant | str,
    index: ProfileIndex,
    *,
    acm_mode: Literal["shared", "all"] = "shared",
    per_review: bool = False,
    weighting: Weighting | None = None,
) -> float:
    """Neighbour weight from per-star bucket similarity between two users.

    For each star both users have reviewed with, the similarity is the cosine
    of the concatenated bucket texts (or, with ``per_review``, the max/mean
    review-pair cosine). CF-MCM takes the maximum over stars, CF-ACM the mean
    over the shared stars (``acm_mode="all"`` divides by 5 instead).
    """
    variant = CFVariant(variant)
    shared = [r for r in STARS if u.buckets.reviews[r] and v.buckets.reviews[r]]
    sims = []
    for r in shared:
        if per_review:
            pairs = _pairwise(index.review_vectors(u, r, weighting), index.review_vectors(v, r, weighting))
            s = max(pairs) if variant is CFVariant.CF_MCM else math.fsum(pairs) / len(pairs)
        else:
            s = cosine(index.concat_vector(u, r, weighting), index.concat_vector(v, r, weighting))
        sims.append(s)
    if not sims:
        return 0.0
    if variant is CFVariant.CF_MCM:
        return max(sims)
    if acm_mode == "all":
        return math.fsum(sims) / len(STARS)
    if acm_mode != "shared":
        raise ValueError(f"unknown acm_mode {acm_mode!r}")
    return math.fsum(sims) / len(sims)


def rating_similarity(
    a: dict[str, int],
    b: dict[str, int],
    sim: Literal["pearson", "cosine"],
    *,
    min_overlap: int = 2,
) -> float:
    """Pearson or cosine similarity of two rating maps over their co-rated items.

    Fewer than ``min_overlap`` co-rated items, or zero variance under Pearson,
    gives 0.
    """
    common = [k for k in a if k in b]
    if len(common) < max(min_overlap, 1):
        return 0.0
    xs = [float(a[k]) for k in common]
    ys = [float(b[k]) for k in common]
    if sim == "pearson":
        mx, my = fmean(xs), fmean(ys)
        xs = [x - mx for x in xs]
        ys = [y - my for y in ys]
    elif sim != "cosine":
        raise ValueError(f"unknown rating similarity {sim!r}")
    num = math.fsum(x * y for x, y in zip(xs, ys))
    den = math.sqrt(math.fsum(x * x for x in xs) * math.fsum(y * y for y in ys))
    if den == 0.0:
        return 0.0
    return max(-1.0, min(1.0, num / den))


def _select_top_k(weights: list[NeighborWeight], top_k: int | None) -> list[NeighborWeight]:
    if top_k is None or len(weights) <= top_k:
        return weights
    order = sorted(range(len(weights)), key=lambda n: -abs(weights[n].weight))
    return [weights[n] for n in sorted(order[:top_k])]


def _cf_aggregate(
    u: str,
    i: str,
    index: ProfileIndex,
    method: str,
    weight_fn: Callable[[UserProfile, UserProfile], float],
    *,
    top_k: int | None,
    clamp: bool,
) -> Prediction:
    """Mean-centred neighbourhood aggregate over the users who rated ``i``.

    prediction = mean(u) + sum(w * (r_vi - mean(v))) / sum(|w|)
    """
    user = index.users.get(u)
    if user is None:
        return _fallback(u, i, index, method, to_star=False)
    raters = [(v, r) for v, r in index.item_raters.get(i, ()) if v != u]
    weights = [NeighborWeight(v, weight_fn(user, index.users[v])) for v, _ in raters]
    rating_of = dict(raters)
    weights = _select_top_k(weights, top_k)
    denom = math.fsum(abs(nw.weight) for nw in weights)
    if denom == 0.0:
        return _fallback(u, i, index, method, to_star=False)
    num = math.fsum(nw.weight * (rating_of[nw.user_id] - index.users[nw.user_id].mean_rating) for nw in weights)
    value = user.mean_rating + num / denom
    if clamp:
        value = clamp_rating(value)
    return Prediction(value, method, Fallback.NONE, None, tuple(weights))


def predict_user_user(
    u: str,
    i: str,
    variant: CFVariant | str,
    index: ProfileIndex,
    *,
    top_k: int | None = None,
    clamp: bool = True,
    acm_mode: Literal["shared", "all"] = "shared",
    per_review: bool = False,
    weighting: Weighting | None = None,
) -> Prediction:
    variant = CFVariant(variant)

    def weight_fn(a: UserProfile, b: UserProfile) -> float:
        return text_cf_weight(a, b, variant, index, acm_mode=acm_mode, per_review=per_review, weighting=weighting)

    return _cf_aggregate(u, i, index, variant.value, weight_fn, top_k=top_k, clamp=clamp)


def predict_cf_ratings(
    u: str,
    i: str,
    sim: Literal["pearson", "cosine"],
    index: ProfileIndex,
    *,
    min_overlap: int = 2,
    top_k: int | None = None,
    clamp: bool = True,
) -> Prediction:
    method = "CF-Pearson" if sim == "pearson" else "CF-Cosine"

    def weight_fn(a: UserProfile, b: UserProfile) -> float:
        return rating_similarity(a.rated, b.rated, sim, min_overlap=min_overlap)

    return _cf_aggregate(u, i, index, method, weight_fn, top_k=top_k, clamp=clamp)


# --------------------------------------------------------------------------
# Baselines
# --------------------------------------------------------------------------


def predict_base_model(u: str, i: str, index: ProfileIndex, *, clamp: bool = True) -> Prediction:
    """Global mean plus user and item offsets (``mean - global``); unknown offsets are 0."""
    mu = index.global_mean
    b_u = index.users[u].mean_rating - mu if u in index.users else 0.0
    b_i = index.items[i].mean_rating - mu if i in index.items else 0.0
    value = mu + b_u + b_i
    if clamp:
        value = clamp_rating(value)
    return Prediction(value, "base")


def predict_random(u: str, i: str, seed: int = 0) -> Prediction:
    """Uniform star keyed on (seed, user, item), independent of call order."""
    digest = hashlib.blake2b(f"{seed}\x1f{u}\x1f{i}".encode(), digest_size=8).digest()
    return Prediction(float(int.from_bytes(digest, "big") % 5 + 1), "random")


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------

Predictor = Callable[[str, str, ProfileIndex], Prediction]

PREDICTOR_NAMES = ("CM", "MCM", "ACM", "CF-MCM", "CF-ACM", "CF-Pearson", "CF-Cosine", "base", "random")
INTEGER_PREDICTORS = frozenset({"CM", "MCM", "ACM"})

PREDICTOR_KNOBS = {
    "CM": {"tie_break", "weighting"},
    "MCM": {"tie_break", "weighting"},
    "ACM": {"tie_break", "weighting"},
    "CF-MCM": {"top_k", "clamp", "acm_mode", "per_review", "weighting"},
    "CF-ACM": {"top_k", "clamp", "acm_mode", "per_review", "weighting"},
    "CF-Pearson": {"min_overlap", "top_k", "clamp"},
    "CF-Cosine": {"min_overlap", "top_k", "clamp"},
    "base": {"clamp"},
    "random": {"seed"},
}


class UnknownPredictorError(ValueError):
    pass


def canonical_name(name: str) -> str:
    for known in PREDICTOR_NAMES:
        if name.lower() == known.lower():
            return known
    raise UnknownPredictorError(f"unknown predictor {name!r}; valid names: {', '.join(PREDICTOR_NAMES)}")


def make_predictor(name: str, **knobs) -> Predictor:
    """Build a ``(user, item, index) -> Prediction`` callable by name."""
    name = canonical_name(name)
    bad = set(knobs) - PREDICTOR_KNOBS[name]
    if bad:
        raise ValueError(f"predictor {name} does not accept {', '.join(sorted(bad))}")
    if name in INTEGER_PREDICTORS:
        return lambda u, i, index: predict_user_item(u, i, name, index, **knobs)
    if name in ("CF-MCM", "CF-ACM"):
        return lambda u, i, index: predict_user_user(u, i, name, index, **knobs)
    if name in ("CF-Pearson", "CF-Cosine"):
        sim = "pearson" if name == "CF-Pearson" else "cosine"
        return lambda u, i, index: predict_cf_ratings(u, i, sim, index, **knobs)
    if name == "base":
        return lambda u, i, index: predict_base_model(u, i, index, **knobs)
    seed = knobs.get("seed", 0)
    return lambda u, i, index: predict_random(u, i, seed)

