"""Rating-bucketed user and item profiles built from a training split."""
from __future__ import annotations

import hashlib
import pickle
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Literal

from .corpus import STARS, Dataset, Review
from .textnorm import NormConfig, normalize
from .vectorspace import IdfTable, TermVector, build_idf, term_vector

Weighting = Literal["tf", "tfidf"]
TokenList = tuple[str, ...]

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class RatingBuckets:
    """Per star value: the normalized reviews carrying that star and their concatenation."""

    reviews: dict[int, tuple[TokenList, ...]]
    concat: dict[int, TokenList]

    @classmethod
    def from_pairs(cls, pairs: list[tuple[int, TokenList]]) -> "RatingBuckets":
        grouped: dict[int, list[TokenList]] = {r: [] for r in STARS}
        for star, tokens in pairs:
            grouped[star].append(tokens)
        reviews = {r: tuple(grouped[r]) for r in STARS}
        concat = {r: tuple(tok for review in reviews[r] for tok in review) for r in STARS}
        return cls(reviews, concat)

    def size(self, r: int) -> int:
        return len(self.reviews[r])

    def total(self) -> int:
        return sum(len(v) for v in self.reviews.values())

    def non_empty(self) -> list[int]:
        return [r for r in STARS if self.reviews[r]]


@dataclass(frozen=True)
class UserProfile:
    id: str
    buckets: RatingBuckets
    mean_rating: float
    rated: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class ItemProfile:
    id: str
    buckets: RatingBuckets
    mean_rating: float


class ProfileIndex:
    """All profiles of a training split plus IDF and rating means.

    Bucket vectors are computed on first use and memoized per weighting mode.
    The cache only ever gains entries whose value is a pure function of the
    key, so concurrent readers may at worst compute a vector twice.
    """

    def __init__(
        self,
        users: dict[str, UserProfile],
        items: dict[str, ItemProfile],
        idf: IdfTable,
        global_mean: float,
        item_raters: dict[str, tuple[tuple[str, int], ...]],
        weighting: Weighting = "tfidf",
        norm_fingerprint: str = "",
    ) -> None:
        if weighting not in ("tf", "tfidf"):
            raise ValueError(f"unknown weighting {weighting!r}")
        self.users = users
        self.items = items
        self.idf = idf
        self.global_mean = global_mean
        self.item_raters = item_raters
        self.weighting: Weighting = weighting
        self.norm_fingerprint = norm_fingerprint
        self._cache: dict[tuple, object] = {}

    def _idf_for(self, weighting: Weighting | None) -> IdfTable | None:
        return self.idf if (weighting or self.weighting) == "tfidf" else None

    def concat_vector(self, profile: UserProfile | ItemProfile, r: int, weighting: Weighting | None = None) -> TermVector:
        mode = weighting or self.weighting
        key = ("concat", type(profile) is UserProfile, profile.id, r, mode)
        vec = self._cache.get(key)
        if vec is None:
            vec = term_vector(profile.buckets.concat[r], self._idf_for(mode))
            self._cache[key] = vec
        return vec  # type: ignore[return-value]

    def review_vectors(
        self, profile: UserProfile | ItemProfile, r: int, weighting: Weighting | None = None
    ) -> tuple[TermVector, ...]:
        mode = weighting or self.weighting
        key = ("reviews", type(profile) is UserProfile, profile.id, r, mode)
        vecs = self._cache.get(key)
        if vecs is None:
            idf = self._idf_for(mode)
            vecs = tuple(term_vector(tokens, idf) for tokens in profile.buckets.reviews[r])
            self._cache[key] = vecs
        return vecs  # type: ignore[return-value]

    def __getstate__(self) -> dict:
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state

    def fingerprint(self) -> str:
        """Digest of the profile contents and settings, for determinism checks."""
        h = hashlib.sha256()
        h.update(f"{self.weighting}|{self.global_mean!r}|{self.norm_fingerprint}".encode())
        for uid in sorted(self.users):
            u = self.users[uid]
            h.update(f"U{uid}|{u.mean_rating!r}|{sorted(u.rated.items())!r}|{u.buckets.reviews!r}".encode())
        for iid in sorted(self.items):
            it = self.items[iid]
            h.update(f"I{iid}|{it.mean_rating!r}|{it.buckets.reviews!r}".encode())
        for term in sorted(self.idf.weights):
            h.update(f"{term}={self.idf.weights[term]!r};".encode())
        return h.hexdigest()


def _timestamp_order(reviews: tuple[Review, ...]) -> list[int]:
    return sorted(range(len(reviews)), key=lambda i: (reviews[i].timestamp, i))


def build_profiles(train: Dataset, config: NormConfig, weighting: Weighting = "tfidf") -> ProfileIndex:
    """Normalize every training review once and group it into user and item buckets."""
    reviews = train.reviews
    if not reviews:
        raise ValueError("cannot build profiles from an empty training split")
    cache: dict[str, TokenList] = {}
    tokens: list[TokenList] = []
    for review in reviews:
        toks = cache.get(review.text)
        if toks is None:
            toks = tuple(normalize(review.text, config))
            cache[review.text] = toks
        tokens.append(toks)

    by_user: dict[str, list[int]] = {}
    by_item: dict[str, list[int]] = {}
    for idx in _timestamp_order(reviews):
        by_user.setdefault(reviews[idx].user_id, []).append(idx)
        by_item.setdefault(reviews[idx].item_id, []).append(idx)

    users = {
        uid: UserProfile(
            id=uid,
            buckets=RatingBuckets.from_pairs([(reviews[i].rating, tokens[i]) for i in idxs]),
            mean_rating=fmean(reviews[i].rating for i in idxs),
            rated={reviews[i].item_id: reviews[i].rating for i in idxs},
        )
        for uid, idxs in by_user.items()
    }
    items = {
        iid: ItemProfile(
            id=iid,
            buckets=RatingBuckets.from_pairs([(reviews[i].rating, tokens[i]) for i in idxs]),
            mean_rating=fmean(reviews[i].rating for i in idxs),
        )
        for iid, idxs in by_item.items()
    }
    item_raters = {
        iid: tuple((reviews[i].user_id, reviews[i].rating) for i in idxs) for iid, idxs in by_item.items()
    }
    return ProfileIndex(
        users=users,
        items=items,
        idf=build_idf(tokens),
        global_mean=fmean(r.rating for r in reviews),
        item_raters=item_raters,
        weighting=weighting,
        norm_fingerprint=config.fingerprint(),
    )


def save_snapshot(index: ProfileIndex, path: str | Path, config_hash: str) -> None:
    with open(path, "wb") as fh:
        pickle.dump({"version": SNAPSHOT_VERSION, "config_hash": config_hash, "index": index}, fh)


def load_snapshot(path: str | Path, config_hash: str) -> ProfileIndex | None:
    """Return the stored index, or None when missing, stale or from another version."""
    path = Path(path)
    if not path.is_file():
        return None
    try:
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
    except (pickle.UnpicklingError, EOFError, AttributeError):
        return None
    if payload.get("version") != SNAPSHOT_VERSION or payload.get("config_hash") != config_hash:
        return None
    return payload["index"]
