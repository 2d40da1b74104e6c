"""Sparse term vectors, smoothed IDF and cosine similarity."""
from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Iterator, Mapping, Sequence


class TermVector(Mapping[str, float]):
    """Immutable sparse term -> weight mapping with a cached Euclidean norm.

    Zero weights are dropped on construction; negative weights are rejected.
    """

    __slots__ = ("_weights", "norm")

    def __init__(self, weights: Mapping[str, float] | None = None) -> None:
        clean: dict[str, float] = {}
        for term, w in (weights or {}).items():
            w = float(w)
            if w < 0 or math.isnan(w):
                raise ValueError(f"term weight for {term!r} must be non-negative, got {w}")
            if w > 0:
                clean[term] = w
        self._weights = clean
        self.norm = math.sqrt(math.fsum(w * w for w in clean.values()))

    def __getitem__(self, term: str) -> float:
        return self._weights[term]

    def __iter__(self) -> Iterator[str]:
        return iter(self._weights)

    def __len__(self) -> int:
        return len(self._weights)

    def __repr__(self) -> str:
        return f"TermVector({self._weights!r})"

    def scaled(self, c: float) -> "TermVector":
        return TermVector({t: w * c for t, w in self._weights.items()})

    def as_dict(self) -> dict[str, float]:
        return dict(self._weights)


class IdfTable:
    """Smoothed inverse document frequency: ``ln((1 + N) / (1 + df)) + 1``."""

    __slots__ = ("weights", "n_docs", "unseen")

    def __init__(self, doc_freq: Mapping[str, int], n_docs: int) -> None:
        self.n_docs = n_docs
        self.weights = {t: math.log((1 + n_docs) / (1 + df)) + 1.0 for t, df in doc_freq.items()}
        self.unseen = math.log(1 + n_docs) + 1.0

    def __getitem__(self, term: str) -> float:
        return self.weights.get(term, self.unseen)

    def __contains__(self, term: object) -> bool:
        return term in self.weights

    def __len__(self) -> int:
        return len(self.weights)


def build_idf(documents: Sequence[Sequence[str]]) -> IdfTable:
    """Fit IDF weights; each document counts a term at most once."""
    if not documents:
        raise ValueError("cannot fit IDF on an empty document list")
    df: Counter[str] = Counter()
    for doc in documents:
        df.update(set(doc))
    return IdfTable(df, len(documents))


def term_vector(tokens: Iterable[str], idf: IdfTable | None = None) -> TermVector:
    """Raw term counts, or counts times IDF when ``idf`` is given."""
    counts = Counter(tokens)
    if idf is None:
        return TermVector(counts)
    return TermVector({t: c * idf[t] for t, c in counts.items()})


def _weights_and_norm(v: Mapping[str, float]) -> tuple[Mapping[str, float], float]:
    if isinstance(v, TermVector):
        return v._weights, v.norm
    return v, math.sqrt(math.fsum(w * w for w in v.values()))


def cosine(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    """Cosine similarity of two non-negative sparse vectors; 0 if either is empty."""
    if not a or not b:
        return 0.0
    wa, norm_a = _weights_and_norm(a)
    wb, norm_b = _weights_and_norm(b)
    if len(wa) > len(wb):
        wa, wb = wb, wa
    dot = math.fsum(w * wb[t] for t, w in wa.items() if t in wb)
    if dot == 0.0:
        return 0.0
    return min(1.0, dot / (norm_a * norm_b))
