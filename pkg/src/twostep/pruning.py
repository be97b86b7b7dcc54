"""Static pruning of sparse vectors and collections."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from twostep.corpus import Collection, CollectionStats, SparseVector

log = logging.getLogger(__name__)

DOC_CAP = 128
QUERY_CAP = 32
DOC_SWEEP = (4, 8, 16, 32, 64)
QUERY_PRESET = 5


class Strategy(enum.Enum):
    DOC_TOPK = "doc-topk"
    QUERY_TOPK = "query-topk"
    TERM_QUANTILE = "term-quantile"
    VALUE_THRESHOLD = "value-threshold"


@dataclass(frozen=True)
class PruneConfig:
    strategy: Strategy
    size_k: int = 0
    quantile: float = 1.0
    threshold: float = 0.0
    doc_cap: int = DOC_CAP
    query_cap: int = QUERY_CAP

    def __post_init__(self):
        if self.strategy in (Strategy.DOC_TOPK, Strategy.QUERY_TOPK) and self.size_k < 1:
            raise ValueError("size_k must be >= 1 for top-k strategies")
        if not 0.0 <= self.quantile <= 1.0:
            raise ValueError("quantile must lie in [0, 1]")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")

    def describe(self) -> str:
        if self.strategy is Strategy.DOC_TOPK:
            return f"doc-topk:{min(self.size_k, self.doc_cap)}"
        if self.strategy is Strategy.QUERY_TOPK:
            return f"query-topk:{min(self.size_k, self.query_cap)}"
        if self.strategy is Strategy.TERM_QUANTILE:
            return f"term-quantile:{self.quantile:g}"
        return f"value-threshold:{self.threshold:g}"


def prune_vector_topk(v: SparseVector, k: int) -> SparseVector:
    """Keep the ``k`` highest-weighted entries; equal weights keep the lower term id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if v.nnz <= k:
        return v
    # lexsort: last key is primary
    keep = np.lexsort((v.terms, -v.weights))[:k]
    keep.sort()
    return SparseVector(v.terms[keep], v.weights[keep], check=False)


def _threshold(v: SparseVector, threshold: float) -> SparseVector:
    mask = v.weights >= threshold
    if mask.all():
        return v
    return SparseVector(v.terms[mask], v.weights[mask], check=False)


def _term_quantile(c: Collection, quantile: float) -> Collection:
    indptr, terms, weights = c.to_csr()
    if terms.size == 0:
        return c
    docs = np.repeat(np.arange(len(c), dtype=np.int64), np.diff(indptr))
    # group by term, weight descending, docid ascending
    order = np.lexsort((docs, -weights, terms))
    t_sorted = terms[order]
    starts = np.flatnonzero(np.r_[True, t_sorted[1:] != t_sorted[:-1]])
    lengths = np.diff(np.r_[starts, t_sorted.size])
    keep_n = np.ceil(quantile * lengths).astype(np.int64)
    rank = np.arange(t_sorted.size) - np.repeat(starts, lengths)
    kept = order[rank < np.repeat(keep_n, lengths)]
    mask = np.zeros(terms.size, dtype=bool)
    mask[kept] = True
    vectors = []
    for i in range(len(c)):
        lo, hi = indptr[i], indptr[i + 1]
        m = mask[lo:hi]
        vectors.append(SparseVector(terms[lo:hi][m], weights[lo:hi][m], check=False))
    return c.with_vectors(vectors)


def prune_collection(c: Collection, cfg: PruneConfig) -> Collection:
    """Apply a static pruning strategy to every vector of ``c``.

    Documents pruned to nothing stay in place as empty vectors so the docid
    space is shared with the unpruned collection.
    """
    s = cfg.strategy
    if s is Strategy.DOC_TOPK:
        k = min(cfg.size_k, cfg.doc_cap)
        out = c.with_vectors(prune_vector_topk(v, k) if v.nnz else v for v in c.vectors)
    elif s is Strategy.QUERY_TOPK:
        k = min(cfg.size_k, cfg.query_cap)
        out = c.with_vectors(prune_vector_topk(v, k) if v.nnz else v for v in c.vectors)
    elif s is Strategy.TERM_QUANTILE:
        out = _term_quantile(c, cfg.quantile)
    else:
        out = c.with_vectors(_threshold(v, cfg.threshold) for v in c.vectors)
    emptied = out.count_empty() - c.count_empty()
    if emptied:
        log.info("%s left %d vectors empty", cfg.describe(), emptied)
    return out


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def lexical_size(avg_terms: float, cap: int) -> int:
    """Pruning size derived from an average vector size, capped and at least 1."""
    return max(1, min(round_half_up(avg_terms), cap))


def lexical_prune(c: Collection, stats: CollectionStats, cap: int = DOC_CAP,
                  *, queries: bool = False) -> Collection:
    """Prune to the collection's average size (rounded to nearest), bounded by ``cap``.

    With ``queries=True`` the average query size is used instead.
    """
    avg = stats.avg_query_terms if queries else stats.avg_doc_terms
    k = lexical_size(avg, cap)
    return c.with_vectors(prune_vector_topk(v, k) if v.nnz else v for v in c.vectors)
