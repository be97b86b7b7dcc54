"""Scoring functions: impact dot product, saturated re-weighting and BM25.

The per-term formulas in :func:`term_contribution` are mirrored operation
for operation by both search kernels, so scores agree bit for bit across
backends and with the scalar functions here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from twostep.corpus import SparseVector

INFINITY = math.inf

MODE_DOT = 0
MODE_SATURATED = 1
MODE_BM25 = 2

# k1 values swept when tracing the saturation trade-off
K1_SWEEP = (10.0, 100.0, 400.0, INFINITY)


@dataclass(frozen=True)
class Dot:
    """Plain impact dot product."""

    name = "dot"


@dataclass(frozen=True)
class Saturated:
    """``B(t,q) * (k1+1) TF / (TF + k1)`` with document length normalization disabled.

    ``k1=INFINITY`` reduces to the dot product and ``k1=0`` to counting
    matched query weight.
    """

    k1: float = 100.0
    name = "saturated"

    def __post_init__(self):
        if math.isnan(self.k1) or self.k1 < 0:
            raise ValueError("k1 must be >= 0 or INFINITY")


@dataclass(frozen=True)
class Bm25:
    """BM25 over the index's quantized impacts used as term frequencies."""

    k1: float = 0.9
    b: float = 0.4
    name = "bm25"

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError("BM25 k1 must be positive")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("BM25 b must lie in [0, 1]")


Scorer = Dot | Saturated | Bm25


def parse_scorer(text: str) -> Scorer:
    """``dot``, ``saturated:<k1>`` (``inf`` allowed) or ``bm25[:k1[:b]]``."""
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name == "dot":
        return Dot()
    if name in ("saturated", "sat"):
        return Saturated(parse_k1(rest) if rest else 100.0)
    if name == "bm25":
        args = [float(x) for x in rest.split(":") if x]
        return Bm25(*args)
    raise ValueError(f"unknown scorer {text!r}")


def parse_k1(text: str) -> float:
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "∞"):
        return INFINITY
    return float(t)


def format_k1(k1: float) -> str:
    return "inf" if math.isinf(k1) else f"{k1:g}"


@dataclass(frozen=True)
class KernelParams:
    mode: int
    scale: float
    k1: float
    b: float
    avgdl: float


def kernel_params(scorer: Scorer, scale: float, avgdl: float = 1.0) -> KernelParams:
    if isinstance(scorer, Dot) or (isinstance(scorer, Saturated) and math.isinf(scorer.k1)):
        return KernelParams(MODE_DOT, scale, 0.0, 0.0, 1.0)
    if isinstance(scorer, Saturated):
        return KernelParams(MODE_SATURATED, scale, float(scorer.k1), 0.0, 1.0)
    if avgdl <= 0:
        raise ValueError("BM25 needs a positive average document length")
    return KernelParams(MODE_BM25, scale, float(scorer.k1), float(scorer.b), float(avgdl))


def term_contribution(p: KernelParams, coef: float, impact: int, doclen: int = 0) -> float:
    """Score of one posting; ``coef`` is the query weight (or IDF for BM25)."""
    if p.mode == MODE_DOT:
        return coef * (impact * p.scale)
    if p.mode == MODE_SATURATED:
        tf = impact * p.scale
        return coef * (((p.k1 + 1.0) * tf) / (tf + p.k1))
    tf = float(impact)
    norm = p.k1 * (1.0 - p.b + p.b * doclen / p.avgdl)
    return coef * ((tf * (p.k1 + 1.0)) / (tf + norm))


def bm25_idf(num_docs: int, df: int) -> float:
    return math.log((num_docs - df + 0.5) / (df + 0.5) + 1.0)


def saturate(tf: float, k1: float) -> float:
    """``(k1+1) tf / (tf + k1)``; the identity at ``k1=INFINITY``."""
    if math.isinf(k1):
        return tf
    return ((k1 + 1.0) * tf) / (tf + k1)


# -- exact scorers over unquantized vectors ---------------------------------

def _shared(q: SparseVector, d: SparseVector):
    _, qi, di = np.intersect1d(q.terms, d.terms, assume_unique=True, return_indices=True)
    return q.weights[qi].tolist(), d.weights[di].tolist()


def score_dot(q: SparseVector, d: SparseVector) -> float:
    """Sum over shared terms of query weight times document weight, in term order."""
    s = 0.0
    for a, b in zip(*_shared(q, d)):
        s += a * b
    return s


def score_saturated(q: SparseVector, d: SparseVector, k1: float | Saturated = 100.0) -> float:
    k1 = k1.k1 if isinstance(k1, Saturated) else float(k1)
    if math.isinf(k1):
        return score_dot(q, d)
    s = 0.0
    for bq, tf in zip(*_shared(q, d)):
        s += bq * (((k1 + 1.0) * tf) / (tf + k1))
    return s


def score_bm25(q: SparseVector, docid: int, idx, params: Bm25 = Bm25()) -> float:
    """BM25 of internal document ``docid`` for the term set of ``q`` over ``idx``.

    Term frequencies are the stored impacts; document length is the
    number of postings the document has in ``idx``.
    """
    p = kernel_params(params, idx.quant_scale, idx.avg_doc_len)
    dl = int(idx.doc_lens[docid])
    s = 0.0
    for t in q.terms.tolist():
        pl = idx.posting_list(t)
        if not len(pl):
            continue
        j = int(np.searchsorted(pl.doc_ids, docid))
        if j < len(pl) and pl.doc_ids[j] == docid:
            s += term_contribution(p, bm25_idf(idx.num_docs, len(pl)), int(pl.impacts[j]), dl)
    return s
