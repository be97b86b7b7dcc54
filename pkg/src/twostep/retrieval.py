"""Top-k query evaluation over an impact index.

Exhaustive DAAT is the oracle; MaxScore, WAND and Block-Max WAND are safe
dynamic-pruning strategies that must return exactly its hit list. Equal
scores rank the lower docid first, everywhere.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from twostep import _backend
from twostep.corpus import SparseVector
from twostep.errors import DocidOutOfRangeError
from twostep.index import DOCID_DTYPE, ForwardIndex, InvertedIndex
from twostep.scoring import (MODE_BM25, Bm25, Dot, KernelParams, Scorer, bm25_idf,
                             kernel_params, term_contribution)


class Algorithm(enum.Enum):
    EXHAUSTIVE = "exhaustive"
    MAXSCORE = "maxscore"
    WAND = "wand"
    BMW = "bmw"

    def __str__(self):
        return self.value

    @property
    def code(self) -> int:
        return _CODES[self]

    @classmethod
    def parse(cls, text) -> Algorithm:
        if isinstance(text, cls):
            return text
        t = str(text).strip().lower().replace("-", "").replace("_", "")
        aliases = {"blockmaxwand": "bmw", "exact": "exhaustive", "daat": "exhaustive"}
        return cls(aliases.get(t, t))


_CODES = {Algorithm.EXHAUSTIVE: 0, Algorithm.MAXSCORE: 1, Algorithm.WAND: 2, Algorithm.BMW: 3}
DYNAMIC = (Algorithm.MAXSCORE, Algorithm.WAND, Algorithm.BMW)


@dataclass(frozen=True)
class SearchParams:
    k: int = 100
    algorithm: Algorithm = Algorithm.BMW
    scorer: Scorer = field(default_factory=Dot)
    filter: tuple | np.ndarray | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(eq=False)
class ScoredList:
    """Hits sorted by score descending, docid ascending on ties."""

    docids: np.ndarray
    scores: np.ndarray
    postings_touched: int = 0
    docs_fully_scored: int = 0

    @classmethod
    def empty(cls) -> ScoredList:
        return cls(np.zeros(0, DOCID_DTYPE), np.zeros(0, np.float64))

    def __len__(self):
        return int(self.docids.size)

    def hits(self) -> list[tuple[int, float]]:
        return list(zip(self.docids.tolist(), self.scores.tolist()))

    def top(self, n: int) -> ScoredList:
        return ScoredList(self.docids[:n], self.scores[:n], self.postings_touched,
                          self.docs_fully_scored)

    def same_hits(self, other: ScoredList) -> bool:
        return np.array_equal(self.docids, other.docids) and np.array_equal(self.scores, other.scores)

    def __eq__(self, other):
        if not isinstance(other, ScoredList):
            return NotImplemented
        return self.same_hits(other)

    def __repr__(self):
        head = ", ".join(f"({d}, {s:.6g})" for d, s in self.hits()[:5])
        more = ", ..." if len(self) > 5 else ""
        return f"ScoredList([{head}{more}], touched={self.postings_touched}, full={self.docs_fully_scored})"


def _ranked(docs, scores, touched, fully) -> ScoredList:
    docs = np.asarray(docs, dtype=DOCID_DTYPE)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((docs, -scores))
    return ScoredList(docs[order], scores[order], int(touched), int(fully))


@dataclass(frozen=True)
class QueryPlan:
    """Per-query arrays handed to a kernel: one row per matching query term."""

    terms: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    bstarts: np.ndarray
    bends: np.ndarray
    coef: np.ndarray
    ub: np.ndarray
    params: KernelParams

    @property
    def n(self) -> int:
        return int(self.terms.size)


def plan_query(q: SparseVector, idx: InvertedIndex, scorer: Scorer) -> QueryPlan:
    """Map query terms onto posting lists and compute per-term score bounds.

    Terms outside the index vocabulary or without postings are dropped.
    For BM25 the query weights are ignored (term-set semantics) and the
    coefficient is the term's IDF.
    """
    terms = q.terms.astype(np.int64)
    weights = q.weights
    inside = terms < idx.vocab_size
    terms, weights = terms[inside], weights[inside]
    starts = idx.term_offsets[terms]
    ends = idx.term_offsets[terms + 1]
    live = ends > starts
    terms, weights, starts, ends = terms[live], weights[live], starts[live], ends[live]
    is_bm25 = isinstance(scorer, Bm25)
    params = kernel_params(scorer, idx.quant_scale, idx.avg_doc_len if is_bm25 else 1.0)
    if is_bm25:
        coef = np.array([bm25_idf(idx.num_docs, int(n)) for n in (ends - starts)], dtype=np.float64)
        term_min = idx.bm25_length_bounds()[1]
        ub = [term_contribution(params, c, int(idx.max_impact[t]), int(term_min[t]))
              for c, t in zip(coef.tolist(), terms.tolist())]
    else:
        coef = np.ascontiguousarray(weights, dtype=np.float64)
        ub = [term_contribution(params, c, int(idx.max_impact[t]))
              for c, t in zip(coef.tolist(), terms.tolist())]
    return QueryPlan(terms, np.ascontiguousarray(starts, np.int64), np.ascontiguousarray(ends, np.int64),
                     np.ascontiguousarray(idx.block_offsets[terms], np.int64),
                     np.ascontiguousarray(idx.block_offsets[terms + 1], np.int64),
                     coef, np.asarray(ub, dtype=np.float64), params)


_DUMMY_I32 = np.zeros(1, dtype=np.int32)


def _bm25_lists(idx: InvertedIndex, name: str):
    if name == "python":
        key = "py_bm25"
        if key not in idx._cache:
            idx._cache[key] = (idx.bm25_length_bounds()[0].tolist(), idx.doc_lens.tolist())
        return idx._cache[key]
    return idx.bm25_length_bounds()[0], idx.doc_lens


def run_plan(plan: QueryPlan, idx: InvertedIndex, algorithm: Algorithm, k: int,
             backend: str | None = None) -> ScoredList:
    if plan.n == 0:
        return ScoredList.empty()
    name, kern = _backend.get(backend)
    p = plan.params
    bm25 = p.mode == MODE_BM25
    if name == "python":
        docs, imps, blast, bmax = idx.py_lists()
        bminlen, doclens = _bm25_lists(idx, name) if bm25 else (None, None)
        out = kern.search(algorithm.code, docs, imps, blast, bmax, bminlen, doclens,
                          plan.starts.tolist(), plan.ends.tolist(), plan.bstarts.tolist(),
                          plan.bends.tolist(), plan.coef.tolist(), plan.ub.tolist(),
                          p.mode, p.scale, p.k1, p.b, p.avgdl, k)
    else:
        bminlen, doclens = _bm25_lists(idx, name) if bm25 else (_DUMMY_I32, _DUMMY_I32)
        if bminlen.size == 0:
            bminlen = _DUMMY_I32
        out = kern.search(algorithm.code, idx.docs, idx.impacts, idx.block_last, idx.block_max,
                          bminlen, doclens, plan.starts, plan.ends, plan.bstarts, plan.bends,
                          plan.coef, plan.ub, p.mode, p.scale, p.k1, p.b, p.avgdl, k)
    return _ranked(*out)


def _candidates(candidates, num_docs: int) -> np.ndarray:
    c = np.unique(np.asarray(candidates, dtype=np.int64))
    if c.size and (c[0] < 0 or c[-1] >= num_docs):
        bad = c[(c < 0) | (c >= num_docs)]
        raise DocidOutOfRangeError(f"candidate docids outside [0, {num_docs}): {bad[:10].tolist()}")
    return c.astype(DOCID_DTYPE)


def search(q: SparseVector, idx: InvertedIndex, p: SearchParams = SearchParams(),
           backend: str | None = None) -> ScoredList:
    """Top ``p.k`` documents of ``idx`` for ``q``.

    With ``p.filter`` set, only those docids are scored, by skipping
    through the postings with ``nextgeq`` (the algorithm is then irrelevant).
    """
    plan = plan_query(q, idx, p.scorer)
    if p.filter is not None:
        return _filtered_plan(plan, idx, _candidates(p.filter, idx.num_docs), p.k, backend)
    return run_plan(plan, idx, Algorithm.parse(p.algorithm), p.k, backend)


def _with_algorithm(p: SearchParams, algorithm: Algorithm) -> SearchParams:
    return SearchParams(k=p.k, algorithm=algorithm, scorer=p.scorer, filter=None)


def search_exhaustive(q, idx, p: SearchParams = SearchParams(), backend=None) -> ScoredList:
    return search(q, idx, _with_algorithm(p, Algorithm.EXHAUSTIVE), backend)


def search_maxscore(q, idx, p: SearchParams = SearchParams(), backend=None) -> ScoredList:
    return search(q, idx, _with_algorithm(p, Algorithm.MAXSCORE), backend)


def search_wand(q, idx, p: SearchParams = SearchParams(), backend=None) -> ScoredList:
    return search(q, idx, _with_algorithm(p, Algorithm.WAND), backend)


def search_bmw(q, idx, p: SearchParams = SearchParams(), backend=None) -> ScoredList:
    return search(q, idx, _with_algorithm(p, Algorithm.BMW), backend)


def _filtered_plan(plan: QueryPlan, idx: InvertedIndex, cand: np.ndarray, k: int,
                   backend: str | None) -> ScoredList:
    if cand.size == 0:
        return ScoredList.empty()
    name, kern = _backend.get(backend)
    p = plan.params
    bm25 = p.mode == MODE_BM25
    if plan.n == 0:
        # nothing matches: every candidate scores zero
        return _ranked(cand[:k] if cand.size > k else cand, np.zeros(min(k, cand.size)), 0, cand.size)
    if name == "python":
        docs, imps, _, _ = idx.py_lists()
        doclens = _bm25_lists(idx, name)[1] if bm25 else None
        out = kern.search_filtered(docs, imps, doclens, plan.starts.tolist(), plan.ends.tolist(),
                                   plan.coef.tolist(), p.mode, p.scale, p.k1, p.b, p.avgdl,
                                   cand.tolist(), k)
    else:
        doclens = idx.doc_lens if bm25 else _DUMMY_I32
        out = kern.search_filtered(idx.docs, idx.impacts, doclens, plan.starts, plan.ends,
                                   plan.coef, p.mode, p.scale, p.k1, p.b, p.avgdl, cand, k)
    return _ranked(*out)


def search_filtered_inverted(q: SparseVector, idx: InvertedIndex, candidates, k: int,
                             scorer: Scorer = Dot(), backend: str | None = None) -> ScoredList:
    """Rescore ``candidates`` over an inverted index (quantized scores)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return _filtered_plan(plan_query(q, idx, scorer), idx, _candidates(candidates, idx.num_docs),
                          k, backend)


def search_filtered(q: SparseVector, fwd: ForwardIndex, candidates, k: int,
                    backend: str | None = None) -> ScoredList:
    """Exact dot product of the full query with each candidate's stored vector; top ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    cand = _candidates(candidates, fwd.num_docs)
    if cand.size == 0:
        return ScoredList.empty()
    name, kern = _backend.get(backend)
    if name == "python":
        indptr, fterms, fweights = fwd.py_lists()
        out = kern.rescore_forward(indptr, fterms, fweights, q.terms.tolist(), q.weights.tolist(),
                                   cand.tolist(), k)
    else:
        out = kern.rescore_forward(fwd.indptr, fwd.terms, fwd.weights, q.terms, q.weights, cand, k)
    return _ranked(*out)


def search_forward_exhaustive(q: SparseVector, fwd: ForwardIndex, k: int,
                              backend: str | None = None) -> ScoredList:
    """Exact single-step search over unquantized weights.

    Like inverted-index search, only documents sharing a term with the
    query are hits.
    """
    hit = np.isin(fwd.terms, q.terms)
    owners = np.repeat(np.arange(fwd.num_docs), np.diff(fwd.indptr))
    return search_filtered(q, fwd, np.unique(owners[hit]), k, backend)
