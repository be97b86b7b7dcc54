"""Two-step retrieval: cheap approximate candidates, then exact rescoring.

``two_step_search`` runs a pruned query with saturated scoring over a
pruned index; ``gt_search`` (guided traversal) uses BM25 over the same
kind of index instead. Both rescore their candidates with the full,
unpruned query against a forward index (exact weights) or, for parity
with filtered search in impact-index engines, against the full inverted
index (quantized weights).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from twostep.corpus import SparseVector
from twostep.index import ForwardIndex, InvertedIndex
from twostep.pruning import prune_vector_topk
from twostep.retrieval import (Algorithm, ScoredList, SearchParams, search,
                               search_filtered, search_filtered_inverted)
from twostep.scoring import Bm25, Dot, Saturated, Scorer


@dataclass(frozen=True)
class TwoStepConfig:
    """Indexes and knobs of a two-step pipeline.

    ``candidates`` is how many first-stage hits are rescored, ``k`` how
    many final hits are returned. ``query_prune_k=None`` keeps the whole
    query in the first stage.
    """

    approx_index: InvertedIndex
    rescore_source: ForwardIndex | InvertedIndex
    k: int = 100
    candidates: int = 100
    k1: float = 100.0
    query_prune_k: int | None = None
    algorithm: Algorithm = Algorithm.BMW
    bm25: Bm25 = field(default_factory=Bm25)
    backend: str | None = None

    def __post_init__(self):
        if self.k < 1 or self.candidates < 1:
            raise ValueError("k and candidates must be >= 1")
        if self.query_prune_k is not None and self.query_prune_k < 1:
            raise ValueError("query_prune_k must be >= 1")
        n_rescore = self.rescore_source.num_docs
        if self.approx_index.num_docs != n_rescore:
            raise ValueError(f"approximate index has {self.approx_index.num_docs} documents, "
                             f"rescoring source has {n_rescore}")

    def with_(self, **changes) -> TwoStepConfig:
        return replace(self, **changes)

    @property
    def rescores_exactly(self) -> bool:
        return isinstance(self.rescore_source, ForwardIndex)


@dataclass(frozen=True)
class Stages:
    first: ScoredList
    final: ScoredList

    @property
    def combined(self) -> ScoredList:
        """Final hits, carrying the work counters of both stages."""
        return ScoredList(self.final.docids, self.final.scores,
                          self.first.postings_touched + self.final.postings_touched,
                          self.first.docs_fully_scored + self.final.docs_fully_scored)


def _first_stage_query(q: SparseVector, cfg: TwoStepConfig) -> SparseVector:
    if cfg.query_prune_k is None:
        return q
    return prune_vector_topk(q, cfg.query_prune_k)


def rescore(q: SparseVector, cfg: TwoStepConfig, candidates) -> ScoredList:
    """Score ``candidates`` with the full query against the rescoring source."""
    if isinstance(cfg.rescore_source, ForwardIndex):
        return search_filtered(q, cfg.rescore_source, candidates, cfg.k, cfg.backend)
    return search_filtered_inverted(q, cfg.rescore_source, candidates, cfg.k, Dot(), cfg.backend)


def _run(q: SparseVector, cfg: TwoStepConfig, scorer: Scorer) -> Stages:
    qa = _first_stage_query(q, cfg)
    first = search(qa, cfg.approx_index,
                   SearchParams(k=cfg.candidates, algorithm=cfg.algorithm, scorer=scorer),
                   cfg.backend)
    if len(first) == 0:
        return Stages(first, ScoredList.empty())
    return Stages(first, rescore(q, cfg, first.docids))


def two_step_stages(q: SparseVector, cfg: TwoStepConfig) -> Stages:
    return _run(q, cfg, Saturated(cfg.k1))


def two_step_search(q: SparseVector, cfg: TwoStepConfig) -> ScoredList:
    """Saturated approximate search, then exact rescoring of its top ``cfg.candidates``."""
    return two_step_stages(q, cfg).combined


def gt_stages(q: SparseVector, cfg: TwoStepConfig) -> Stages:
    return _run(q, cfg, cfg.bm25)


def gt_search(q: SparseVector, cfg: TwoStepConfig) -> ScoredList:
    """BM25 over the approximate index (query terms as a set), then the same rescoring."""
    return gt_stages(q, cfg).combined
