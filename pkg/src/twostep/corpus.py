"""Ingestion of pre-computed sparse vectors and relevance judgments."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from twostep.errors import IngestionError, ParseError, TwoStepError

TERM_DTYPE = np.uint32
WEIGHT_DTYPE = np.float64


class SparseVector:
    """Sorted (term_id, weight) pairs with strictly positive weights."""

    __slots__ = ("terms", "weights")

    def __init__(self, terms=(), weights=(), *, check=True):
        terms = np.ascontiguousarray(terms, dtype=TERM_DTYPE)
        weights = np.ascontiguousarray(weights, dtype=WEIGHT_DTYPE)
        if check:
            if terms.shape != weights.shape or terms.ndim != 1:
                raise ValueError("terms and weights must be 1-d arrays of equal length")
            if terms.size > 1 and not np.all(terms[1:] > terms[:-1]):
                raise ValueError("term ids must be strictly increasing")
            if not np.all(weights > 0):
                raise ValueError("weights must be positive")
        terms.flags.writeable = False
        weights.flags.writeable = False
        self.terms = terms
        self.weights = weights

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, float]) -> SparseVector:
        """Build from ``{term_id: weight}``; zero weights are dropped."""
        items = sorted((int(t), float(w)) for t, w in mapping.items() if w != 0.0)
        if not items:
            return cls()
        terms, weights = zip(*items)
        return cls(terms, weights)

    @property
    def nnz(self) -> int:
        return int(self.terms.size)

    def __len__(self):
        return self.nnz

    def __iter__(self) -> Iterator[tuple[int, float]]:
        return zip(self.terms.tolist(), self.weights.tolist())

    def to_dict(self) -> dict[int, float]:
        return dict(self)

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.terms, other.terms) and np.array_equal(self.weights, other.weights)

    def __repr__(self):
        body = ", ".join(f"{t}: {w:g}" for t, w in list(self)[:8])
        more = ", ..." if self.nnz > 8 else ""
        return f"SparseVector({{{body}{more}}})"


class Lexicon:
    """Bidirectional term string <-> term id map.

    ``base_size`` is the vocabulary size of the collection the lexicon was
    built from; ids at or beyond it were added later (query-only terms) and
    match nothing in an index built on that collection.
    """

    def __init__(self, terms: Iterable[str] = (), base_size: int | None = None):
        self.terms: list[str] = []
        self.ids: dict[str, int] = {}
        for t in terms:
            self.add(t)
        self.base_size = len(self.terms) if base_size is None else base_size

    def add(self, term: str) -> int:
        tid = self.ids.get(term)
        if tid is None:
            tid = len(self.terms)
            self.ids[term] = tid
            self.terms.append(term)
        return tid

    def get(self, term: str) -> int | None:
        return self.ids.get(term)

    def term(self, tid: int) -> str:
        return self.terms[tid]

    def copy(self) -> Lexicon:
        return Lexicon(self.terms, base_size=self.base_size)

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.ids

    def __eq__(self, other):
        if not isinstance(other, Lexicon):
            return NotImplemented
        return self.terms == other.terms and self.base_size == other.base_size


@dataclass(frozen=True)
class Collection:
    """Documents (or queries) as sparse vectors over a shared lexicon."""

    doc_ids: tuple[str, ...]
    vectors: tuple[SparseVector, ...]
    lexicon: Lexicon
    unknown_terms: frozenset[str] = frozenset()

    def __post_init__(self):
        if len(self.doc_ids) != len(self.vectors):
            raise ValueError("doc_ids and vectors differ in length")

    def __len__(self):
        return len(self.doc_ids)

    def __iter__(self):
        return zip(self.doc_ids, self.vectors)

    def with_vectors(self, vectors: Iterable[SparseVector]) -> Collection:
        return Collection(self.doc_ids, tuple(vectors), self.lexicon, self.unknown_terms)

    def count_empty(self) -> int:
        return sum(1 for v in self.vectors if v.nnz == 0)

    def to_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(indptr, terms, weights)`` in document order."""
        lengths = np.fromiter((v.nnz for v in self.vectors), dtype=np.int64, count=len(self.vectors))
        indptr = np.zeros(len(self.vectors) + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        if indptr[-1] == 0:
            return indptr, np.zeros(0, TERM_DTYPE), np.zeros(0, WEIGHT_DTYPE)
        terms = np.concatenate([v.terms for v in self.vectors])
        weights = np.concatenate([v.weights for v in self.vectors])
        return indptr, terms, weights

    @classmethod
    def from_mappings(cls, docs: Iterable[tuple[str, Mapping[str, float]]],
                      lexicon: Lexicon | None = None) -> Collection:
        """Build from ``(doc_id, {term: weight})`` pairs, validating as a file load would."""
        return _ingest(((i + 1, did, vec) for i, (did, vec) in enumerate(docs)), lexicon, "<memory>")


@dataclass(frozen=True)
class CollectionStats:
    avg_doc_terms: float
    avg_query_terms: float
    num_docs: int
    vocab_size: int
    max_doc_terms: int
    num_queries: int = 0

    def as_dict(self) -> dict:
        return {
            "avg_doc_terms": self.avg_doc_terms,
            "avg_query_terms": self.avg_query_terms,
            "num_docs": self.num_docs,
            "num_queries": self.num_queries,
            "vocab_size": self.vocab_size,
            "max_doc_terms": self.max_doc_terms,
        }


@dataclass
class Qrels:
    judgments: dict[str, dict[str, int]] = field(default_factory=dict)

    def __getitem__(self, qid) -> dict[str, int]:
        return self.judgments[qid]

    def get(self, qid, default=None):
        return self.judgments.get(qid, default)

    def __contains__(self, qid):
        return qid in self.judgments

    def __len__(self):
        return len(self.judgments)

    def query_ids(self):
        return self.judgments.keys()


def _ingest(records, lexicon: Lexicon | None, source) -> Collection:
    lex = Lexicon() if lexicon is None else lexicon.copy()
    seen: set[str] = set()
    unknown: set[str] = set()
    doc_ids: list[str] = []
    vectors: list[SparseVector] = []
    for lineno, did, raw in records:
        if did in seen:
            raise IngestionError(f"{source}:{lineno}: duplicate id {did!r}")
        seen.add(did)
        pairs: dict[int, float] = {}
        for term, weight in raw.items():
            if not isinstance(term, str):
                raise ParseError(source, lineno, f"term {term!r} is not a string")
            if isinstance(weight, bool) or not isinstance(weight, (int, float)):
                raise ParseError(source, lineno, f"weight of {term!r} is not a number")
            w = float(weight)
            if not math.isfinite(w):
                raise ParseError(source, lineno, f"weight of {term!r} is not finite")
            if w < 0:
                raise IngestionError(f"{source}:{lineno}: negative weight for {term!r}")
            if w == 0.0:
                continue
            if lexicon is not None and term not in lex:
                unknown.add(term)
            pairs[lex.add(term)] = w
        doc_ids.append(did)
        vectors.append(SparseVector.from_mapping(pairs))
    if lexicon is None:
        lex.base_size = len(lex)
    return Collection(tuple(doc_ids), tuple(vectors), lex, frozenset(unknown))


def _records(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or "id" not in rec or "vector" not in rec:
                raise ParseError(path, lineno, "expected an object with 'id' and 'vector'")
            did, vec = rec["id"], rec["vector"]
            if not isinstance(did, str):
                raise ParseError(path, lineno, "'id' must be a string")
            if not isinstance(vec, dict):
                raise ParseError(path, lineno, "'vector' must be an object")
            yield lineno, did, vec


def load_vectors(path, lexicon: Lexicon | None = None) -> Collection:
    """Load a JSON-lines vector file.

    Each line is ``{"id": str, "vector": {term: weight}}``. Zero weights are
    dropped, negative weights rejected. When ``lexicon`` is given (loading
    queries against an indexed corpus) it is copied and extended; terms it
    did not contain are reported in ``Collection.unknown_terms``.
    """
    path = Path(path)
    return _ingest(_records(path), lexicon, path)


def dump_vectors(collection: Collection, path) -> None:
    """Write ``collection`` in the same format :func:`load_vectors` reads."""
    lex = collection.lexicon
    with open(path, "w", encoding="utf-8") as fh:
        for did, vec in collection:
            body = {lex.term(t): w for t, w in vec}
            fh.write(json.dumps({"id": did, "vector": body}, ensure_ascii=False))
            fh.write("\n")


def compute_stats(docs: Collection, queries: Collection | None = None) -> CollectionStats:
    """Average vector sizes of a document (and optionally query) collection."""
    if len(docs) == 0:
        raise TwoStepError("cannot compute statistics of an empty collection")
    counts = [v.nnz for v in docs.vectors]
    avg_q = 0.0
    n_q = 0
    if queries is not None:
        if len(queries) == 0:
            raise TwoStepError("cannot compute statistics of an empty query collection")
        n_q = len(queries)
        avg_q = sum(v.nnz for v in queries.vectors) / n_q
    return CollectionStats(
        avg_doc_terms=sum(counts) / len(counts),
        avg_query_terms=avg_q,
        num_docs=len(docs),
        vocab_size=docs.lexicon.base_size,
        max_doc_terms=max(counts),
        num_queries=n_q,
    )


def load_qrels(path) -> Qrels:
    """Load TREC qrels (``qid iter docid grade``); later duplicates win."""
    path = Path(path)
    judgments: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ParseError(path, lineno, f"expected 4 fields, got {len(parts)}")
            qid, _, docid, grade = parts
            try:
                g = int(grade)
            except ValueError:
                raise ParseError(path, lineno, f"grade {grade!r} is not an integer") from None
            if g < 0:
                raise ParseError(path, lineno, f"negative grade {g}")
            judgments.setdefault(qid, {})[docid] = g
    return Qrels(judgments)


def write_qrels(qrels: Qrels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in qrels.query_ids():
            for docid, g in qrels[qid].items():
                fh.write(f"{qid} 0 {docid} {g}\n")
