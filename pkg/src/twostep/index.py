"""Impact-quantized inverted index with block-max metadata, and the exact forward index."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from twostep.corpus import Collection, Lexicon, SparseVector, TERM_DTYPE, WEIGHT_DTYPE
from twostep.errors import DocidOutOfRangeError, TwoStepError

DEFAULT_BLOCK_SIZE = 64
DOCID_DTYPE = np.int32
IMPACT_DTYPE = np.uint8


@dataclass(frozen=True)
class PostingList:
    doc_ids: np.ndarray
    impacts: np.ndarray
    max_impact: int
    block_last: np.ndarray
    block_max: np.ndarray

    def __len__(self):
        return int(self.doc_ids.size)

    def blocks(self):
        return list(zip(self.block_last.tolist(), self.block_max.tolist()))


def quantize(weights: np.ndarray, scale: float, bits: int = 8) -> np.ndarray:
    """Linear quantization, round half up, every positive weight maps to >= 1."""
    levels = (1 << bits) - 1
    q = np.floor(np.asarray(weights, dtype=np.float64) / scale + 0.5)
    return np.clip(q, 1, levels).astype(IMPACT_DTYPE if bits <= 8 else np.uint16)


class InvertedIndex:
    """Postings for every term id of ``lexicon``, stored as flat arrays.

    Term ``t`` owns ``docs[term_offsets[t]:term_offsets[t+1]]`` (and the
    same slice of ``impacts``) and blocks
    ``block_offsets[t]:block_offsets[t+1]``. Block ``j`` of a term covers
    its postings ``[j*block_size, (j+1)*block_size)``. A stored impact
    dequantizes to ``impact * quant_scale``.
    """

    def __init__(self, *, lexicon: Lexicon, doc_ids, quant_scale: float, quant_bits: int,
                 block_size: int, term_offsets, docs, impacts, block_offsets, block_last,
                 block_max, prune: str = "full", stats: dict | None = None):
        if quant_scale <= 0:
            raise ValueError("quant_scale must be positive")
        self.lexicon = lexicon
        self.doc_ids = tuple(doc_ids)
        self.num_docs = len(self.doc_ids)
        self.quant_scale = float(quant_scale)
        self.quant_bits = int(quant_bits)
        self.block_size = int(block_size)
        self.term_offsets = np.ascontiguousarray(term_offsets, dtype=np.int64)
        self.docs = np.ascontiguousarray(docs, dtype=DOCID_DTYPE)
        self.impacts = np.ascontiguousarray(impacts, dtype=IMPACT_DTYPE)
        self.block_offsets = np.ascontiguousarray(block_offsets, dtype=np.int64)
        self.block_last = np.ascontiguousarray(block_last, dtype=DOCID_DTYPE)
        self.block_max = np.ascontiguousarray(block_max, dtype=IMPACT_DTYPE)
        self.prune = prune
        self.stats = dict(stats or {})
        self.vocab_size = self.term_offsets.size - 1
        lens = np.diff(self.term_offsets)
        self.max_impact = np.zeros(self.vocab_size, dtype=IMPACT_DTYPE)
        nz = np.flatnonzero(lens)
        if nz.size:
            self.max_impact[nz] = np.maximum.reduceat(self.impacts, self.term_offsets[nz])
        self.doc_lens = np.bincount(self.docs, minlength=self.num_docs).astype(DOCID_DTYPE)
        self._cache: dict = {}
        self._ext_ids: dict[str, int] | None = None

    # -- lookups -----------------------------------------------------------
    def posting_list(self, term: int) -> PostingList:
        if not 0 <= term < self.vocab_size:
            return PostingList(np.zeros(0, DOCID_DTYPE), np.zeros(0, IMPACT_DTYPE), 0,
                               np.zeros(0, DOCID_DTYPE), np.zeros(0, IMPACT_DTYPE))
        lo, hi = self.term_offsets[term], self.term_offsets[term + 1]
        blo, bhi = self.block_offsets[term], self.block_offsets[term + 1]
        return PostingList(self.docs[lo:hi], self.impacts[lo:hi], int(self.max_impact[term]),
                           self.block_last[blo:bhi], self.block_max[blo:bhi])

    def df(self, term: int) -> int:
        if not 0 <= term < self.vocab_size:
            return 0
        return int(self.term_offsets[term + 1] - self.term_offsets[term])

    def internal_id(self, doc_id: str) -> int:
        if self._ext_ids is None:
            self._ext_ids = {d: i for i, d in enumerate(self.doc_ids)}
        return self._ext_ids[doc_id]

    @property
    def num_postings(self) -> int:
        return int(self.docs.size)

    @property
    def avg_doc_len(self) -> float:
        return float(self.doc_lens.mean()) if self.num_docs else 0.0

    def bm25_length_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Shortest document length per block and per term (for BM25 upper bounds)."""
        if "bm25_len" not in self._cache:
            lens = self.doc_lens[self.docs] if self.docs.size else np.zeros(0, DOCID_DTYPE)
            starts = _block_starts(self.term_offsets, self.block_offsets, self.block_size)
            block_min = (np.minimum.reduceat(lens, starts).astype(DOCID_DTYPE)
                         if starts.size else np.zeros(0, DOCID_DTYPE))
            term_min = np.zeros(self.vocab_size, dtype=DOCID_DTYPE)
            nb = np.diff(self.block_offsets)
            nz = np.flatnonzero(nb)
            if nz.size:
                term_min[nz] = np.minimum.reduceat(block_min, self.block_offsets[nz])
            self._cache["bm25_len"] = (block_min, term_min)
        return self._cache["bm25_len"]

    def py_lists(self) -> tuple[list, list, list, list]:
        """Posting arrays as Python lists, for the pure-Python kernels."""
        if "py" not in self._cache:
            self._cache["py"] = (self.docs.tolist(), self.impacts.tolist(),
                                 self.block_last.tolist(), self.block_max.tolist())
        return self._cache["py"]

    def __eq__(self, other):
        if not isinstance(other, InvertedIndex):
            return NotImplemented
        scalars = ("doc_ids", "quant_scale", "quant_bits", "block_size", "prune", "lexicon")
        arrays = ("term_offsets", "docs", "impacts", "block_offsets", "block_last", "block_max")
        return (all(getattr(self, a) == getattr(other, a) for a in scalars)
                and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
                and self.stats == other.stats)

    def __repr__(self):
        return (f"InvertedIndex(num_docs={self.num_docs}, vocab={self.vocab_size}, "
                f"postings={self.num_postings}, scale={self.quant_scale:.6g}, prune={self.prune!r})")


def _block_starts(term_offsets, block_offsets, block_size) -> np.ndarray:
    """Absolute posting offset of the first posting of every block."""
    nb = np.diff(block_offsets)
    owner = np.repeat(np.arange(nb.size), nb)
    within = np.arange(int(block_offsets[-1])) - np.repeat(block_offsets[:-1], nb)
    return (term_offsets[:-1][owner] + within * block_size).astype(np.int64)


def build_inverted(c: Collection, block_size: int = DEFAULT_BLOCK_SIZE, quant_bits: int = 8,
                   *, quant_scale: float | None = None, prune: str = "full",
                   stats: dict | None = None) -> InvertedIndex:
    """Quantize ``c`` into an impact index.

    The scale is ``max_weight / (2**quant_bits - 1)`` over the whole
    collection unless ``quant_scale`` is given (to share the scale of a
    larger index built from the same corpus).
    """
    if quant_bits != 8:
        raise ValueError("only 8-bit impacts are supported")
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    if len(c) == 0:
        raise TwoStepError("cannot index an empty collection")
    indptr, terms, weights = c.to_csr()
    if terms.size == 0:
        raise TwoStepError("every document vector is empty")
    levels = (1 << quant_bits) - 1
    scale = float(weights.max()) / levels if quant_scale is None else float(quant_scale)
    impacts = quantize(weights, scale, quant_bits)
    docs = np.repeat(np.arange(len(c), dtype=DOCID_DTYPE), np.diff(indptr))
    order = np.lexsort((docs, terms))
    terms_s, docs_s, imps_s = terms[order], docs[order], impacts[order]
    vocab = max(len(c.lexicon), int(terms.max()) + 1)
    counts = np.bincount(terms_s.astype(np.int64), minlength=vocab)
    term_offsets = np.zeros(vocab + 1, dtype=np.int64)
    np.cumsum(counts, out=term_offsets[1:])
    nblocks = -(-counts // block_size)
    block_offsets = np.zeros(vocab + 1, dtype=np.int64)
    np.cumsum(nblocks, out=block_offsets[1:])
    starts = _block_starts(term_offsets, block_offsets, block_size)
    if starts.size:
        block_max = np.maximum.reduceat(imps_s, starts)
        ends = np.r_[starts[1:], docs_s.size]
        # a block ends at the next block start or its term's end, whichever is first
        owner = np.repeat(np.arange(vocab), nblocks)
        ends = np.minimum(ends, term_offsets[1:][owner])
        block_last = docs_s[ends - 1]
    else:
        block_max = np.zeros(0, IMPACT_DTYPE)
        block_last = np.zeros(0, DOCID_DTYPE)
    return InvertedIndex(lexicon=c.lexicon, doc_ids=c.doc_ids, quant_scale=scale,
                         quant_bits=quant_bits, block_size=block_size, term_offsets=term_offsets,
                         docs=docs_s, impacts=imps_s, block_offsets=block_offsets,
                         block_last=block_last, block_max=block_max, prune=prune, stats=stats)


@dataclass
class ForwardIndex:
    """Exact (unquantized) vectors addressed by internal docid, in CSR layout."""

    indptr: np.ndarray
    terms: np.ndarray
    weights: np.ndarray
    doc_ids: tuple[str, ...] = field(default_factory=tuple)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_docs(self) -> int:
        return self.indptr.size - 1

    def lookup(self, docid: int) -> SparseVector:
        if not 0 <= docid < self.num_docs:
            raise DocidOutOfRangeError(f"docid {docid} outside [0, {self.num_docs})")
        lo, hi = self.indptr[docid], self.indptr[docid + 1]
        return SparseVector(self.terms[lo:hi], self.weights[lo:hi], check=False)

    __getitem__ = lookup

    def __len__(self):
        return self.num_docs

    def py_lists(self) -> tuple[list, list, list]:
        if "py" not in self._cache:
            self._cache["py"] = (self.indptr.tolist(), self.terms.tolist(), self.weights.tolist())
        return self._cache["py"]

    def __eq__(self, other):
        if not isinstance(other, ForwardIndex):
            return NotImplemented
        return (self.doc_ids == other.doc_ids and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.terms, other.terms)
                and np.array_equal(self.weights, other.weights))


def build_forward(c: Collection) -> ForwardIndex:
    indptr, terms, weights = c.to_csr()
    return ForwardIndex(indptr, np.ascontiguousarray(terms, TERM_DTYPE),
                        np.ascontiguousarray(weights, WEIGHT_DTYPE), tuple(c.doc_ids))


def dequantized_vectors(idx: InvertedIndex) -> list[SparseVector]:
    """Per-document vectors of ``impact * quant_scale`` (test and oracle helper)."""
    terms = np.repeat(np.arange(idx.vocab_size, dtype=TERM_DTYPE), np.diff(idx.term_offsets))
    order = np.lexsort((terms, idx.docs))
    d, t = idx.docs[order], terms[order]
    w = idx.impacts[order].astype(np.float64) * idx.quant_scale
    bounds = np.searchsorted(d, np.arange(idx.num_docs + 1))
    return [SparseVector(t[bounds[i]:bounds[i + 1]], w[bounds[i]:bounds[i + 1]], check=False)
            for i in range(idx.num_docs)]
