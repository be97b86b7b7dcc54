"""On-disk index format.

Directory layout::

    meta.json      version, num_docs, quant_scale, block_size, byte sizes
    lexicon.bin    term strings
    postings.bin   per term id: varint length, delta-varint docids, raw impacts
    blockmax.bin   per term id: varint block count, delta-varint block last docids, raw block maxima
    forward.bin    per document: varint nnz, delta-varint term ids, float64 LE weights
    docids.txt     external document ids, one per line

Every ``.bin`` file ends with an 8-byte BLAKE2b digest of its body.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from twostep.corpus import Lexicon, TERM_DTYPE
from twostep.errors import (ChecksumError, IndexFormatError, TruncatedFileError,
                            VersionMismatchError)
from twostep.index import DOCID_DTYPE, IMPACT_DTYPE, ForwardIndex, InvertedIndex

FORMAT_VERSION = 1
FORMAT_NAME = "twostep-index"
CHECKSUM_BYTES = 8

BINARY_FILES = ("lexicon.bin", "postings.bin", "blockmax.bin", "forward.bin")


# -- varint ----------------------------------------------------------------

def encode_varints(values) -> bytes:
    """LEB128-style unsigned varints, 7 bits per byte, low groups first."""
    v = np.asarray(values, dtype=np.uint64)
    if v.size == 0:
        return b""
    nbytes = np.ones(v.size, dtype=np.int64)
    for shift in range(7, 64, 7):
        nbytes += v >= np.uint64(1 << shift)
    starts = np.zeros(v.size, dtype=np.int64)
    np.cumsum(nbytes[:-1], out=starts[1:])
    out = np.zeros(int(nbytes.sum()), dtype=np.uint8)
    for j in range(int(nbytes.max())):
        m = nbytes > j
        chunk = (v[m] >> np.uint64(7 * j)) & np.uint64(0x7F)
        cont = (nbytes[m] - 1 > j).astype(np.uint64) << np.uint64(7)
        out[starts[m] + j] = (chunk | cont).astype(np.uint8)
    return out.tobytes()


def decode_varints(data) -> np.ndarray:
    b = np.frombuffer(bytes(data), dtype=np.uint8) if not isinstance(data, np.ndarray) else data
    if b.size == 0:
        return np.zeros(0, dtype=np.uint64)
    if b[-1] & 0x80:
        raise TruncatedFileError("varint stream ends inside a value")
    ends = np.flatnonzero(b < 0x80)
    starts = np.r_[0, ends[:-1] + 1]
    pos = np.arange(b.size) - np.repeat(starts, ends - starts + 1)
    parts = (b & 0x7F).astype(np.uint64) << (np.uint64(7) * pos.astype(np.uint64))
    return np.add.reduceat(parts, starts)


class _Reader:
    """Sequential reader over a file body mixing varints and raw arrays."""

    def __init__(self, body: bytes, name: str):
        self.buf = np.frombuffer(body, dtype=np.uint8)
        self.pos = 0
        self.name = name
        self._terminals = np.flatnonzero(self.buf < 0x80)

    def varints(self, n: int) -> np.ndarray:
        if n == 0:
            return np.zeros(0, dtype=np.uint64)
        i = np.searchsorted(self._terminals, self.pos)
        if i + n > self._terminals.size:
            raise TruncatedFileError(f"{self.name}: unexpected end of data")
        end = int(self._terminals[i + n - 1]) + 1
        out = decode_varints(self.buf[self.pos:end])
        if out.size != n:
            raise IndexFormatError(f"{self.name}: corrupt varint region")
        self.pos = end
        return out

    def varint(self) -> int:
        return int(self.varints(1)[0])

    def raw(self, n: int, dtype) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        end = self.pos + n * itemsize
        if end > self.buf.size:
            raise TruncatedFileError(f"{self.name}: unexpected end of data")
        out = self.buf[self.pos:end].view(dtype).copy()
        self.pos = end
        return out

    def done(self):
        if self.pos != self.buf.size:
            raise IndexFormatError(f"{self.name}: {self.buf.size - self.pos} trailing bytes")


def _deltas(sorted_ids: np.ndarray) -> np.ndarray:
    a = sorted_ids.astype(np.int64)
    return np.diff(a, prepend=0).astype(np.uint64)


def _undelta(d: np.ndarray) -> np.ndarray:
    return np.cumsum(d.astype(np.int64))


# -- files -----------------------------------------------------------------

def _write_bin(path: Path, body: bytes) -> int:
    digest = hashlib.blake2b(body, digest_size=CHECKSUM_BYTES).digest()
    path.write_bytes(body + digest)
    return len(body) + CHECKSUM_BYTES


def _read_bin(path: Path, expected_size: int | None) -> bytes:
    if not path.exists():
        raise IndexFormatError(f"missing index file {path}")
    data = path.read_bytes()
    if expected_size is not None and len(data) < expected_size:
        raise TruncatedFileError(f"{path}: {len(data)} bytes, expected {expected_size}")
    if len(data) < CHECKSUM_BYTES:
        raise TruncatedFileError(f"{path}: shorter than its checksum")
    body, digest = data[:-CHECKSUM_BYTES], data[-CHECKSUM_BYTES:]
    if hashlib.blake2b(body, digest_size=CHECKSUM_BYTES).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch")
    if expected_size is not None and len(data) != expected_size:
        raise IndexFormatError(f"{path}: {len(data)} bytes, expected {expected_size}")
    return body


def _lexicon_bytes(lex: Lexicon) -> bytes:
    encoded = [t.encode("utf-8") for t in lex.terms]
    parts = [encode_varints([len(encoded), lex.base_size])]
    for e in encoded:
        parts.append(encode_varints([len(e)]))
        parts.append(e)
    return b"".join(parts)


def _read_lexicon(body: bytes) -> Lexicon:
    r = _Reader(body, "lexicon.bin")
    n, base = r.varints(2).tolist()
    terms = []
    for _ in range(n):
        length = r.varint()
        terms.append(r.raw(length, np.uint8).tobytes().decode("utf-8"))
    r.done()
    return Lexicon(terms, base_size=base)


def _postings_bytes(idx: InvertedIndex) -> bytes:
    parts = []
    off = idx.term_offsets
    for t in range(idx.vocab_size):
        lo, hi = off[t], off[t + 1]
        parts.append(encode_varints([hi - lo]))
        if hi > lo:
            parts.append(encode_varints(_deltas(idx.docs[lo:hi])))
            parts.append(idx.impacts[lo:hi].tobytes())
    return b"".join(parts)


def _blockmax_bytes(idx: InvertedIndex) -> bytes:
    parts = []
    off = idx.block_offsets
    for t in range(idx.vocab_size):
        lo, hi = off[t], off[t + 1]
        parts.append(encode_varints([hi - lo]))
        if hi > lo:
            parts.append(encode_varints(_deltas(idx.block_last[lo:hi])))
            parts.append(idx.block_max[lo:hi].tobytes())
    return b"".join(parts)


def _forward_bytes(fwd: ForwardIndex) -> bytes:
    parts = [encode_varints([fwd.num_docs])]
    for d in range(fwd.num_docs):
        lo, hi = fwd.indptr[d], fwd.indptr[d + 1]
        parts.append(encode_varints([hi - lo]))
        if hi > lo:
            parts.append(encode_varints(_deltas(fwd.terms[lo:hi])))
            parts.append(fwd.weights[lo:hi].astype("<f8").tobytes())
    return b"".join(parts)


def save_index(idx: InvertedIndex, directory, forward: ForwardIndex | None = None) -> Path:
    """Write ``idx`` (and optionally its forward index) to ``directory``.

    The output is byte-deterministic for a given index.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for did in idx.doc_ids:
        if "\n" in did or "\r" in did:
            raise IndexFormatError(f"document id {did!r} contains a line break")
    sizes = {
        "lexicon.bin": _write_bin(d / "lexicon.bin", _lexicon_bytes(idx.lexicon)),
        "postings.bin": _write_bin(d / "postings.bin", _postings_bytes(idx)),
        "blockmax.bin": _write_bin(d / "blockmax.bin", _blockmax_bytes(idx)),
    }
    if forward is not None:
        if forward.num_docs != idx.num_docs:
            raise IndexFormatError("forward index and inverted index differ in document count")
        sizes["forward.bin"] = _write_bin(d / "forward.bin", _forward_bytes(forward))
    elif (d / "forward.bin").exists():
        (d / "forward.bin").unlink()
    docids = "".join(f"{x}\n" for x in idx.doc_ids).encode("utf-8")
    (d / "docids.txt").write_bytes(docids)
    sizes["docids.txt"] = len(docids)
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "num_docs": idx.num_docs,
        "vocab_size": idx.vocab_size,
        "quant_scale": idx.quant_scale,
        "quant_bits": idx.quant_bits,
        "block_size": idx.block_size,
        "prune": idx.prune,
        "stats": idx.stats,
        "files": sizes,
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return d


def read_meta(directory) -> dict:
    path = Path(directory) / "meta.json"
    if not path.exists():
        raise IndexFormatError(f"{directory} is not an index directory (no meta.json)")
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IndexFormatError(f"{path}: {exc}") from None
    if meta.get("format") != FORMAT_NAME or meta.get("version") != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format {meta.get('format')!r} version {meta.get('version')!r}, "
            f"expected {FORMAT_NAME!r} version {FORMAT_VERSION}")
    return meta


def load_index(directory) -> InvertedIndex:
    d = Path(directory)
    meta = read_meta(d)
    sizes = meta["files"]
    lexicon = _read_lexicon(_read_bin(d / "lexicon.bin", sizes.get("lexicon.bin")))
    vocab = meta["vocab_size"]
    num_docs = meta["num_docs"]

    r = _Reader(_read_bin(d / "postings.bin", sizes.get("postings.bin")), "postings.bin")
    term_offsets = np.zeros(vocab + 1, dtype=np.int64)
    docs, imps = [], []
    for t in range(vocab):
        n = r.varint()
        term_offsets[t + 1] = term_offsets[t] + n
        if n:
            docs.append(_undelta(r.varints(n)))
            imps.append(r.raw(n, IMPACT_DTYPE))
    r.done()

    r = _Reader(_read_bin(d / "blockmax.bin", sizes.get("blockmax.bin")), "blockmax.bin")
    block_offsets = np.zeros(vocab + 1, dtype=np.int64)
    blast, bmax = [], []
    for t in range(vocab):
        n = r.varint()
        block_offsets[t + 1] = block_offsets[t] + n
        if n:
            blast.append(_undelta(r.varints(n)))
            bmax.append(r.raw(n, IMPACT_DTYPE))
    r.done()

    ids_path = d / "docids.txt"
    raw_ids = ids_path.read_bytes() if ids_path.exists() else b""
    if len(raw_ids) != sizes.get("docids.txt", len(raw_ids)):
        raise TruncatedFileError(f"{ids_path}: size does not match meta.json")
    doc_ids = raw_ids.decode("utf-8").split("\n")[:-1] if raw_ids else []
    if len(doc_ids) != num_docs:
        raise IndexFormatError(f"{ids_path}: {len(doc_ids)} ids, expected {num_docs}")

    def cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype)

    all_docs = cat(docs, DOCID_DTYPE)
    if all_docs.size and (all_docs.min() < 0 or all_docs.max() >= num_docs):
        raise IndexFormatError("postings reference docids outside the collection")
    return InvertedIndex(
        lexicon=lexicon, doc_ids=doc_ids, quant_scale=meta["quant_scale"],
        quant_bits=meta["quant_bits"], block_size=meta["block_size"],
        term_offsets=term_offsets, docs=all_docs, impacts=cat(imps, IMPACT_DTYPE),
        block_offsets=block_offsets, block_last=cat(blast, DOCID_DTYPE),
        block_max=cat(bmax, IMPACT_DTYPE), prune=meta.get("prune", "full"),
        stats=meta.get("stats"))


def load_forward(directory) -> ForwardIndex:
    d = Path(directory)
    meta = read_meta(d)
    if "forward.bin" not in meta["files"]:
        raise IndexFormatError(f"{d} has no forward index")
    r = _Reader(_read_bin(d / "forward.bin", meta["files"]["forward.bin"]), "forward.bin")
    n = r.varint()
    indptr = np.zeros(n + 1, dtype=np.int64)
    terms, weights = [], []
    for i in range(n):
        k = r.varint()
        indptr[i + 1] = indptr[i] + k
        if k:
            terms.append(_undelta(r.varints(k)))
            weights.append(r.raw(k, "<f8"))
    r.done()
    ids_path = d / "docids.txt"
    doc_ids = tuple(ids_path.read_text(encoding="utf-8").split("\n")[:-1]) if ids_path.exists() else ()
    return ForwardIndex(
        indptr,
        np.concatenate(terms).astype(TERM_DTYPE) if terms else np.zeros(0, TERM_DTYPE),
        np.concatenate(weights).astype(np.float64) if weights else np.zeros(0, np.float64),
        doc_ids)


@dataclass(frozen=True)
class SizeReport:
    postings: int
    metadata: int
    forward: int
    total: int

    def as_dict(self):
        return {"postings": self.postings, "metadata": self.metadata,
                "forward": self.forward, "total": self.total}


def index_size_report(directory) -> SizeReport:
    """On-disk bytes per section of a saved index directory."""
    d = Path(directory)
    sizes = {p.name: p.stat().st_size for p in d.iterdir() if p.is_file()}
    postings = sizes.get("postings.bin", 0)
    forward = sizes.get("forward.bin", 0)
    metadata = sum(v for k, v in sizes.items() if k not in ("postings.bin", "forward.bin"))
    total = sum(os.path.getsize(p) for p in d.rglob("*") if p.is_file())
    return SizeReport(postings, metadata, forward, total)
