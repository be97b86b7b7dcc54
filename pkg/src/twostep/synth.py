"""Deterministic synthetic corpora with SPLADE-like shape.

Term popularity and weights both follow Zipf laws, so posting lengths and
impact distributions are heavy-tailed the way learned sparse vectors are.
Queries are noisy samples of a target document's strongest terms; the
target is judged relevant (grade 2) and so are documents containing all
of its three strongest terms (grade 1).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from twostep.corpus import (TERM_DTYPE, Collection, Lexicon, Qrels, SparseVector, dump_vectors,
                            write_qrels)


@dataclass(frozen=True)
class SynthConfig:
    num_docs: int = 2000
    num_queries: int = 50
    vocab_size: int = 2000
    doc_terms: int = 60
    query_terms: int = 12
    term_skew: float = 1.1
    weight_skew: float = 2.0
    seed: int = 0


def term_probs(vocab: int, skew: float) -> np.ndarray:
    p = 1.0 / np.arange(1, vocab + 1, dtype=np.float64) ** skew
    return p / p.sum()


def zipf_weights(rng: np.random.Generator, n: int, skew: float = 2.0) -> np.ndarray:
    """Positive weights on a Zipf-distributed level scale.

    Integer levels give plenty of exact ties after quantization; a small
    continuous part keeps unquantized scores from being all-integer.
    """
    levels = np.minimum(rng.zipf(skew, size=n), 50).astype(np.float64)
    return np.round(levels * 0.25 + rng.random(n) * 0.05, 6) + 0.01


def lexicon(vocab: int) -> Lexicon:
    return Lexicon(f"t{i}" for i in range(vocab))


def random_vectors(rng: np.random.Generator, count: int, vocab: int, mean_terms: float,
                   term_skew: float = 1.1, weight_skew: float = 2.0) -> list[SparseVector]:
    """``count`` vectors over term ids ``[0, vocab)``; at least one entry each.

    Terms are drawn with replacement from the Zipf popularity law and
    deduplicated, so sizes are Poisson-ish around ``mean_terms``.
    """
    sizes = np.maximum(1, rng.poisson(mean_terms, size=count))
    owner = np.repeat(np.arange(count, dtype=np.int64), sizes)
    terms = rng.choice(vocab, size=owner.size, p=term_probs(vocab, term_skew))
    keys = np.unique(owner * vocab + terms)
    owner, terms = keys // vocab, (keys % vocab).astype(TERM_DTYPE)
    weights = zipf_weights(rng, terms.size, weight_skew)
    bounds = np.searchsorted(owner, np.arange(count + 1))
    return [SparseVector(terms[bounds[i]:bounds[i + 1]], weights[bounds[i]:bounds[i + 1]], check=False)
            for i in range(count)]


def random_collection(rng: np.random.Generator, num_docs: int, vocab: int, mean_terms: float,
                      **kw) -> Collection:
    vectors = random_vectors(rng, num_docs, vocab, mean_terms, **kw)
    return Collection(tuple(f"d{i}" for i in range(num_docs)), tuple(vectors), lexicon(vocab))


def random_query(rng: np.random.Generator, vocab: int, nnz: int, term_skew: float = 1.1) -> SparseVector:
    """Exactly ``min(nnz, vocab)`` distinct terms, Zipf-popular, with uniform weights in (0.1, 3)."""
    n = min(nnz, vocab)
    terms = np.sort(rng.choice(vocab, size=n, replace=False, p=term_probs(vocab, term_skew)))
    return SparseVector(terms, np.round(0.1 + rng.random(n) * 2.9, 6), check=False)


def generate(cfg: SynthConfig = SynthConfig()) -> tuple[Collection, Collection, Qrels]:
    """Return ``(documents, queries, qrels)``; identical for identical configs."""
    rng = np.random.default_rng(cfg.seed)
    docs = random_collection(rng, cfg.num_docs, cfg.vocab_size, cfg.doc_terms,
                             term_skew=cfg.term_skew, weight_skew=cfg.weight_skew)
    probs = term_probs(cfg.vocab_size, cfg.term_skew)
    sets = [set(v.terms.tolist()) for v in docs.vectors]
    targets = rng.choice(cfg.num_docs, size=cfg.num_queries, replace=cfg.num_queries > cfg.num_docs)
    qvecs, judgments = [], {}
    for i, target in enumerate(targets.tolist()):
        tv = docs.vectors[target]
        strongest = tv.terms[np.lexsort((tv.terms, -tv.weights))].tolist()
        own = strongest[: max(1, cfg.query_terms // 2)]
        noise = rng.choice(cfg.vocab_size, size=max(0, cfg.query_terms - len(own)), replace=False, p=probs)
        q: dict[int, float] = {}
        for t in own + noise.tolist():
            q[t] = q.get(t, 0.0) + float(np.round(0.2 + rng.random() * 2.0, 6))
        qvecs.append(SparseVector.from_mapping(q))
        rel = {f"d{target}": 2}
        core = set(own[:3])
        if len(core) >= 2:
            for d, s in enumerate(sets):
                if d != target and core <= s:
                    rel[f"d{d}"] = 1
        judgments[f"q{i}"] = rel
    queries = Collection(tuple(f"q{i}" for i in range(len(qvecs))), tuple(qvecs), docs.lexicon)
    return docs, queries, Qrels(judgments)


def write_corpus(cfg: SynthConfig, directory) -> dict[str, Path]:
    """Write ``docs.jsonl``, ``queries.jsonl`` and ``qrels.txt`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    docs, queries, qrels = generate(cfg)
    paths = {"docs": d / "docs.jsonl", "queries": d / "queries.jsonl", "qrels": d / "qrels.txt"}
    dump_vectors(docs, paths["docs"])
    dump_vectors(queries, paths["queries"])
    write_qrels(qrels, paths["qrels"])
    return paths
