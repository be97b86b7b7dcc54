"""Compare the compiled and pure-Python search kernels.

Runs every algorithm x scorer combination on a synthetic corpus with each
available backend, checks that both return identical hits and counters, and
prints per-query latency and the speed-up of the compiled kernels.

    python benchmarks/bench_backends.py --docs 20000 --queries 50
    python benchmarks/bench_backends.py --csv backends.csv
"""
from __future__ import annotations

import argparse
import csv
import sys

from twostep import _backend
from twostep.bench import run_bench
from twostep.index import build_forward, build_inverted
from twostep.pipeline import TwoStepConfig, two_step_search
from twostep.pruning import PruneConfig, Strategy, prune_collection
from twostep.retrieval import Algorithm, SearchParams, search
from twostep.scoring import Bm25, Dot, Saturated
from twostep.synth import SynthConfig, generate


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--docs", type=int, default=10_000)
    p.add_argument("--queries", type=int, default=30)
    p.add_argument("--vocab", type=int, default=5000)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None, help="also write the table as CSV")
    a = p.parse_args(argv)

    backends = sorted(_backend.AVAILABLE)
    if "cython" not in backends:
        print("compiled kernels are not built; only the python backend is available", file=sys.stderr)

    docs, queries, _ = generate(SynthConfig(num_docs=a.docs, num_queries=a.queries,
                                            vocab_size=a.vocab, seed=a.seed))
    idx = build_inverted(docs)
    approx = build_inverted(prune_collection(docs, PruneConfig(Strategy.DOC_TOPK, size_k=16)),
                            quant_scale=idx.quant_scale)
    fwd = build_forward(docs)
    qs = list(queries.vectors)
    print(f"corpus: {a.docs} docs, {idx.num_postings} postings, {len(qs)} queries; backends: {backends}")

    cases = []
    for scorer in (Dot(), Saturated(100), Bm25()):
        for algo in Algorithm:
            params = SearchParams(k=a.k, algorithm=algo, scorer=scorer)
            cases.append((f"search {scorer!r}", algo.value,
                          lambda be, params=params: (lambda q: search(q, idx, params, be))))
    for algo in (Algorithm.MAXSCORE, Algorithm.BMW):
        def make(be, algo=algo):
            cfg = TwoStepConfig(approx, fwd, k=a.k, candidates=100, query_prune_k=5,
                                algorithm=algo, backend=be)
            return lambda q: two_step_search(q, cfg)
        cases.append(("two-step top16", algo.value, make))

    rows = []
    head = f"{'case':<26} {'algo':<11}" + "".join(f" {b + ' ms':>11}" for b in backends) + f" {'speed-up':>9}"
    print(head)
    print("-" * len(head))
    for name, algo, make in cases:
        reports = {b: run_bench(make(b), qs, a.warmup, a.repetitions, name) for b in backends}
        results = [r.results for r in reports.values()]
        same = all(x == results[0] for x in results)
        counters = {(r.postings_touched, r.docs_fully_scored) for r in reports.values()}
        if not same or len(counters) != 1:
            print(f"MISMATCH between backends for {name} {algo}", file=sys.stderr)
            return 1
        avg = {b: r.avg_ms for b, r in reports.items()}
        speedup = avg["python"] / avg["cython"] if len(backends) > 1 and avg["cython"] > 0 else float("nan")
        print(f"{name:<26} {algo:<11}" + "".join(f" {avg[b]:>11.3f}" for b in backends) + f" {speedup:>8.1f}x")
        rows.append({"case": name, "algorithm": algo, **{f"{b}_ms": f"{avg[b]:.4f}" for b in backends},
                     "speedup": f"{speedup:.2f}"})
    if a.csv:
        with open(a.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
