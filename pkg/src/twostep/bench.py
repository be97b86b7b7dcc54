"""Latency and work measurement.

Wall times are reported, never asserted: only the deterministic work
counters (postings touched, documents fully scored) are comparable
across machines.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from twostep.corpus import SparseVector
from twostep.errors import TwoStepError
from twostep.retrieval import ScoredList

SearchFn = Callable[[SparseVector], ScoredList]

CSV_HEADER = ("config", "algorithm", "k1", "doc_prune", "query_prune", "avg_ms", "p99_ms",
              "postings_touched", "docs_fully_scored", "norm_vs_baseline")
TIMING_COLUMNS = ("avg_ms", "p99_ms", "norm_vs_baseline")


def percentile_rank(values: Sequence[float], q: float) -> float:
    """The ``ceil(q*n)``-th smallest value (nearest-rank percentile)."""
    if not values:
        raise ValueError("no values")
    s = sorted(values)
    return s[max(1, math.ceil(q * len(s))) - 1]


@dataclass
class LatencyReport:
    config: str
    samples_ms: list[float]
    postings_touched: int
    docs_fully_scored: int
    results: list[ScoredList] = field(default_factory=list, repr=False)

    @property
    def avg_ms(self) -> float:
        return math.fsum(self.samples_ms) / len(self.samples_ms)

    @property
    def p99_ms(self) -> float:
        return percentile_rank(self.samples_ms, 0.99)

    @property
    def median_ms(self) -> float:
        return percentile_rank(self.samples_ms, 0.5)

    @property
    def min_ms(self) -> float:
        return min(self.samples_ms)

    def normalized(self, baseline: LatencyReport) -> float:
        return self.avg_ms / baseline.avg_ms if baseline.avg_ms > 0 else math.nan


def run_bench(search_fn: SearchFn, queries: Sequence[SparseVector], warmup: int = 2,
              repetitions: int = 5, config: str = "run") -> LatencyReport:
    """Time every query ``repetitions`` times after ``warmup`` untimed passes.

    Each query's sample is the mean of its repetitions; work counters come
    from the first timed pass (they are identical on every pass).
    """
    if not queries:
        raise TwoStepError("benchmark needs at least one query")
    if repetitions < 1 or warmup < 0:
        raise ValueError("repetitions must be >= 1 and warmup >= 0")
    for _ in range(warmup):
        for q in queries:
            search_fn(q)
    totals = [0] * len(queries)
    results: list[ScoredList] = []
    clock = time.perf_counter_ns
    for rep in range(repetitions):
        for i, q in enumerate(queries):
            t0 = clock()
            r = search_fn(q)
            totals[i] += clock() - t0
            if rep == 0:
                results.append(r)
    samples = [t / repetitions / 1e6 for t in totals]
    return LatencyReport(config, samples, sum(r.postings_touched for r in results),
                         sum(r.docs_fully_scored for r in results), results)


def throughput(search_fn: SearchFn, queries: Sequence[SparseVector], threads: int) -> float:
    """Queries per second with ``threads`` concurrent clients (not a latency measure)."""
    if not queries:
        raise TwoStepError("benchmark needs at least one query")
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        list(pool.map(search_fn, queries))
    return len(queries) / (time.perf_counter() - t0)


@dataclass(frozen=True)
class BenchConfig:
    name: str
    search_fn: SearchFn = field(compare=False)
    algorithm: str = ""
    k1: str = ""
    doc_prune: str = ""
    query_prune: str = ""


@dataclass(frozen=True)
class SweepRow:
    config: BenchConfig
    report: LatencyReport
    norm_vs_baseline: float

    def as_dict(self, timing: bool = True) -> dict[str, str]:
        c, r = self.config, self.report
        row = {
            "config": c.name, "algorithm": c.algorithm, "k1": c.k1, "doc_prune": c.doc_prune,
            "query_prune": c.query_prune, "avg_ms": f"{r.avg_ms:.4f}", "p99_ms": f"{r.p99_ms:.4f}",
            "postings_touched": str(r.postings_touched),
            "docs_fully_scored": str(r.docs_fully_scored),
            "norm_vs_baseline": f"{self.norm_vs_baseline:.4f}",
        }
        if not timing:
            for col in TIMING_COLUMNS:
                row[col] = ""
        return row


def sweep(configs: Iterable[BenchConfig], queries: Sequence[SparseVector], baseline: str | None = None,
          warmup: int = 2, repetitions: int = 5) -> list[SweepRow]:
    """Benchmark every config; latencies are normalized by ``baseline`` (default: the first)."""
    configs = list(configs)
    if not configs:
        return []
    reports = [run_bench(c.search_fn, queries, warmup, repetitions, c.name) for c in configs]
    names = [c.name for c in configs]
    if baseline is not None and baseline not in names:
        raise ValueError(f"baseline {baseline!r} is not one of the configs")
    base = reports[names.index(baseline) if baseline is not None else 0]
    return [SweepRow(c, r, r.normalized(base)) for c, r in zip(configs, reports)]


def write_sweep_csv(rows: Iterable[SweepRow], path, timing: bool = True) -> None:
    """Tidy CSV; with ``timing=False`` the wall-clock columns are left blank (byte-stable output)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_HEADER, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.as_dict(timing))


def format_table(rows: Sequence[SweepRow]) -> str:
    head = (f"{'config':<28} {'algo':<10} {'avg_ms':>9} {'p99_ms':>9} {'median':>9} "
            f"{'touched':>11} {'scored':>9} {'norm':>7}")
    lines = [head, "-" * len(head)]
    for s in rows:
        r = s.report
        lines.append(f"{s.config.name:<28} {s.config.algorithm:<10} {r.avg_ms:>9.3f} {r.p99_ms:>9.3f} "
                     f"{r.median_ms:>9.3f} {r.postings_touched:>11} {r.docs_fully_scored:>9} "
                     f"{s.norm_vs_baseline:>7.3f}")
    return "\n".join(lines)
