"""Effectiveness metrics, approximation intersection and paired significance tests.

Runs are ``{qid: [(docid, score), ...]}`` in rank order. Metric functions
evaluate the queries that appear in both the run and the qrels; judged
queries with an empty ranking score 0, run queries without judgments are
excluded and reported.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Iterable, Mapping, Sequence

from twostep.corpus import Qrels
from twostep.errors import ParseError, QueryMismatchError

Ranking = list[tuple[str, float]]
CSV_HEADER = ("metric", "dataset", "value", "ci_low", "ci_high")


@dataclass
class Run:
    rankings: dict[str, Ranking] = field(default_factory=dict)
    tag: str = "twostep"

    def __getitem__(self, qid) -> Ranking:
        return self.rankings[qid]

    def __contains__(self, qid):
        return qid in self.rankings

    def __len__(self):
        return len(self.rankings)

    def query_ids(self):
        return self.rankings.keys()

    def docids(self, qid, depth: int | None = None) -> list[str]:
        r = self.rankings.get(qid, [])
        return [d for d, _ in (r if depth is None else r[:depth])]


def format_score(score: float) -> str:
    # 17 significant digits round-trip any double, so run files preserve exact ties
    return repr(float(score))


def write_run(run: Run, path) -> None:
    """TREC run format: ``qid Q0 docid rank score tag``."""
    with open(path, "w", encoding="utf-8") as fh:
        for qid, ranking in run.rankings.items():
            for rank, (docid, score) in enumerate(ranking, 1):
                fh.write(f"{qid} Q0 {docid} {rank} {format_score(score)} {run.tag}\n")


def read_run(path) -> Run:
    path = Path(path)
    rows: dict[str, list[tuple[int, str, float]]] = {}
    tag = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ParseError(path, lineno, f"expected 6 fields, got {len(parts)}")
            qid, _, docid, rank, score, tag = parts
            try:
                r, s = int(rank), float(score)
            except ValueError:
                raise ParseError(path, lineno, "rank must be an integer and score a number") from None
            rows.setdefault(qid, []).append((r, docid, s))
    run = Run(tag=tag or "twostep")
    for qid, entries in rows.items():
        entries.sort(key=lambda e: (e[0], -e[2], e[1]))
        seen = set()
        for _, docid, _ in entries:
            if docid in seen:
                raise ParseError(path, 0, f"query {qid}: document {docid} listed twice")
            seen.add(docid)
        run.rankings[qid] = [(d, s) for _, d, s in entries]
    return run


# -- effectiveness ------------------------------------------------------------

def _dcg(gains: Iterable[float]) -> float:
    s = 0.0
    for i, g in enumerate(gains):
        s += g / math.log2(i + 2)
    return s


def ndcg_query(ranking: Sequence[str], judged: Mapping[str, int], cutoff: int = 10) -> float:
    """Linear-gain nDCG; 0.0 when nothing is relevant."""
    ideal = _dcg(sorted((g for g in judged.values() if g > 0), reverse=True)[:cutoff])
    if ideal == 0.0:
        return 0.0
    return _dcg(judged.get(d, 0) for d in ranking[:cutoff]) / ideal


def rr_query(ranking: Sequence[str], judged: Mapping[str, int], cutoff: int = 10) -> float:
    for i, d in enumerate(ranking[:cutoff]):
        if judged.get(d, 0) >= 1:
            return 1.0 / (i + 1)
    return 0.0


def success_query(ranking: Sequence[str], judged: Mapping[str, int], cutoff: int = 5) -> float:
    return 1.0 if any(judged.get(d, 0) >= 1 for d in ranking[:cutoff]) else 0.0


class Metric(enum.Enum):
    NDCG = "ndcg"
    MRR = "mrr"
    SUCCESS = "success"


_QUERY_FNS = {Metric.NDCG: ndcg_query, Metric.MRR: rr_query, Metric.SUCCESS: success_query}
DEFAULT_CUTOFFS = {Metric.NDCG: 10, Metric.MRR: 10, Metric.SUCCESS: 5}


@dataclass(frozen=True)
class PerQuery:
    values: dict[str, float]
    unjudged: tuple[str, ...] = ()
    no_relevant: tuple[str, ...] = ()

    @property
    def mean(self) -> float:
        return sum(self.values.values()) / len(self.values) if self.values else 0.0


def per_query(metric: Metric | str, run: Run, qrels: Qrels, cutoff: int | None = None) -> PerQuery:
    m = Metric(metric)
    fn = _QUERY_FNS[m]
    cut = DEFAULT_CUTOFFS[m] if cutoff is None else cutoff
    values, unjudged, empty = {}, [], []
    for qid in run.query_ids():
        judged = qrels.get(qid)
        if judged is None:
            unjudged.append(qid)
            continue
        if not any(g > 0 for g in judged.values()):
            empty.append(qid)
        values[qid] = fn(run.docids(qid), judged, cut)
    return PerQuery(values, tuple(unjudged), tuple(empty))


def ndcg_at(run: Run, qrels: Qrels, cutoff: int = 10) -> float:
    return per_query(Metric.NDCG, run, qrels, cutoff).mean


def mrr_at(run: Run, qrels: Qrels, cutoff: int = 10) -> float:
    return per_query(Metric.MRR, run, qrels, cutoff).mean


def success_at(run: Run, qrels: Qrels, cutoff: int = 5) -> float:
    return per_query(Metric.SUCCESS, run, qrels, cutoff).mean


def check_judged(run: Run, qrels: Qrels) -> None:
    """Raise if the run contains queries the qrels do not judge."""
    missing = [q for q in run.query_ids() if q not in qrels]
    if missing:
        raise QueryMismatchError("run queries without relevance judgments", missing)


# -- intersection ---------------------------------------------------------------

Z99 = NormalDist().inv_cdf(0.995)


@dataclass(frozen=True)
class Interval:
    value: float
    ci_low: float
    ci_high: float
    per_query: dict[str, float] = field(default_factory=dict, compare=False)


def mean_ci(values: Sequence[float], lo: float = -math.inf, hi: float = math.inf) -> tuple[float, float, float]:
    """Mean and .99 normal-approximation confidence interval (clipped to ``[lo, hi]``)."""
    n = len(values)
    if n == 0:
        return 0.0, 0.0, 0.0
    mean = math.fsum(values) / n
    if n < 2:
        return mean, mean, mean
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    half = Z99 * math.sqrt(var / n)
    return mean, max(lo, mean - half), min(hi, mean + half)


def intersection_query(reference: Sequence[str], candidate: Sequence[str],
                       ref_depth: int = 10, cand_depth: int = 100) -> float:
    ref = reference[:ref_depth]
    if not ref:
        return 100.0
    cand = set(candidate[:cand_depth])
    return 100.0 * sum(1 for d in ref if d in cand) / len(ref)


def intersection_at(reference: Run, candidate: Run, ref_depth: int = 10,
                    cand_depth: int = 100) -> Interval:
    """Share (in %) of each query's reference top-``ref_depth`` found in the candidate top-``cand_depth``."""
    ref_q, cand_q = set(reference.query_ids()), set(candidate.query_ids())
    if ref_q != cand_q:
        raise QueryMismatchError("runs cover different queries", ref_q ^ cand_q)
    per = {q: intersection_query(reference.docids(q), candidate.docids(q), ref_depth, cand_depth)
           for q in sorted(ref_q)}
    mean, lo, hi = mean_ci(list(per.values()), 0.0, 100.0)
    return Interval(mean, lo, hi, per)


# -- significance -------------------------------------------------------------

def _betacf(a: float, b: float, x: float, eps: float = 1e-15, max_iter: int = 10_000) -> float:
    """Continued fraction of the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x in (0.0, 1.0):
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, dof: float) -> float:
    if math.isinf(t):
        return 0.0
    return betainc(dof / 2.0, 0.5, dof / (dof + t * t))


class Verdict(enum.Enum):
    BETTER = "better"
    WORSE = "worse"
    INDISTINGUISHABLE = "indistinguishable"


@dataclass(frozen=True)
class TTest:
    mean_delta: float
    t_statistic: float
    p_value: float
    verdict: Verdict
    n: int


def paired_ttest(system: Sequence[float], baseline: Sequence[float], alpha: float = 0.01) -> TTest:
    """Two-sided paired t-test on ``system - baseline``.

    Zero variance: identical vectors are indistinguishable (t=0, p=1); a
    constant nonzero delta gives t=±inf and p=0, so the verdict follows
    the sign of the delta.
    """
    if len(system) != len(baseline):
        raise ValueError("paired samples differ in length")
    n = len(system)
    if n < 2:
        raise ValueError("a paired t-test needs at least 2 pairs")
    deltas = [float(a) - float(b) for a, b in zip(system, baseline)]
    mean = math.fsum(deltas) / n
    var = math.fsum((d - mean) ** 2 for d in deltas) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return TTest(0.0, 0.0, 1.0, Verdict.INDISTINGUISHABLE, n)
        t = math.copysign(math.inf, mean)
    else:
        t = mean / math.sqrt(var / n)
    p = t_two_sided_p(t, n - 1)
    if p <= alpha and mean > 0:
        verdict = Verdict.BETTER
    elif p <= alpha and mean < 0:
        verdict = Verdict.WORSE
    else:
        verdict = Verdict.INDISTINGUISHABLE
    return TTest(mean, t, p, verdict, n)


@dataclass(frozen=True)
class SignificanceCount:
    """Datasets where the system is not significantly worse / significantly better / significantly worse."""

    at_least: int
    better: int
    worse: int
    total: int

    def triple(self) -> str:
        return f"{self.at_least}/{self.better}/{self.worse}"


def count_significance(reports: Mapping[str, TTest]) -> SignificanceCount:
    better = sum(1 for r in reports.values() if r.verdict is Verdict.BETTER)
    worse = sum(1 for r in reports.values() if r.verdict is Verdict.WORSE)
    return SignificanceCount(len(reports) - worse, better, worse, len(reports))


# -- reporting ----------------------------------------------------------------

@dataclass(frozen=True)
class MetricRow:
    metric: str
    dataset: str
    value: float
    ci_low: float
    ci_high: float


def metric_rows(run: Run, qrels: Qrels, dataset: str) -> tuple[list[MetricRow], dict[Metric, PerQuery]]:
    rows, details = [], {}
    for m in Metric:
        cut = DEFAULT_CUTOFFS[m]
        pq = per_query(m, run, qrels, cut)
        mean, lo, hi = mean_ci(list(pq.values.values()), 0.0, 1.0)
        rows.append(MetricRow(f"{m.value}@{cut}", dataset, mean, lo, hi))
        details[m] = pq
    return rows, details


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_metrics_csv(rows: Iterable[MetricRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r.metric, r.dataset, _fmt(r.value), _fmt(r.ci_low), _fmt(r.ci_high)])


def format_table(rows: Sequence[MetricRow]) -> str:
    head = f"{'metric':<14} {'dataset':<16} {'value':>10} {'ci_low':>10} {'ci_high':>10}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.metric:<14} {r.dataset:<16} {r.value:>10.4f} {r.ci_low:>10.4f} {r.ci_high:>10.4f}")
    return "\n".join(lines)
