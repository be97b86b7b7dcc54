import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twostep.corpus import Qrels
from twostep.errors import ParseError, QueryMismatchError
from twostep.evaluation import (Interval, Metric, MetricRow, Run, Verdict, betainc, check_judged,
                                count_significance, format_table, intersection_at, mean_ci,
                                metric_rows, mrr_at, ndcg_at, paired_ttest, per_query, read_run,
                                success_at, write_metrics_csv, write_run)

pytrec_eval = pytest.importorskip("pytrec_eval")
stats = pytest.importorskip("scipy.stats")
special = pytest.importorskip("scipy.special")


def run_of(mapping):
    """Run from ``{qid: [docid, ...]}`` with strictly decreasing scores."""
    return Run({q: [(d, float(len(ds) - i)) for i, d in enumerate(ds)] for q, ds in mapping.items()})


# -- metric examples ---------------------------------------------------------

def test_ndcg_examples():
    qrels = Qrels({"q": {"a": 1, "b": 1}})
    assert ndcg_at(run_of({"q": ["a", "b"]}), qrels) == 1.0
    got = ndcg_at(run_of({"q": ["a", "x", "b"]}), qrels)
    assert got == pytest.approx(1.5 / (1 + 1 / math.log2(3)), abs=1e-12)
    assert got == pytest.approx(0.9197, abs=1e-4)
    assert ndcg_at(Run({"q": []}), qrels) == 0.0


def test_ndcg_no_relevant_is_zero_and_counted():
    qrels = Qrels({"q": {"a": 0}, "r": {"b": 1}})
    pq = per_query(Metric.NDCG, run_of({"q": ["a"], "r": ["b"]}), qrels)
    assert pq.values == {"q": 0.0, "r": 1.0}
    assert pq.no_relevant == ("q",)


def test_mrr_examples():
    qrels = Qrels({"q": {"c": 1}, "r": {"a": 1}, "s": {"b": 2}})
    assert mrr_at(run_of({"q": ["a", "b", "c"]}), qrels) == pytest.approx(1 / 3)
    assert mrr_at(run_of({"q": [f"x{i}" for i in range(10)] + ["c"]}), qrels) == 0.0
    assert mrr_at(run_of({"r": ["a"], "s": ["a", "b"]}), qrels) == 0.75


def test_mrr_excludes_unjudged_queries():
    qrels = Qrels({"q": {"a": 1}})
    run = run_of({"q": ["a"], "zz": ["a"]})
    pq = per_query("mrr", run, qrels)
    assert pq.unjudged == ("zz",) and pq.mean == 1.0
    with pytest.raises(QueryMismatchError) as e:
        check_judged(run, qrels)
    assert "zz" in str(e.value)


def test_success_examples():
    qrels = Qrels({"q": {"e": 1}, "r": {"a": 1}})
    five = ["a", "b", "c", "d", "e"]
    assert success_at(run_of({"q": five}), qrels) == 1.0
    assert success_at(run_of({"q": ["z"] + five}), qrels) == 0.0
    assert success_at(run_of({"q": five, "r": ["a"]}), qrels) == 1.0


def random_pair(rng, n_queries=20, n_docs=40):
    qrels, run = {}, {}
    for qi in range(n_queries):
        qid = f"q{qi}"
        judged = rng.choice(n_docs, size=int(rng.integers(1, 15)), replace=False)
        qrels[qid] = {f"d{d}": int(rng.integers(0, 4)) for d in judged}
        ret = rng.choice(n_docs, size=int(rng.integers(0, 25)), replace=False)
        scores = rng.permutation(len(ret)) + rng.uniform(0, 0.5, len(ret))
        run[qid] = {f"d{d}": float(s) for d, s in zip(ret, scores)}
    return qrels, run


def to_run(run):
    return Run({q: sorted(r.items(), key=lambda x: -x[1]) for q, r in run.items()})


def test_metrics_match_trec_eval():
    rng = np.random.default_rng(7)
    for _ in range(50):
        qrels, run = random_pair(rng)
        ours = to_run(run)
        q = Qrels(qrels)
        ev = pytrec_eval.RelevanceEvaluator(qrels, {"ndcg_cut.10", "success.5"})
        ref = ev.evaluate(run)
        # reciprocal rank at a cutoff: evaluate the run truncated to depth 10
        top10 = {qid: dict(sorted(r.items(), key=lambda x: -x[1])[:10]) for qid, r in run.items()}
        rr = pytrec_eval.RelevanceEvaluator(qrels, {"recip_rank"}).evaluate(top10)
        pq_ndcg = per_query(Metric.NDCG, ours, q, 10).values
        pq_rr = per_query(Metric.MRR, ours, q, 10).values
        pq_s = per_query(Metric.SUCCESS, ours, q, 5).values
        for qid in qrels:
            if qid not in ref:  # trec_eval skips queries with an empty ranking
                assert pq_ndcg[qid] == pq_rr[qid] == pq_s[qid] == 0.0
                continue
            assert pq_ndcg[qid] == pytest.approx(ref[qid]["ndcg_cut_10"], abs=1e-4)
            assert pq_s[qid] == pytest.approx(ref[qid]["success_5"], abs=1e-4)
            assert pq_rr[qid] == pytest.approx(rr[qid]["recip_rank"], abs=1e-4)


@given(st.integers(0, 2**32 - 1))
def test_metric_ranges_and_query_order_invariance(seed):
    rng = np.random.default_rng(seed)
    qrels, run = random_pair(rng, n_queries=8)
    ours, q = to_run(run), Qrels(qrels)
    shuffled = Run(dict(reversed(list(ours.rankings.items()))))
    for fn in (ndcg_at, mrr_at, success_at):
        v = fn(ours, q)
        assert 0.0 <= v <= 1.0 + 1e-12
        assert fn(shuffled, q) == pytest.approx(v, abs=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_ideal_ranking_has_ndcg_one(seed):
    rng = np.random.default_rng(seed)
    qrels, _ = random_pair(rng, n_queries=5)
    ideal = {qid: [d for d, g in sorted(j.items(), key=lambda x: (-x[1], x[0])) if g > 0]
             for qid, j in qrels.items()}
    run = run_of({q: ds for q, ds in ideal.items() if ds})
    assert ndcg_at(run, Qrels(qrels)) == pytest.approx(1.0, abs=1e-12)


# -- intersection ------------------------------------------------------------

def test_intersection_examples():
    ref = run_of({"q": [f"d{i}" for i in range(1, 11)]})
    assert intersection_at(ref, ref).value == 100.0
    nine = run_of({"q": [f"d{i}" for i in range(1, 10)] + [f"x{i}" for i in range(91)]})
    assert intersection_at(ref, nine).value == 90.0
    disjoint = run_of({"q": ["y"]})
    assert intersection_at(ref, disjoint).value == 0.0


def test_intersection_query_mismatch_names_qids():
    with pytest.raises(QueryMismatchError) as e:
        intersection_at(run_of({"a": ["d"]}), run_of({"b": ["d"]}))
    assert "a" in str(e.value) and "b" in str(e.value)


def random_runs(rng, nq=10, pool=60):
    ref, cand = {}, {}
    for i in range(nq):
        ref[f"q{i}"] = [f"d{d}" for d in rng.permutation(pool)[:int(rng.integers(0, 20))]]
        cand[f"q{i}"] = [f"d{d}" for d in rng.permutation(pool)[:int(rng.integers(0, pool))]]
    return run_of(ref), run_of(cand)


@given(st.integers(0, 2**32 - 1))
def test_intersection_monotone_in_depth(seed):
    rng = np.random.default_rng(seed)
    ref, cand = random_runs(rng)
    values = [intersection_at(ref, cand, 10, depth).value for depth in range(0, 70, 3)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert all(0.0 <= v <= 100.0 for v in values)
    iv = intersection_at(ref, cand)
    assert iv.ci_low <= iv.value <= iv.ci_high
    assert intersection_at(ref, ref).value == 100.0


def test_mean_ci_against_normal_approximation():
    vals = [90.0, 100.0, 80.0, 100.0, 70.0]
    mean, lo, hi = mean_ci(vals)
    half = stats.norm.ppf(0.995) * np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert mean == 88.0
    assert (lo, hi) == pytest.approx((88.0 - half, 88.0 + half), abs=1e-9)
    assert mean_ci([]) == (0.0, 0.0, 0.0)
    assert mean_ci([5.0]) == (5.0, 5.0, 5.0)
    assert mean_ci([100.0, 0.0], 0.0, 100.0)[1:] == (0.0, 100.0)


# -- significance ------------------------------------------------------------

def test_betainc_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(500):
        a, b, x = rng.uniform(0.05, 200), rng.uniform(0.05, 200), rng.uniform(0, 1)
        assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-10)
    assert betainc(2, 3, 0.0) == 0.0 and betainc(2, 3, 1.0) == 1.0


def test_ttest_examples():
    a = [0.1, 0.5, 0.7]
    r = paired_ttest(a, a)
    assert r.verdict is Verdict.INDISTINGUISHABLE and r.p_value == 1.0
    r = paired_ttest([2.0] * 4, [1.0] * 4)
    assert r.verdict is Verdict.BETTER and r.p_value < 0.01 and r.t_statistic == math.inf
    assert paired_ttest([1.0] * 4, [2.0] * 4).verdict is Verdict.WORSE
    deltas = [0.3, -0.1, 0.4, 0.2, 0.1]
    r = paired_ttest(deltas, [0.0] * 5)
    ref = stats.ttest_rel(deltas, [0.0] * 5)
    assert r.t_statistic == pytest.approx(ref.statistic, abs=1e-6)
    assert r.p_value == pytest.approx(ref.pvalue, abs=1e-6)


def test_ttest_validation():
    with pytest.raises(ValueError):
        paired_ttest([1.0], [2.0])
    with pytest.raises(ValueError):
        paired_ttest([1.0, 2.0], [2.0])


def test_ttest_matches_scipy_on_random_samples():
    rng = np.random.default_rng(99)
    for _ in range(100):
        n = int(rng.integers(2, 200))
        a = rng.uniform(0, 1, n)
        b = a + rng.normal(rng.uniform(-0.1, 0.1), rng.uniform(0.01, 0.5), n)
        ours = paired_ttest(b, a)
        ref = stats.ttest_rel(b, a)
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-6)
        assert ours.t_statistic == pytest.approx(ref.statistic, rel=1e-9)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=30))
def test_ttest_self_never_significant(values):
    assert paired_ttest(values, values).verdict is Verdict.INDISTINGUISHABLE


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=2, max_size=30))
def test_verdict_requires_p_and_sign(pairs):
    a, b = zip(*pairs)
    r = paired_ttest(a, b)
    if r.verdict is Verdict.BETTER:
        assert r.p_value <= 0.01 and r.mean_delta > 0
    elif r.verdict is Verdict.WORSE:
        assert r.p_value <= 0.01 and r.mean_delta < 0
    assert 0.0 <= r.p_value <= 1.0


def test_count_significance_triple():
    better = paired_ttest([2.0] * 3, [1.0] * 3)
    worse = paired_ttest([1.0] * 3, [2.0] * 3)
    same = paired_ttest([1.0] * 3, [1.0] * 3)
    c = count_significance({"a": better, "b": worse, "c": same, "d": same})
    assert (c.at_least, c.better, c.worse, c.total) == (3, 1, 1, 4)
    assert c.triple() == "3/1/1"


# -- run files and reports ---------------------------------------------------

def test_run_round_trip(tmp_path):
    run = Run({"q1": [("d3", 0.1 + 0.2), ("d1", 1 / 3)], "q2": []}, tag="sys")
    p = tmp_path / "run.trec"
    write_run(run, p)
    assert p.read_text().splitlines()[0] == f"q1 Q0 d3 1 {0.1 + 0.2!r} sys"
    back = read_run(p)
    assert back.rankings == {"q1": run["q1"]} and back.tag == "sys"


def test_read_run_orders_by_rank(tmp_path):
    p = tmp_path / "run.trec"
    p.write_text("q Q0 b 2 1.0 t\nq Q0 a 1 2.0 t\n")
    assert read_run(p).docids("q") == ["a", "b"]


@pytest.mark.parametrize("text", ["q Q0 a 1 1.0\n", "q Q0 a one 1.0 t\n",
                                  "q Q0 a 1 1.0 t\nq Q0 a 2 0.5 t\n"])
def test_read_run_errors(tmp_path, text):
    p = tmp_path / "bad.trec"
    p.write_text(text)
    with pytest.raises(ParseError):
        read_run(p)


def test_metric_rows_and_csv(tmp_path):
    qrels = Qrels({"q": {"a": 1}, "r": {"b": 1}})
    rows, details = metric_rows(run_of({"q": ["a"], "r": ["x", "b"]}), qrels, "synth")
    assert [r.metric for r in rows] == ["ndcg@10", "mrr@10", "success@5"]
    assert rows[1].value == 0.75 and details[Metric.MRR].values == {"q": 1.0, "r": 0.5}
    p = tmp_path / "m.csv"
    write_metrics_csv(rows, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "metric,dataset,value,ci_low,ci_high"
    assert lines[2].startswith("mrr@10,synth,0.750000,")
    assert "mrr@10" in format_table(rows)
    assert isinstance(rows[0], MetricRow)
    assert Interval(1.0, 0.0, 2.0) == Interval(1.0, 0.0, 2.0, {"q": 1.0})
