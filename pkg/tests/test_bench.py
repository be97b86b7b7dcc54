import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twostep.bench import (CSV_HEADER, BenchConfig, LatencyReport, format_table, percentile_rank,
                           run_bench, sweep, throughput, write_sweep_csv)
from twostep.errors import TwoStepError
from twostep.index import build_inverted
from twostep.pruning import PruneConfig, Strategy, prune_collection
from twostep.retrieval import Algorithm, SearchParams, search
from twostep.scoring import INFINITY, Saturated, format_k1
from twostep.synth import random_collection, random_query


@pytest.fixture(scope="module")
def setting():
    rng = np.random.default_rng(0)
    c = random_collection(rng, 400, 200, 20)
    idx = build_inverted(c)
    queries = [random_query(rng, 200, 8) for _ in range(15)]
    return c, idx, queries


def test_percentile_rank():
    vals = list(range(1, 101))
    assert percentile_rank(vals, 0.99) == 99
    assert percentile_rank(vals, 0.5) == 50
    assert percentile_rank([7.0], 0.99) == 7.0
    assert percentile_rank(list(range(1, 201)), 0.99) == 198
    with pytest.raises(ValueError):
        percentile_rank([], 0.5)


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=300))
def test_report_order_invariants(samples):
    r = LatencyReport("x", samples, 0, 0)
    assert r.p99_ms >= r.median_ms >= r.min_ms
    assert r.normalized(r) == 1.0 or r.avg_ms == 0


def test_identical_cost_p99_equals_avg():
    r = LatencyReport("x", [2.5] * 100, 0, 0)
    assert r.p99_ms == r.avg_ms == 2.5


def test_zero_queries_is_error():
    with pytest.raises(TwoStepError):
        run_bench(lambda q: None, [])
    with pytest.raises(TwoStepError):
        throughput(lambda q: None, [], 2)


def test_bench_results_equal_plain_results(setting):
    _, idx, queries = setting
    p = SearchParams(k=10, algorithm=Algorithm.BMW, scorer=Saturated(100))
    rep = run_bench(lambda q: search(q, idx, p), queries, warmup=1, repetitions=3)
    plain = [search(q, idx, p) for q in queries]
    assert rep.results == plain
    assert rep.postings_touched == sum(r.postings_touched for r in plain)
    assert rep.docs_fully_scored == sum(r.docs_fully_scored for r in plain)
    assert len(rep.samples_ms) == len(queries) and all(s >= 0 for s in rep.samples_ms)


def test_bmw_scores_no_more_docs_than_exhaustive(setting):
    _, idx, queries = setting
    for q in queries:
        ex = search(q, idx, SearchParams(k=10, algorithm=Algorithm.EXHAUSTIVE))
        bmw = search(q, idx, SearchParams(k=10, algorithm=Algorithm.BMW))
        assert bmw == ex and bmw.docs_fully_scored <= ex.docs_fully_scored


def test_work_monotone_in_prune_size(setting):
    c, idx, queries = setting
    touched = []
    for k in (4, 8, 16, 32, 64):
        pruned = build_inverted(prune_collection(c, PruneConfig(Strategy.DOC_TOPK, size_k=k)),
                                quant_scale=idx.quant_scale)
        touched.append(sum(search(q, pruned, SearchParams(k=10, algorithm=Algorithm.EXHAUSTIVE)).postings_touched
                           for q in queries))
    touched.append(sum(search(q, idx, SearchParams(k=10, algorithm=Algorithm.EXHAUSTIVE)).postings_touched
                       for q in queries))
    assert touched == sorted(touched)


def configs_for(idx, k1s):
    return [BenchConfig(f"sat-{format_k1(k1)}",
                        lambda q, k1=k1: search(q, idx, SearchParams(k=10, scorer=Saturated(k1))),
                        "bmw", format_k1(k1), "full", "full") for k1 in k1s]


def test_k1_sweep_rows_and_baseline(setting, tmp_path):
    _, idx, queries = setting
    rows = sweep(configs_for(idx, [10, 100, 400, INFINITY]), queries, warmup=0, repetitions=1)
    assert len(rows) == 4
    assert rows[0].norm_vs_baseline == 1.0
    rows = sweep(configs_for(idx, [10, 100]), queries, baseline="sat-100", warmup=0, repetitions=1)
    assert rows[1].norm_vs_baseline == 1.0
    p = tmp_path / "b.csv"
    write_sweep_csv(rows, p)
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 3
    assert "sat-10" in format_table(rows)
    with pytest.raises(ValueError):
        sweep(configs_for(idx, [10]), queries, baseline="nope", warmup=0, repetitions=1)


def test_stable_csv_blanks_timing(setting, tmp_path):
    _, idx, queries = setting
    paths = []
    for i in range(2):
        rows = sweep(configs_for(idx, [10, INFINITY]), queries, warmup=0, repetitions=1)
        paths.append(tmp_path / f"s{i}.csv")
        write_sweep_csv(rows, paths[-1], timing=False)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    row = paths[0].read_text().splitlines()[1].split(",")
    assert row[CSV_HEADER.index("avg_ms")] == "" and row[CSV_HEADER.index("postings_touched")] != ""


def test_empty_sweep_writes_header(tmp_path):
    assert sweep([], []) == []
    p = tmp_path / "e.csv"
    write_sweep_csv([], p)
    assert p.read_text() == ",".join(CSV_HEADER) + "\n"


def test_throughput_positive(setting):
    _, idx, queries = setting
    qps = throughput(lambda q: search(q, idx, SearchParams(k=10)), queries, 2)
    assert qps > 0 and math.isfinite(qps)
