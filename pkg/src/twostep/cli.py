"""``twostep`` command line.

Settings are layered: built-in defaults < ``--config`` file (``key = value``
lines, keys named like the long flags) < ``TWOSTEP_<FLAG>`` environment
variables < command-line flags.

Exit status: 0 success, 1 internal error, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from twostep import __version__, _backend
from twostep.bench import (BenchConfig, format_table as bench_table, sweep, throughput,
                           write_sweep_csv)
from twostep.corpus import (Collection, compute_stats, dump_vectors, load_qrels,
                            load_vectors)
from twostep.errors import QueryMismatchError, TwoStepError
from twostep.evaluation import (CSV_HEADER as METRIC_HEADER, Metric, MetricRow, Run,
                                check_judged, format_table, intersection_at, metric_rows,
                                paired_ttest, read_run, write_metrics_csv, write_run)
from twostep.index import build_forward, build_inverted
from twostep.pipeline import TwoStepConfig, gt_search, two_step_search
from twostep.pruning import (DOC_CAP, QUERY_CAP, PruneConfig, Strategy, lexical_size,
                             prune_collection, prune_vector_topk)
from twostep.retrieval import Algorithm, SearchParams, search
from twostep.scoring import Bm25, Dot, format_k1, parse_k1, parse_scorer
from twostep.storage import index_size_report, load_forward, load_index, save_index
from twostep.synth import SynthConfig, write_corpus

log = logging.getLogger("twostep")

ENV_PREFIX = "TWOSTEP_"
ALGORITHMS = [a.value for a in Algorithm]


class UsageError(TwoStepError):
    """Bad arguments or missing inputs (exit status 2)."""


# -- argument parsing -----------------------------------------------------------

class _Formatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    pass


def _positive_int(text) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _size_or(*words):
    def parse(text):
        t = str(text).strip().lower()
        if t in words:
            return t
        return _positive_int(t)
    parse.__name__ = "size"
    return parse


def _k1_list(text) -> list[float]:
    return [parse_k1(x) for x in str(text).split(",") if x.strip()]


def _algo_list(text) -> list[Algorithm]:
    return [Algorithm.parse(x) for x in str(text).split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", default=None,
                   help="key = value settings file (overridden by env vars and flags)")
    p.add_argument("--backend", choices=sorted(_backend.AVAILABLE), default=_backend.BACKEND,
                   help="search kernels")
    p.add_argument("--log-level", default="warning",
                   choices=["debug", "info", "warning", "error"], help="logging verbosity")


def _add_search_opts(p, *, threads_default=1):
    p.add_argument("--k", type=_positive_int, default=100, help="hits returned per query")
    p.add_argument("--algorithm", type=Algorithm.parse, default=Algorithm.BMW,
                   help=f"query processing algorithm ({', '.join(ALGORITHMS)})")
    p.add_argument("--threads", type=_positive_int, default=threads_default,
                   help="queries evaluated concurrently")
    p.add_argument("--tag", default="twostep", help="run tag written in the last column")
    p.add_argument("--out", required=True, metavar="FILE", help="TREC run file to write")


def _add_pipeline_opts(p, *, query_k_default="lexical"):
    p.add_argument("--queries", required=True, metavar="FILE", help="query vectors (JSON lines)")
    p.add_argument("--approx-index", required=True, metavar="DIR", help="pruned first-stage index")
    p.add_argument("--rescore-index", required=True, metavar="DIR",
                   help="full index with forward vectors (from 'index')")
    p.add_argument("--candidates", type=_positive_int, default=100,
                   help="first-stage hits passed to rescoring")
    p.add_argument("--query-k", type=_size_or("lexical", "full"), default=query_k_default,
                   help="first-stage query size: N, 'lexical' (average query size, "
                        f"max {QUERY_CAP}) or 'full'")
    p.add_argument("--rescore", choices=["forward", "inverted"], default="forward",
                   help="exact forward vectors or quantized full inverted index")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twostep", formatter_class=_Formatter,
        description="Two-step learned sparse retrieval: pruned saturated approximate search, "
                    "then exact rescoring of the candidates.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=_Formatter)
        _add_common(p)
        return p

    p = command("synth", "write a deterministic synthetic corpus, queries and qrels")
    d = SynthConfig()
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--docs", type=_positive_int, default=d.num_docs, help="number of documents")
    p.add_argument("--queries", type=_positive_int, default=d.num_queries, help="number of queries")
    p.add_argument("--vocab", type=_positive_int, default=d.vocab_size, help="vocabulary size")
    p.add_argument("--doc-terms", type=_positive_int, default=d.doc_terms,
                   help="mean nonzeros per document")
    p.add_argument("--query-terms", type=_positive_int, default=d.query_terms,
                   help="nonzeros per query")
    p.add_argument("--seed", type=int, default=d.seed, help="random seed")

    p = command("index", "build the pruned (approximate) and full (rescoring) indexes in one pass")
    p.add_argument("--docs", required=True, metavar="FILE", help="document vectors (JSON lines)")
    p.add_argument("--queries", metavar="FILE", default=None,
                   help="query vectors, only to report the average query size")
    p.add_argument("--approx-out", required=True, metavar="DIR", help="pruned index directory")
    p.add_argument("--full-out", required=True, metavar="DIR",
                   help="full index directory (with forward vectors)")
    p.add_argument("--doc-prune", default="lexical",
                   help="'lexical' (average document size), N (top-N per document), 'full', "
                        "'quantile:Q' or 'threshold:W'")
    p.add_argument("--doc-cap", type=_positive_int, default=DOC_CAP,
                   help="upper limit for document top-N pruning")
    p.add_argument("--block-size", type=_positive_int, default=64, help="postings per block")
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                   help="worker threads (index construction itself is vectorized, single-threaded)")

    p = command("prune", "statically prune a vector file")
    p.add_argument("--input", required=True, metavar="FILE", help="vectors to prune")
    p.add_argument("--out", required=True, metavar="FILE", help="pruned vectors")
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="doc-topk",
                   help="pruning strategy")
    p.add_argument("--size", type=_size_or("lexical"), default="lexical",
                   help="entries kept per vector for top-k strategies (N or 'lexical')")
    p.add_argument("--quantile", type=float, default=1.0, help="share of each posting list kept")
    p.add_argument("--threshold", type=float, default=0.0, help="minimum weight kept")
    p.add_argument("--doc-cap", type=_positive_int, default=DOC_CAP, help="cap for doc-topk")
    p.add_argument("--query-cap", type=_positive_int, default=QUERY_CAP, help="cap for query-topk")

    p = command("search", "single-step search over one index")
    p.add_argument("--index", required=True, metavar="DIR", help="index directory")
    p.add_argument("--queries", required=True, metavar="FILE", help="query vectors (JSON lines)")
    p.add_argument("--scorer", type=parse_scorer, default=Dot(),
                   help="dot, saturated:K1 (inf allowed) or bm25[:k1[:b]]")
    p.add_argument("--query-k", type=_size_or("lexical", "full"), default="full",
                   help="query size: N, 'lexical' or 'full'")
    _add_search_opts(p)

    p = command("two-step", "two-step retrieval: saturated approximate search, exact rescoring")
    _add_pipeline_opts(p)
    p.add_argument("--k1", type=parse_k1, default=100.0, help="saturation parameter (inf disables)")
    _add_search_opts(p)

    p = command("gt", "guided traversal baseline: BM25 candidates, exact rescoring")
    _add_pipeline_opts(p)
    p.add_argument("--bm25-k1", type=float, default=0.9, help="BM25 k1")
    p.add_argument("--bm25-b", type=float, default=0.4, help="BM25 b")
    _add_search_opts(p)

    p = command("eval", "nDCG@10, MRR@10 and Success@5 of a run")
    p.add_argument("--run", required=True, metavar="FILE", help="TREC run")
    p.add_argument("--qrels", required=True, metavar="FILE", help="TREC qrels")
    p.add_argument("--dataset", default="dataset", help="dataset label in the CSV")
    p.add_argument("--baseline", metavar="FILE", default=None,
                   help="second run for paired t-tests per metric")
    p.add_argument("--alpha", type=float, default=0.01, help="significance level")
    p.add_argument("--allow-unjudged", action="store_true",
                   help="skip run queries without judgments instead of failing")
    p.add_argument("--out", metavar="FILE", default=None, help="CSV output")

    p = command("intersect", "share of the reference top-N found in candidate runs")
    p.add_argument("--reference", required=True, metavar="FILE", help="reference run")
    p.add_argument("--candidate", required=True, nargs="+", metavar="FILE", help="candidate run(s)")
    p.add_argument("--ref-depth", type=_positive_int, default=10, help="reference depth")
    p.add_argument("--cand-depth", type=_positive_int, default=100, help="candidate depth")
    p.add_argument("--queries", metavar="FILE", default=None,
                   help="query file defining the query set (absent queries count as empty rankings)")
    p.add_argument("--out", metavar="FILE", default=None, help="CSV output")

    p = command("bench", "latency and work counters of pipeline configurations")
    p.add_argument("--queries", required=True, metavar="FILE", help="query vectors (JSON lines)")
    p.add_argument("--approx-index", required=True, nargs="+", metavar="DIR",
                   help="one or more pruned first-stage indexes")
    p.add_argument("--rescore-index", required=True, metavar="DIR", help="full index")
    p.add_argument("--k", type=_positive_int, default=100, help="hits returned per query")
    p.add_argument("--candidates", type=_positive_int, default=100, help="candidates rescored")
    p.add_argument("--query-k", type=_size_or("lexical", "full"), default="lexical",
                   help="first-stage query size")
    p.add_argument("--k1", type=_k1_list, default=[100.0], help="comma-separated k1 values")
    p.add_argument("--algorithms", type=_algo_list,
                   default=[Algorithm.MAXSCORE, Algorithm.WAND, Algorithm.BMW],
                   help="comma-separated algorithms")
    p.add_argument("--no-baselines", action="store_true",
                   help="skip the BM25, GT and single-step full-search rows")
    p.add_argument("--warmup", type=int, default=2, help="untimed passes")
    p.add_argument("--repetitions", type=_positive_int, default=5, help="timed passes per query")
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="also measure throughput with this many concurrent clients when > 1")
    p.add_argument("--out", metavar="FILE", default=None, help="CSV with timings")
    p.add_argument("--stable-out", metavar="FILE", default=None,
                   help="CSV with timing columns blank (byte-stable across runs)")
    return parser


# -- layered configuration ----------------------------------------------------

def _find_command(parser, argv) -> argparse.ArgumentParser | None:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for tok in argv:
        if tok in sub.choices:
            return sub.choices[tok]
    return None


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def read_config_file(path) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    out = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{p}:{lineno}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_").lower()] = value
    return out


def _layer_defaults(sub: argparse.ArgumentParser, config: dict[str, str], env) -> None:
    actions = {a.dest: a for a in sub._actions
               if a.dest not in ("help", "config") and a.option_strings}
    unknown = sorted(set(config) - set(actions))
    if unknown:
        raise UsageError(f"unknown config keys for '{sub.prog}': {', '.join(unknown)}")
    layered = {}
    for dest, action in actions.items():
        raw = env.get(ENV_PREFIX + dest.upper(), config.get(dest))
        if raw is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = action.type(raw) if action.type else raw
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"bad value {raw!r} for {dest}: {exc}") from None
            if action.nargs in ("+", "*") and not isinstance(value, list):
                value = [action.type(x) if action.type else x for x in raw.split()]
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"bad value {raw!r} for {dest}: choose from {list(action.choices)}")
        layered[dest] = value
        action.required = False
    sub.set_defaults(**layered)


def parse_args(argv=None, env=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    env = os.environ if env is None else env
    parser = build_parser()
    sub = _find_command(parser, argv)
    if sub is not None:
        cfg_path = _config_path(argv) or env.get(ENV_PREFIX + "CONFIG")
        _layer_defaults(sub, read_config_file(cfg_path) if cfg_path else {}, env)
    return parser.parse_args(argv)


# -- helpers ------------------------------------------------------------------

def _require_file(path, what) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _require_index(path, what, forward=False) -> Path:
    p = Path(path)
    if not (p / "meta.json").is_file():
        raise UsageError(f"{what} is not an index directory: {p}")
    if forward and not (p / "forward.bin").is_file():
        raise UsageError(f"{what} has no forward vectors (build it with 'index --full-out'): {p}")
    return p


def _require_out(path) -> Path:
    p = Path(path)
    parent = p.parent if p.parent != Path("") else Path(".")
    if parent.exists() and not parent.is_dir():
        raise UsageError(f"output location is not a directory: {parent}")
    parent.mkdir(parents=True, exist_ok=True)
    return p


def _query_size(choice, queries: Collection) -> int | None:
    if choice == "full":
        return None
    if choice == "lexical":
        avg = sum(v.nnz for v in queries.vectors) / len(queries) if len(queries) else 0.0
        return lexical_size(avg, QUERY_CAP)
    return int(choice)


def _load_queries(path, lexicon) -> Collection:
    queries = load_vectors(path, lexicon)
    if len(queries) == 0:
        raise UsageError(f"no queries in {path}")
    if queries.unknown_terms:
        log.info("%d query terms are not in the index vocabulary", len(queries.unknown_terms))
    return queries


def _check_same_docs(a, b, what):
    if tuple(a.doc_ids) != tuple(b.doc_ids):
        raise TwoStepError(f"{what}: indexes were built from different document collections")


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _to_run(queries: Collection, results, doc_ids, tag) -> Run:
    run = Run(tag=tag)
    for qid, r in zip(queries.doc_ids, results):
        if len(r):
            run.rankings[qid] = [(doc_ids[d], s) for d, s in r.hits()]
    return run


def _write_run(run: Run, path, what):
    write_run(run, path)
    print(f"{what}: {len(run)} queries with hits -> {path}")


# -- commands -----------------------------------------------------------------

def cmd_synth(a) -> int:
    out = Path(a.out)
    if out.exists() and not out.is_dir():
        raise UsageError(f"output is not a directory: {out}")
    cfg = SynthConfig(num_docs=a.docs, num_queries=a.queries, vocab_size=a.vocab,
                      doc_terms=a.doc_terms, query_terms=a.query_terms, seed=a.seed)
    paths = write_corpus(cfg, out)
    for k, v in paths.items():
        print(f"{k}: {v}")
    return 0


def _doc_prune_config(text: str, avg: float, cap: int) -> PruneConfig | None:
    t = text.strip().lower()
    if t == "full":
        return None
    if t == "lexical":
        return PruneConfig(Strategy.DOC_TOPK, size_k=lexical_size(avg, cap), doc_cap=cap)
    kind, _, value = t.partition(":")
    try:
        if kind == "quantile":
            return PruneConfig(Strategy.TERM_QUANTILE, quantile=float(value))
        if kind == "threshold":
            return PruneConfig(Strategy.VALUE_THRESHOLD, threshold=float(value))
        return PruneConfig(Strategy.DOC_TOPK, size_k=int(t), doc_cap=cap)
    except ValueError as exc:
        raise UsageError(f"bad --doc-prune {text!r}: {exc}") from None


def cmd_index(a) -> int:
    docs_path = _require_file(a.docs, "document file")
    q_path = _require_file(a.queries, "query file") if a.queries else None
    for d in (a.approx_out, a.full_out):
        if Path(d).exists() and not Path(d).is_dir():
            raise UsageError(f"output is not a directory: {d}")
    if Path(a.approx_out).resolve() == Path(a.full_out).resolve():
        raise UsageError("--approx-out and --full-out must differ")
    docs = load_vectors(docs_path)
    queries = load_vectors(q_path, docs.lexicon) if q_path else None
    stats = compute_stats(docs, queries)
    cfg = _doc_prune_config(a.doc_prune, stats.avg_doc_terms, a.doc_cap)
    full = build_inverted(docs, a.block_size, prune="full", stats=stats.as_dict())
    if cfg is None:
        approx = full
    else:
        pruned = prune_collection(docs, cfg)
        approx = build_inverted(pruned, a.block_size, quant_scale=full.quant_scale,
                                prune=cfg.describe(), stats=stats.as_dict())
        if pruned.count_empty() > docs.count_empty():
            print(f"pruning emptied {pruned.count_empty() - docs.count_empty()} documents")
    save_index(full, a.full_out, build_forward(docs))
    save_index(approx, a.approx_out)
    print("stats: " + " ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                               for k, v in stats.as_dict().items()))
    print(f"doc prune: {approx.prune}")
    for label, d in (("approx", a.approx_out), ("full", a.full_out)):
        r = index_size_report(d)
        print(f"size[{label}]: postings={r.postings} metadata={r.metadata} forward={r.forward} "
              f"total={r.total} -> {d}")
    return 0


def cmd_prune(a) -> int:
    src = _require_file(a.input, "input file")
    out = _require_out(a.out)
    c = load_vectors(src)
    strategy = Strategy(a.strategy)
    size = a.size
    if size == "lexical":
        cap = a.query_cap if strategy is Strategy.QUERY_TOPK else a.doc_cap
        size = lexical_size(compute_stats(c).avg_doc_terms, cap)
    cfg = PruneConfig(strategy, size_k=size, quantile=a.quantile, threshold=a.threshold,
                      doc_cap=a.doc_cap, query_cap=a.query_cap)
    pruned = prune_collection(c, cfg)
    dump_vectors(pruned, out)
    before = sum(v.nnz for v in c.vectors)
    after = sum(v.nnz for v in pruned.vectors)
    print(f"{cfg.describe()}: {before} -> {after} entries, {pruned.count_empty()} empty vectors -> {out}")
    return 0


def cmd_search(a) -> int:
    idx_dir = _require_index(a.index, "index")
    q_path = _require_file(a.queries, "query file")
    out = _require_out(a.out)
    idx = load_index(idx_dir)
    queries = _load_queries(q_path, idx.lexicon)
    qk = _query_size(a.query_k, queries)
    params = SearchParams(k=a.k, algorithm=a.algorithm, scorer=a.scorer)

    def one(q):
        return search(q if qk is None else prune_vector_topk(q, qk), idx, params, a.backend)

    results = _map(one, queries.vectors, a.threads)
    _write_run(_to_run(queries, results, idx.doc_ids, a.tag), out, "search")
    return 0


def _pipeline_setup(a):
    approx_dir = _require_index(a.approx_index, "approximate index")
    rescore_dir = _require_index(a.rescore_index, "rescoring index", forward=a.rescore == "forward")
    q_path = _require_file(a.queries, "query file")
    out = _require_out(a.out)
    approx = load_index(approx_dir)
    full = load_index(rescore_dir)
    _check_same_docs(approx, full, "approximate vs rescoring index")
    if approx.lexicon.terms != full.lexicon.terms[: len(approx.lexicon)]:
        raise TwoStepError("approximate and rescoring indexes use different lexicons")
    source = load_forward(rescore_dir) if a.rescore == "forward" else full
    queries = _load_queries(q_path, full.lexicon)
    return approx, full, source, queries, out


def cmd_two_step(a) -> int:
    approx, full, source, queries, out = _pipeline_setup(a)
    cfg = TwoStepConfig(approx, source, k=a.k, candidates=a.candidates, k1=a.k1,
                        query_prune_k=_query_size(a.query_k, queries), algorithm=a.algorithm,
                        backend=a.backend)
    results = _map(lambda q: two_step_search(q, cfg), queries.vectors, a.threads)
    _write_run(_to_run(queries, results, full.doc_ids, a.tag), out, "two-step")
    return 0


def cmd_gt(a) -> int:
    approx, full, source, queries, out = _pipeline_setup(a)
    cfg = TwoStepConfig(approx, source, k=a.k, candidates=a.candidates,
                        query_prune_k=_query_size(a.query_k, queries), algorithm=a.algorithm,
                        bm25=Bm25(a.bm25_k1, a.bm25_b), backend=a.backend)
    results = _map(lambda q: gt_search(q, cfg), queries.vectors, a.threads)
    _write_run(_to_run(queries, results, full.doc_ids, a.tag), out, "gt")
    return 0


def cmd_eval(a) -> int:
    run = read_run(_require_file(a.run, "run file"))
    qrels = load_qrels(_require_file(a.qrels, "qrels file"))
    base = read_run(_require_file(a.baseline, "baseline run")) if a.baseline else None
    out = _require_out(a.out) if a.out else None
    if not a.allow_unjudged:
        check_judged(run, qrels)
        if base is not None:
            check_judged(base, qrels)
    rows, details = metric_rows(run, qrels, a.dataset)
    print(format_table(rows))
    pq = details[Metric.NDCG]
    print(f"queries evaluated: {len(pq.values)}; unjudged (skipped): {len(pq.unjudged)}; "
          f"without relevant documents (scored 0): {len(pq.no_relevant)}")
    if base is not None:
        _, base_details = metric_rows(base, qrels, a.dataset)
        for m in Metric:
            sys_v, base_v = details[m].values, base_details[m].values
            common = sorted(set(sys_v) & set(base_v))
            if len(common) < 2:
                print(f"{m.value}: too few common queries for a t-test")
                continue
            t = paired_ttest([sys_v[q] for q in common], [base_v[q] for q in common], a.alpha)
            print(f"{m.value}: delta={t.mean_delta:+.4f} t={t.t_statistic:.4f} p={t.p_value:.4g} "
                  f"-> {t.verdict.value} (alpha={a.alpha:g})")
    if out:
        write_metrics_csv(rows, out)
    return 0


def cmd_intersect(a) -> int:
    ref = read_run(_require_file(a.reference, "reference run"))
    cands = [(c, read_run(_require_file(c, "candidate run"))) for c in a.candidate]
    out = _require_out(a.out) if a.out else None
    if a.queries:
        qids = load_vectors(_require_file(a.queries, "query file")).doc_ids
        extra = set(ref.query_ids()).union(*(set(r.query_ids()) for _, r in cands)) - set(qids)
        if extra:
            raise QueryMismatchError("runs contain queries missing from the query file", extra)
        for r in [ref] + [r for _, r in cands]:
            for q in qids:
                r.rankings.setdefault(q, [])
    rows = []
    for path, run in cands:
        res = intersection_at(ref, run, a.ref_depth, a.cand_depth)
        rows.append(MetricRow(f"intersection@{a.ref_depth}/{a.cand_depth}", Path(path).stem,
                              res.value, res.ci_low, res.ci_high))
        print(f"{Path(path).stem}: {res.value:.2f}% (.99 CI {res.ci_low:.2f}-{res.ci_high:.2f}) "
              f"over {len(res.per_query)} queries")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(",".join(METRIC_HEADER) + "\n")
            for r in rows:
                fh.write(f"{r.metric},{r.dataset},{r.value:.4f},{r.ci_low:.4f},{r.ci_high:.4f}\n")
    return 0


def cmd_bench(a) -> int:
    q_path = _require_file(a.queries, "query file")
    approx_dirs = [_require_index(d, "approximate index") for d in a.approx_index]
    rescore_dir = _require_index(a.rescore_index, "rescoring index", forward=True)
    outs = [_require_out(p) if p else None for p in (a.out, a.stable_out)]
    if a.warmup < 0:
        raise UsageError("--warmup must be >= 0")
    full = load_index(rescore_dir)
    fwd = load_forward(rescore_dir)
    queries = _load_queries(q_path, full.lexicon)
    qk = _query_size(a.query_k, queries)
    qlabel = "full" if qk is None else str(qk)
    approxes = []
    for d in approx_dirs:
        idx = load_index(d)
        _check_same_docs(idx, full, f"{d} vs rescoring index")
        approxes.append(idx)

    configs = []
    first = approxes[0]
    if not a.no_baselines:
        bm25_params = SearchParams(k=a.candidates, algorithm=Algorithm.MAXSCORE, scorer=Bm25())
        bq = (lambda q: q) if qk is None else (lambda q: prune_vector_topk(q, qk))
        configs.append(BenchConfig("bm25", lambda q: search(bq(q), first, bm25_params, a.backend),
                                   "maxscore", "", first.prune, qlabel))
        gt_cfg = TwoStepConfig(first, fwd, k=a.k, candidates=a.candidates, query_prune_k=qk,
                               algorithm=Algorithm.MAXSCORE, backend=a.backend)
        configs.append(BenchConfig("gt", lambda q: gt_search(q, gt_cfg), "maxscore", "",
                                   first.prune, qlabel))
        full_params = SearchParams(k=a.k, algorithm=Algorithm.MAXSCORE, scorer=Dot())
        configs.append(BenchConfig("full", lambda q: search(q, full, full_params, a.backend),
                                   "maxscore", "inf", "full", "full"))
    for idx in approxes:
        for k1 in a.k1:
            for algo in a.algorithms:
                cfg = TwoStepConfig(idx, fwd, k=a.k, candidates=a.candidates, k1=k1,
                                    query_prune_k=qk, algorithm=algo, backend=a.backend)
                name = f"two-step[{idx.prune},k1={format_k1(k1)}]"
                configs.append(BenchConfig(name, lambda q, cfg=cfg: two_step_search(q, cfg),
                                           algo.value, format_k1(k1), idx.prune, qlabel))
    rows = sweep(configs, list(queries.vectors), warmup=a.warmup, repetitions=a.repetitions)
    print(bench_table(rows))
    if a.threads > 1 and rows:
        for c in configs:
            print(f"throughput[{c.name} {c.algorithm}] {throughput(c.search_fn, queries.vectors, a.threads):.1f} q/s "
                  f"with {a.threads} clients")
    if outs[0]:
        write_sweep_csv(rows, outs[0], timing=True)
    if outs[1]:
        write_sweep_csv(rows, outs[1], timing=False)
    return 0


COMMANDS = {
    "synth": cmd_synth, "index": cmd_index, "prune": cmd_prune, "search": cmd_search,
    "two-step": cmd_two_step, "gt": cmd_gt, "eval": cmd_eval, "intersect": cmd_intersect,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"twostep: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, TwoStepError, OSError, ValueError) as exc:
        print(f"twostep: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort reporting for the exit status contract
        log.debug("internal error", exc_info=True)
        print(f"twostep: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
