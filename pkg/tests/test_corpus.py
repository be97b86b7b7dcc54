import json

import pytest
from hypothesis import given, strategies as st

from twostep.corpus import (Collection, Lexicon, SparseVector, compute_stats, dump_vectors,
                            load_qrels, load_vectors, write_qrels, Qrels)
from twostep.errors import IngestionError, ParseError, TwoStepError


def write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def test_load_single_record(tmp_path):
    p = write_lines(tmp_path / "d.jsonl", [{"id": "d1", "vector": {"cat": 2.5, "dog": 1.0}}])
    c = load_vectors(p)
    assert c.doc_ids == ("d1",)
    v = c.vectors[0]
    assert v.nnz == 2
    named = {c.lexicon.term(t): w for t, w in v}
    assert named == {"cat": 2.5, "dog": 1.0}


def test_zero_weight_dropped(tmp_path):
    p = write_lines(tmp_path / "d.jsonl", [{"id": "d1", "vector": {"cat": 0.0, "dog": 1.0}}])
    v = load_vectors(p).vectors[0]
    assert v.nnz == 1


def test_duplicate_id_is_ingestion_error(tmp_path):
    p = write_lines(tmp_path / "d.jsonl", [{"id": "d1", "vector": {"a": 1}},
                                           {"id": "d1", "vector": {"b": 1}}])
    with pytest.raises(IngestionError):
        load_vectors(p)


def test_negative_weight_is_ingestion_error(tmp_path):
    p = write_lines(tmp_path / "d.jsonl", [{"id": "d1", "vector": {"a": -1}}])
    with pytest.raises(IngestionError):
        load_vectors(p)


@pytest.mark.parametrize("line", ["{not json", '{"id": "x"}', '{"id": 3, "vector": {}}',
                                  '{"id": "x", "vector": {"a": "heavy"}}',
                                  '{"id": "x", "vector": {"a": NaN}}', "[1, 2]"])
def test_malformed_line_names_line_number(tmp_path, line):
    p = tmp_path / "d.jsonl"
    p.write_text('{"id": "ok", "vector": {"a": 1}}\n' + line + "\n", encoding="utf-8")
    with pytest.raises(ParseError) as exc:
        load_vectors(p)
    assert exc.value.lineno == 2
    assert ":2:" in str(exc.value)


def test_query_lexicon_extension_flags_unknown_terms(tmp_path):
    docs = load_vectors(write_lines(tmp_path / "d.jsonl", [{"id": "d", "vector": {"a": 1, "b": 2}}]))
    qs = load_vectors(write_lines(tmp_path / "q.jsonl", [{"id": "q", "vector": {"b": 1, "zzz": 3}}]),
                      docs.lexicon)
    assert qs.unknown_terms == {"zzz"}
    zid = qs.lexicon.get("zzz")
    assert zid >= docs.lexicon.base_size
    assert qs.lexicon.get("b") == docs.lexicon.get("b")
    assert "zzz" not in docs.lexicon  # the document lexicon is not mutated


def test_sparse_vector_invariants():
    with pytest.raises(ValueError):
        SparseVector([2, 1], [1.0, 1.0])
    with pytest.raises(ValueError):
        SparseVector([1, 1], [1.0, 1.0])
    with pytest.raises(ValueError):
        SparseVector([1], [0.0])
    v = SparseVector.from_mapping({5: 1.0, 2: 3.0, 9: 0.0})
    assert v.terms.tolist() == [2, 5]
    with pytest.raises(ValueError):
        v.weights[0] = 7.0


def test_compute_stats_examples():
    c = Collection.from_mappings([("a", {f"t{i}": 1.0 for i in range(4)}),
                                  ("b", {f"t{i}": 1.0 for i in range(6)})])
    s = compute_stats(c)
    assert s.avg_doc_terms == 5.0 and s.num_docs == 2 and s.max_doc_terms == 6
    one = Collection.from_mappings([("a", {f"t{i}": 1.0 for i in range(50)})])
    assert compute_stats(one).avg_doc_terms == 50.0
    three = Collection.from_mappings([(f"d{j}", {f"t{i}": 1.0 for i in range(3)}) for j in range(3)])
    s3 = compute_stats(three)
    assert (s3.avg_doc_terms, s3.max_doc_terms) == (3.0, 3)


def test_compute_stats_with_queries():
    docs = Collection.from_mappings([("a", {"x": 1.0})])
    qs = Collection.from_mappings([("q1", {"x": 1.0, "y": 2.0}), ("q2", {"x": 1.0})], docs.lexicon)
    s = compute_stats(docs, qs)
    assert s.avg_query_terms == 1.5 and s.num_queries == 2


def test_compute_stats_empty_collection_errors():
    with pytest.raises(TwoStepError):
        compute_stats(Collection((), (), Lexicon()))


def test_qrels_examples(tmp_path):
    p = tmp_path / "qrels"
    p.write_text("q1 0 d3 2\nq1 0 d4 1\nq1 0 d4 2\n\nq2 0 d1 0\n", encoding="utf-8")
    q = load_qrels(p)
    assert q["q1"] == {"d3": 2, "d4": 2}
    assert q["q2"] == {"d1": 0}
    out = tmp_path / "again"
    write_qrels(q, out)
    assert load_qrels(out) == q


@pytest.mark.parametrize("line", ["q1 0 d3 -1", "q1 0 d3", "q1 0 d3 x", "q1 0 d3 1 extra"])
def test_qrels_malformed(tmp_path, line):
    p = tmp_path / "qrels"
    p.write_text("q0 0 d1 1\n" + line + "\n", encoding="utf-8")
    with pytest.raises(ParseError) as exc:
        load_qrels(p)
    assert exc.value.lineno == 2


terms = st.text(alphabet="abcdefghij", min_size=1, max_size=4)
weights = st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False)
docs = st.dictionaries(st.text(alphabet="xyz0123456789", min_size=1, max_size=6),
                       st.dictionaries(terms, weights, max_size=12), min_size=1, max_size=12)


@given(docs)
def test_round_trip(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("rt") / "v.jsonl"
    c = Collection.from_mappings(records.items())
    dump_vectors(c, path)
    back = load_vectors(path)
    assert back.doc_ids == c.doc_ids
    for a, b in zip(c.vectors, back.vectors):
        named_a = {c.lexicon.term(t): w for t, w in a}
        named_b = {back.lexicon.term(t): w for t, w in b}
        assert named_a == named_b


@given(docs)
def test_average_matches_entry_counts(records):
    c = Collection.from_mappings(records.items())
    s = compute_stats(c)
    total = sum(v.nnz for v in c.vectors)
    assert abs(total / len(c) - s.avg_doc_terms) <= 1e-9
    assert s.avg_doc_terms <= s.max_doc_terms
    assert s.num_docs == len(c)


def test_qrels_container():
    q = Qrels({"a": {"d": 1}})
    assert "a" in q and q.get("b") is None and len(q) == 1
