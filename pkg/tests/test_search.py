from __future__ import annotations

import numpy as np
import pytest

from mixsearch.core import Corpus, DimensionMismatch, Modality, Query, ValidationError
from mixsearch.calibration import compute_means, corpus_calibration_records
from mixsearch.search import (
    EmptyCorpus,
    KERNEL_BACKEND,
    ScoreOverride,
    cosine,
    embed_corpus,
    load_run,
    run_retrieval,
    save_run,
    search_topk,
)

from conftest import make_doc, make_query


def test_backend_selected():
    assert KERNEL_BACKEND in ("cython", "numpy")


def test_cosine_identical_vectors():
    v = np.array([1.0, 2.0, -3.0])
    assert cosine(v, v) == pytest.approx(1.0)
    assert cosine(v, 2.5 * v) == pytest.approx(1.0)


def test_cosine_orthogonal_and_opposite():
    a = np.array([1.0, 0.0])
    b = np.array([0.0, 1.0])
    assert cosine(a, b) == pytest.approx(0.0)
    assert cosine(a, -a) == pytest.approx(-1.0)


def test_cosine_degenerate_is_zero():
    assert cosine(np.zeros(3), np.ones(3)) == 0.0
    assert cosine(np.ones(3), np.zeros(3)) == 0.0


def test_cosine_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        cosine(np.ones(3), np.ones(4))


def _random_corpus(n=200, d=16, seed=2):
    rng = np.random.default_rng(seed)
    docs = tuple(
        make_doc(f"d{i:03d}", text=rng.standard_normal(d).astype(np.float32)) for i in range(n)
    )
    return Corpus(documents=docs, dimension=d), rng


def test_search_matches_full_sort_oracle():
    corpus, rng = _random_corpus()
    embedded = embed_corpus(corpus)
    query = make_query("q0", rng.standard_normal(16).astype(np.float32))
    got = search_topk(query, embedded, 20)

    expected = sorted(
        ((cosine(query.embedding, d.parts[Modality.TEXT]), d.id) for d in corpus.documents),
        key=lambda t: (-t[0], t[1]),
    )[:20]
    assert [sd.doc_id for sd in got] == [doc_id for _, doc_id in expected]
    for sd, (score, _) in zip(got, expected):
        assert sd.score == pytest.approx(score, abs=1e-12)


def test_result_invariants():
    corpus, rng = _random_corpus(n=50)
    embedded = embed_corpus(corpus)
    got = search_topk(make_query("q", rng.standard_normal(16)), embedded, 10)
    assert [sd.rank for sd in got] == list(range(1, 11))
    scores = [sd.score for sd in got]
    assert scores == sorted(scores, reverse=True)
    assert len({sd.doc_id for sd in got}) == 10


def test_k_larger_than_corpus_returns_everything():
    corpus, rng = _random_corpus(n=5)
    got = search_topk(make_query("q", rng.standard_normal(16)), embed_corpus(corpus), 100)
    assert len(got) == 5


def test_identical_documents_rank_by_ascending_id():
    vec = np.array([1.0, 1.0], dtype=np.float32)
    docs = tuple(make_doc(i, text=vec) for i in ("zz", "aa", "mm"))
    corpus = Corpus(documents=docs, dimension=2)
    got = search_topk(make_query("q", vec), embed_corpus(corpus), 3)
    assert [sd.doc_id for sd in got] == ["aa", "mm", "zz"]


def test_scores_are_scale_invariant():
    corpus, rng = _random_corpus(n=20)
    query = make_query("q", rng.standard_normal(16))
    base = search_topk(query, embed_corpus(corpus), 20)

    scaled_docs = tuple(
        make_doc(d.id, text=(d.parts[Modality.TEXT] * (3.0 + i)).astype(np.float32))
        for i, d in enumerate(corpus.documents)
    )
    scaled = search_topk(query, embed_corpus(Corpus(documents=scaled_docs, dimension=16)), 20)
    # Storage is float32, so rescaling re-quantizes each direction slightly.
    for a, b in zip(base, scaled):
        assert a.doc_id == b.doc_id
        assert a.score == pytest.approx(b.score, abs=1e-6)


def test_zero_vectors_never_produce_nan():
    docs = (make_doc("d0", text=np.zeros(3, dtype=np.float32)),
            make_doc("d1", text=np.ones(3, dtype=np.float32)))
    corpus = Corpus(documents=docs, dimension=3)
    got = search_topk(make_query("q", np.ones(3)), embed_corpus(corpus), 2)
    assert all(np.isfinite(sd.score) for sd in got)
    assert got[0].doc_id == "d1"
    assert got[1].score == 0.0


def test_empty_corpus_rejected():
    corpus = Corpus(documents=(), dimension=3)
    with pytest.raises(EmptyCorpus):
        search_topk(make_query("q", np.ones(3)), embed_corpus(corpus), 1)


def test_k_below_one_rejected():
    corpus, rng = _random_corpus(n=3)
    with pytest.raises(ValidationError):
        search_topk(make_query("q", rng.standard_normal(16)), embed_corpus(corpus), 0)


def test_query_dimension_checked():
    corpus, _ = _random_corpus(n=3)
    with pytest.raises(DimensionMismatch):
        search_topk(make_query("q", np.ones(4)), embed_corpus(corpus), 1)


def test_override_by_ids_replaces_score_literally():
    corpus, rng = _random_corpus(n=10)
    query = make_query("q", rng.standard_normal(16))
    override = ScoreOverride(value=0.0, ids=frozenset({"d003", "d007"}))
    got = search_topk(query, embed_corpus(corpus), 10, overrides=(override,))
    by_id = {sd.doc_id: sd.score for sd in got}
    assert by_id["d003"] == 0.0
    assert by_id["d007"] == 0.0


def test_override_by_modality():
    docs = (
        make_doc("t0", text=np.array([1.0, 0.0], dtype=np.float32)),
        make_doc("i0", image=np.array([0.9, 0.1], dtype=np.float32)),
    )
    corpus = Corpus(documents=docs, dimension=2)
    query = make_query("q", np.array([1.0, 0.0]))
    override = ScoreOverride(value=-1.0, modality=Modality.IMAGE)
    got = search_topk(query, embed_corpus(corpus), 2, overrides=(override,))
    assert got[0].doc_id == "t0"
    assert got[1].doc_id == "i0"
    assert got[1].score == -1.0


def test_override_can_promote():
    corpus, rng = _random_corpus(n=10)
    query = make_query("q", rng.standard_normal(16))
    override = ScoreOverride(value=2.0, ids=frozenset({"d009"}))
    got = search_topk(query, embed_corpus(corpus), 1, overrides=(override,))
    assert got[0].doc_id == "d009"
    assert got[0].score == 2.0


def test_run_retrieval_preserves_query_order():
    corpus, rng = _random_corpus(n=30)
    queries = [make_query(f"q{i:02d}", rng.standard_normal(16)) for i in range(7)]
    run = run_retrieval(queries, corpus, k=5)
    assert run.query_ids() == [q.id for q in queries]
    assert all(len(v) == 5 for v in run.results.values())


def test_run_retrieval_threads_match_serial():
    corpus, rng = _random_corpus(n=60)
    queries = [make_query(f"q{i:02d}", rng.standard_normal(16)) for i in range(12)]
    serial = run_retrieval(queries, corpus, k=10, threads=1)
    parallel = run_retrieval(queries, corpus, k=10, threads=4)
    assert serial.results == parallel.results


def test_run_retrieval_deterministic(tmp_path):
    corpus, rng = _random_corpus(n=40)
    queries = [make_query(f"q{i:02d}", rng.standard_normal(16)) for i in range(5)]
    p1, p2 = str(tmp_path / "a.run"), str(tmp_path / "b.run")
    save_run(run_retrieval(queries, corpus, k=10), p1)
    save_run(run_retrieval(queries, corpus, k=10), p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_calibrated_run_centers_queries():
    # All documents share a constant offset from the queries; centering both
    # sides restores the match that the raw cosine misses.
    rng = np.random.default_rng(31)
    d, offset = 8, np.zeros(8)
    offset[7] = 50.0
    docs, queries = [], []
    for i in range(20):
        sig = rng.standard_normal(d)
        sig[7] = 0.0
        docs.append(make_doc(f"d{i:02d}", text=(sig + offset).astype(np.float32)))
        queries.append(make_query(f"q{i:02d}", sig.astype(np.float32)))
    corpus = Corpus(documents=tuple(docs), dimension=d)
    means = compute_means(corpus_calibration_records(corpus, queries))

    raw = run_retrieval(queries, corpus, k=1)
    cal = run_retrieval(queries, corpus, k=1, calibrated=True, means=means)
    raw_hits = sum(raw.results[f"q{i:02d}"][0].doc_id == f"d{i:02d}" for i in range(20))
    cal_hits = sum(cal.results[f"q{i:02d}"][0].doc_id == f"d{i:02d}" for i in range(20))
    assert cal_hits == 20
    assert cal_hits > raw_hits


def test_run_file_roundtrip(tmp_path):
    corpus, rng = _random_corpus(n=25)
    queries = [make_query(f"q{i}", rng.standard_normal(16)) for i in range(3)]
    run = run_retrieval(queries, corpus, k=8, run_tag="trial")
    path = str(tmp_path / "x.run")
    save_run(run, path)
    loaded = load_run(path)
    assert loaded.run_tag == "trial"
    assert loaded.query_ids() == run.query_ids()
    for qid in run.results:
        got = loaded.results[qid]
        want = run.results[qid]
        assert [sd.doc_id for sd in got] == [sd.doc_id for sd in want]
        assert [sd.rank for sd in got] == [sd.rank for sd in want]
        for a, b in zip(got, want):
            assert a.score == pytest.approx(b.score, abs=5e-7)


def test_run_file_format(tmp_path):
    corpus, rng = _random_corpus(n=3)
    run = run_retrieval([make_query("q0", rng.standard_normal(16))], corpus, k=2)
    path = str(tmp_path / "y.run")
    save_run(run, path)
    lines = open(path).read().splitlines()
    assert len(lines) == 2
    fields = lines[0].split()
    assert len(fields) == 5
    assert fields[0] == "q0" and fields[2] == "1" and fields[4] == "mixsearch"
    float(fields[3])


def test_load_run_rejects_malformed(tmp_path):
    path = str(tmp_path / "bad.run")
    open(path, "w").write("q0 d0 1 0.5\n")
    with pytest.raises(ValidationError):
        load_run(path)
