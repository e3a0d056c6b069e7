from __future__ import annotations

import numpy as np
import pytest

from mixsearch.core import Corpus, Document, Modality, Query
from mixsearch.calibration import (
    CalibrationMeans,
    EmptyCalibrationSet,
    MeanKey,
    MissingMean,
    calibrate_corpus,
    compute_means,
    corpus_calibration_records,
    estimate_gap,
    load_means,
    normalize,
    normalize_checked,
    remove_gap,
    save_means,
    top_principal_direction,
)


QKEY = MeanKey.query()
TKEY = MeanKey.part(Modality.TEXT)
IKEY = MeanKey.part(Modality.IMAGE)


def test_normalize_three_four_five():
    out = normalize(np.array([3.0, 4.0]))
    assert np.allclose(out, [0.6, 0.8], atol=1e-12)


def test_normalize_unit_vector_is_fixed_point():
    v = np.array([0.0, 1.0, 0.0])
    assert np.array_equal(normalize(v), v)


def test_normalize_zero_vector_flagged_not_scaled():
    v = np.zeros(4, dtype=np.float32)
    out, degenerate = normalize_checked(v)
    assert degenerate
    assert np.array_equal(out, v)
    assert not normalize_checked(np.array([1e-6, 0.0]))[1]


def test_normalize_preserves_dtype():
    assert normalize(np.ones(3, dtype=np.float32)).dtype == np.float32
    assert normalize(np.ones(3, dtype=np.float64)).dtype == np.float64


def test_compute_means_small_arithmetic():
    records = [
        (TKEY, np.array([1.0, 2.0])),
        (TKEY, np.array([3.0, 4.0])),
        (IKEY, np.array([10.0, 0.0])),
    ]
    means = compute_means(records)
    assert np.array_equal(means.mean_for(TKEY), [2.0, 3.0])
    assert np.array_equal(means.mean_for(IKEY), [10.0, 0.0])
    assert means.sample_counts == {TKEY: 2, IKEY: 1}
    assert means.dimension == 2


def test_compute_means_empty_rejected():
    with pytest.raises(EmptyCalibrationSet):
        compute_means([])


def test_compute_means_accumulates_in_float64():
    records = [(TKEY, np.full(2, 0.1, dtype=np.float32)) for _ in range(1000)]
    mean = compute_means(records).mean_for(TKEY)
    assert mean.dtype == np.float64
    assert abs(float(mean[0]) - float(np.float32(0.1))) < 1e-9


def test_compute_means_monte_carlo_recovers_population_mean():
    rng = np.random.default_rng(42)
    mu = np.array([1.0, -2.0, 0.5, 3.0])
    sigma = 0.2
    records = [(TKEY, mu + sigma * rng.standard_normal(4)) for _ in range(1000)]
    mean = compute_means(records).mean_for(TKEY)
    assert np.linalg.norm(mean - mu) < 4 * sigma / np.sqrt(1000) * np.sqrt(4)


def test_remove_gap_is_exact_subtraction():
    means = CalibrationMeans(dimension=2, means={TKEY: np.array([1.0, 1.0])}, sample_counts={TKEY: 1})
    out = remove_gap(np.array([3.0, 5.0]), TKEY, means)
    assert np.array_equal(out, [2.0, 4.0])


def test_remove_gap_missing_key():
    means = CalibrationMeans(dimension=2, means={TKEY: np.zeros(2)}, sample_counts={TKEY: 1})
    with pytest.raises(MissingMean):
        remove_gap(np.zeros(2), IKEY, means)


def test_centering_cancels_constant_offset():
    # Shifting every vector in a group by the same constant must not change
    # the centered output.
    rng = np.random.default_rng(0)
    base = rng.standard_normal((50, 8))
    offset = rng.standard_normal(8) * 3.0
    plain = compute_means([(TKEY, row) for row in base])
    shifted = compute_means([(TKEY, row + offset) for row in base])
    for row in base:
        a = remove_gap(row, TKEY, plain)
        b = remove_gap(row + offset, TKEY, shifted)
        assert np.linalg.norm(a - b) < 1e-6


def test_self_centering_zeroes_group_mean():
    rng = np.random.default_rng(1)
    rows = rng.standard_normal((200, 6)) + 5.0
    means = compute_means([(IKEY, r) for r in rows])
    centered = np.stack([remove_gap(r, IKEY, means) for r in rows])
    assert np.linalg.norm(centered.mean(axis=0)) < 1e-10


def test_query_mean_tracked_separately_from_text_mean():
    records = [
        (QKEY, np.array([1.0, 0.0])),
        (TKEY, np.array([0.0, 1.0])),
    ]
    means = compute_means(records)
    assert np.array_equal(means.mean_for(QKEY), [1.0, 0.0])
    assert np.array_equal(means.mean_for(TKEY), [0.0, 1.0])


def test_calibrate_corpus_centers_every_group():
    rng = np.random.default_rng(5)
    docs = []
    for i in range(40):
        docs.append(
            Document(
                id=f"d{i:02d}",
                parts={
                    Modality.TEXT: (rng.standard_normal(4) + [2, 0, 0, 0]).astype(np.float32),
                    Modality.IMAGE: (rng.standard_normal(4) - [2, 0, 0, 0]).astype(np.float32),
                },
            )
        )
    queries = [
        Query(id=f"q{i:02d}", embedding=(rng.standard_normal(4) + [0, 3, 0, 0]).astype(np.float32))
        for i in range(40)
    ]
    corpus = Corpus(documents=tuple(docs), dimension=4)
    means = compute_means(corpus_calibration_records(corpus, queries))
    cal_corpus, cal_queries = calibrate_corpus(corpus, queries, means)

    q_mean = np.mean([q.embedding for q in cal_queries], axis=0)
    t_mean = np.mean([d.parts[Modality.TEXT] for d in cal_corpus.documents], axis=0)
    i_mean = np.mean([d.parts[Modality.IMAGE] for d in cal_corpus.documents], axis=0)
    for group_mean in (q_mean, t_mean, i_mean):
        assert np.linalg.norm(group_mean) < 1e-9
    assert cal_corpus.ids() == corpus.ids()


def test_top_principal_direction_recovers_dominant_axis():
    rng = np.random.default_rng(9)
    axis = np.zeros(5)
    axis[2] = 1.0
    rows = np.outer(rng.standard_normal(300) * 4.0, axis)
    rows += 0.01 * rng.standard_normal((300, 5))
    v = top_principal_direction(rows)
    assert abs(abs(float(np.dot(v, axis))) - 1.0) < 1e-3


def test_estimate_gap_magnitude_trivial():
    means = CalibrationMeans(
        dimension=3,
        means={TKEY: np.array([3.0, 0.0, 4.0]), IKEY: np.zeros(3)},
        sample_counts={TKEY: 1, IKEY: 1},
    )
    est = estimate_gap(means, TKEY, IKEY)
    assert est.magnitude == pytest.approx(5.0)
    assert np.array_equal(est.gap_vector, [3.0, 0.0, 4.0])
    assert est.cosine_to_subspace is None


def test_estimate_gap_recovery_from_noisy_clusters():
    # Two clusters displaced by a constant along one axis, spread along the
    # others: magnitude recovered within 5% and the offset is nearly
    # orthogonal to the in-cluster principal direction.
    rng = np.random.default_rng(17)
    d, n, g = 16, 1000, 1.5
    spread = np.zeros(d)
    spread[0] = 1.0
    gap_axis = np.zeros(d)
    gap_axis[d - 1] = g
    records = []
    for _ in range(n):
        sem = rng.standard_normal() * spread + 0.05 * rng.standard_normal(d)
        records.append((TKEY, sem + gap_axis))
        sem = rng.standard_normal() * spread + 0.05 * rng.standard_normal(d)
        records.append((IKEY, sem))
    means = compute_means(records)
    est = estimate_gap(means, TKEY, IKEY, samples=records)
    assert abs(est.magnitude - g) / g < 0.05
    assert est.cosine_to_subspace is not None
    assert est.cosine_to_subspace < 0.1


def test_estimate_gap_identical_groups_is_zero():
    means = CalibrationMeans(
        dimension=2,
        means={TKEY: np.ones(2), IKEY: np.ones(2)},
        sample_counts={TKEY: 1, IKEY: 1},
    )
    est = estimate_gap(means, TKEY, IKEY, samples=[(TKEY, np.ones(2)), (IKEY, np.ones(2))])
    assert est.magnitude == 0.0
    assert est.cosine_to_subspace == 0.0


def test_compute_means_deterministic():
    rng = np.random.default_rng(3)
    records = [(TKEY, rng.standard_normal(8)) for _ in range(64)]
    a = compute_means(records).mean_for(TKEY)
    b = compute_means(records).mean_for(TKEY)
    assert a.tobytes() == b.tobytes()


def test_means_roundtrip_through_store(tmp_path):
    rng = np.random.default_rng(23)
    means = CalibrationMeans(
        dimension=6,
        means={
            QKEY: rng.standard_normal(6),
            TKEY: rng.standard_normal(6),
            IKEY: rng.standard_normal(6),
        },
        sample_counts={QKEY: 11, TKEY: 40, IKEY: 39},
    )
    path = str(tmp_path / "means.mmse")
    save_means(means, path)
    loaded = load_means(path)
    assert loaded.dimension == 6
    assert loaded.sample_counts == means.sample_counts
    for key in means.means:
        # Persisted as float32, so expect exactly the quantized values back.
        expected = means.means[key].astype(np.float32).astype(np.float64)
        assert np.array_equal(loaded.mean_for(key), expected)
