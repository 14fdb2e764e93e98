import math

import numpy as np
import pytest

from conftest import UNIT_SQUARE, engine_pairs, random_symmetric
from oracle import oracle_barcode

from ripsph import (
    ComputeParams,
    DistanceInput,
    DTMWeighting,
    ExplicitWeighting,
    compute_persistence,
    validate_input,
)
from ripsph.core import IndexOverflow, NotPrime

INF = math.inf
SQRT2 = math.sqrt(2)


def test_unit_square_point_cloud():
    report = compute_persistence(UNIT_SQUARE, ComputeParams(max_dim=1,
                                                            backend="python"))
    bc = report.barcode
    assert bc.pairs(0) == [(0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, INF)]
    assert bc.pairs(1) == [(1.0, SQRT2)]


def test_random16_style_configuration_completes():
    # 50 points, Auto threshold, dim 7, F2: finishes quickly because the
    # enclosing radius truncates the filtration
    from ripsph import compiled_available
    if not compiled_available():
        pytest.skip("needs the compiled backend")
    rng = np.random.default_rng(16)
    cloud = rng.random((50, 16))
    report = compute_persistence(cloud, ComputeParams(max_dim=7))
    assert "enclosing_radius" in report.stats
    for d in (6, 7):
        assert report.barcode.pairs(d) == [] or len(report.barcode.pairs(d)) < 5


def test_collapse_on_off_identical_with_stats():
    rng = np.random.default_rng(12)
    m = random_symmetric(rng, 14)
    off = compute_persistence(DistanceInput.dense(m),
                              ComputeParams(max_dim=2, backend="python"))
    on = compute_persistence(DistanceInput.dense(m),
                             ComputeParams(max_dim=2, collapse=True,
                                           backend="python"))
    assert on.barcode == off.barcode
    assert on.stats["edges_after_collapse"] <= on.stats["edges_before_collapse"]
    assert off.stats["edges_after_collapse"] == off.stats["edges_before_collapse"]


def test_auto_threshold_equals_infinite_threshold():
    rng = np.random.default_rng(90)
    for _ in range(6):
        m = random_symmetric(rng, 9)
        auto = engine_pairs(m, max_dim=2, backend="python")
        full = engine_pairs(m, max_dim=2, threshold=INF, backend="python")
        assert auto == full


def test_pipeline_order_auto_radius_before_collapse():
    rng = np.random.default_rng(55)
    m = random_symmetric(rng, 12)
    report = compute_persistence(
        DistanceInput.dense(m),
        ComputeParams(max_dim=1, collapse=True, backend="python"),
    )
    radius = report.stats["enclosing_radius"]
    # collapse input edge count already reflects the radius threshold
    expected_edges = int(np.sum(m[np.triu_indices(12, 1)] <= radius))
    assert report.stats["edges_before_collapse"] == expected_edges
    assert report.stats["threshold"] == radius


def test_weighted_pipeline_runs_and_respects_order():
    rng = np.random.default_rng(23)
    m = random_symmetric(rng, 10)
    params = ComputeParams(max_dim=1, weighting=DTMWeighting(k=3, r=2, p_mix=1),
                           backend="python")
    report = compute_persistence(DistanceInput.dense(m), params)
    # weighting happens before thresholding: the recorded radius is the
    # radius of the re-weighted matrix, which dominates the raw one
    assert report.stats["enclosing_radius"] >= float(np.min(np.max(m, axis=1)))
    assert report.barcode.bars(0)


def test_explicit_weighting_matches_weighted_matrix_oracle():
    rng = np.random.default_rng(77)
    m = random_symmetric(rng, 8)
    weights = (rng.random(8) * 0.4).tolist()
    from ripsph.filtration import weighted_dense_matrix
    data = validate_input(DistanceInput.dense(m))
    wm = weighted_dense_matrix(data, weights, 2)
    expected = oracle_barcode(wm.values.tolist(), 2)
    got = engine_pairs(
        DistanceInput.dense(m), max_dim=2, threshold=INF,
        weighting=ExplicitWeighting(weights, p_mix=2), backend="python",
    )
    assert got == expected


def test_sparse_auto_threshold_is_infinite():
    data = DistanceInput.sparse(4, [(0, 1, 1.0), (1, 2, 1.0)])
    report = compute_persistence(data, ComputeParams(max_dim=1, backend="python"))
    assert report.stats["threshold"] == INF
    assert "enclosing_radius" not in report.stats
    assert report.barcode.pairs(0).count((0.0, INF)) == 2


def test_overflow_guard_raises_before_allocation():
    data = DistanceInput.sparse(40_000, [(0, 1, 1.0)])
    with pytest.raises(IndexOverflow):
        compute_persistence(data, ComputeParams(max_dim=7, backend="python"))


def test_invalid_modulus_raises_not_prime():
    with pytest.raises(NotPrime):
        compute_persistence(UNIT_SQUARE, ComputeParams(modulus=4))


def test_single_point_and_empty_inputs():
    one = compute_persistence(DistanceInput.dense([[0.25]]),
                              ComputeParams(max_dim=1, backend="python"))
    assert one.barcode.pairs(0) == [(0.25, INF)]
    assert one.barcode.pairs(1) == []
    empty = compute_persistence(DistanceInput.sparse(0, []),
                                ComputeParams(max_dim=1, backend="python"))
    assert empty.barcode.pairs(0) == []


def test_max_dim_beyond_point_count():
    m = [[0, 1, 2], [1, 0, 3], [2, 3, 0]]
    got = engine_pairs(np.asarray(m, float), max_dim=5, threshold=INF)
    assert got[0] == oracle_barcode(m, 0)[0]
    assert all(got[d] == [] for d in range(2, 6))


def test_max_dim_zero():
    rng = np.random.default_rng(4)
    m = random_symmetric(rng, 6)
    got = engine_pairs(m, max_dim=0, threshold=INF, backend="python")
    assert got == oracle_barcode(m.tolist(), 0)


def test_stats_have_stage_timings_and_dim_counters():
    rng = np.random.default_rng(6)
    m = random_symmetric(rng, 9)
    report = compute_persistence(DistanceInput.dense(m),
                                 ComputeParams(max_dim=2, backend="python"))
    for key in ("time_validate_s", "time_threshold_s", "time_collapse_s",
                "time_dim0_s", "time_reduce_s", "time_total_s"):
        assert key in report.stats
    for d in (1, 2):
        for key in ("columns", "cleared", "apparent", "bars", "essential"):
            assert f"dim{d}_{key}" in report.stats
