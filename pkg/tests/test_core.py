import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from autopos import (
    Constellation,
    CovarianceMatrix2,
    ErrorClass,
    MeasurementMatrix,
    NodePosition,
    RangingMeasurement,
    euclidean_distance,
    trace,
)

coord = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


def test_euclidean_distance_examples():
    assert euclidean_distance(NodePosition(0, 0), NodePosition(4, 0)) == 4.0
    assert euclidean_distance(NodePosition(0, 0), NodePosition(0, 0)) == 0.0
    assert euclidean_distance(NodePosition(2, 3), NodePosition(4, 0)) == pytest.approx(
        math.sqrt(13), abs=1e-12
    )


@given(coord, coord, coord, coord)
def test_euclidean_distance_symmetry(ax, ay, bx, by):
    a, b = NodePosition(ax, ay), NodePosition(bx, by)
    assert euclidean_distance(a, b) == euclidean_distance(b, a)
    assert euclidean_distance(a, b) >= 0.0


@given(coord, coord, coord, coord, coord, coord)
def test_euclidean_distance_triangle_inequality(ax, ay, bx, by, cx, cy):
    a, b, c = NodePosition(ax, ay), NodePosition(bx, by), NodePosition(cx, cy)
    assert euclidean_distance(a, c) <= (
        euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-9
    )


def test_position_rejects_non_finite():
    with pytest.raises(ValueError):
        NodePosition(float("nan"), 0.0)
    with pytest.raises(ValueError):
        NodePosition(0.0, float("inf"))


def test_trace_examples():
    assert trace(CovarianceMatrix2.diagonal(0.04, 0.04)) == pytest.approx(0.08)
    assert trace(CovarianceMatrix2.zero()) == 0.0
    assert trace(CovarianceMatrix2(0.1, 0.02, 0.3)) == pytest.approx(0.4)


def test_covariance_rejects_indefinite():
    with pytest.raises(ValueError):
        CovarianceMatrix2(1.0, 2.0, 1.0)  # eigenvalues -1 and 3
    with pytest.raises(ValueError):
        CovarianceMatrix2(-1.0, 0.0, 1.0)


def test_covariance_from_matrix_symmetrizes_and_round_trips():
    m = np.array([[0.5, 0.1], [0.1, 0.2]])
    cov = CovarianceMatrix2.from_matrix(m)
    np.testing.assert_allclose(cov.as_matrix(), m)
    assert cov.as_matrix()[0, 1] == cov.as_matrix()[1, 0]


def test_constellation_rejects_coincident_nodes():
    with pytest.raises(ValueError):
        Constellation.from_coords([(0, 0), (0, 0), (1, 1)])


def test_ranging_measurement_invariants():
    with pytest.raises(ValueError):
        RangingMeasurement(1, 1, 2.0, ErrorClass.LOS)
    with pytest.raises(ValueError):
        RangingMeasurement(0, 1, None, ErrorClass.LOS)
    with pytest.raises(ValueError):
        RangingMeasurement(0, 1, 2.0, ErrorClass.FAILED)
    with pytest.raises(ValueError):
        RangingMeasurement(0, 1, -0.5, ErrorClass.LOS)


def _tiny_matrix():
    ranges = np.array([[np.nan, 3.0], [5.0, np.nan]])
    classes = np.array([[3, 0], [0, 3]], dtype=np.int8)
    return MeasurementMatrix(epoch=0, ranges=ranges, classes=classes)


def test_measurement_matrix_never_contains_self_measurement():
    m = _tiny_matrix()
    assert np.all(np.isnan(np.diagonal(m.ranges)))
    with pytest.raises(ValueError):
        m.measurement(0, 0)
    bad = np.array([[1.0, 3.0], [5.0, np.nan]])
    with pytest.raises(ValueError):
        MeasurementMatrix(epoch=0, ranges=bad, classes=np.zeros((2, 2), dtype=np.int8))


def test_pair_range_fusion():
    m = _tiny_matrix()
    assert m.pair_range(0, 1) == pytest.approx(4.0)  # mean of both directions
    ranges = np.array([[np.nan, np.nan], [5.0, np.nan]])
    classes = np.array([[3, 3], [0, 3]], dtype=np.int8)
    one_sided = MeasurementMatrix(epoch=0, ranges=ranges, classes=classes)
    assert one_sided.pair_range(0, 1) == pytest.approx(5.0)
    ranges = np.full((2, 2), np.nan)
    classes = np.full((2, 2), 3, dtype=np.int8)
    empty = MeasurementMatrix(epoch=0, ranges=ranges, classes=classes)
    assert empty.pair_range(0, 1) is None
