import math

import numpy as np
import pytest

from autopos import (
    CfError,
    CfFailureReason,
    cf_autoposition,
    place_frame_anchors,
    trilaterate_lse,
)

from conftest import drop_directed, drop_pair, exact_matrix
from oracles import grid_search_trilateration


def test_frame_from_exact_triangle():
    a0, a1, a2 = place_frame_anchors(4.0, math.sqrt(13), math.sqrt(13))
    assert (a0.x, a0.y) == (0.0, 0.0)
    assert (a1.x, a1.y) == (4.0, 0.0)
    assert a2.x == pytest.approx(2.0, abs=1e-12)
    assert a2.y == pytest.approx(3.0, abs=1e-12)

    _, _, a2 = place_frame_anchors(2.0, math.sqrt(2), math.sqrt(2))
    assert a2.x == pytest.approx(1.0, abs=1e-12)
    assert a2.y == pytest.approx(1.0, abs=1e-12)


def test_frame_negative_discriminant():
    # x2 = 7 while d02 = 5: y2^2 = 25 - 49 < 0
    with pytest.raises(CfError) as err:
        place_frame_anchors(2.0, 5.0, 1.0)
    assert err.value.reason is CfFailureReason.NEGATIVE_DISCRIMINANT


def test_frame_degenerate_on_zero_baseline():
    with pytest.raises(CfError) as err:
        place_frame_anchors(0.0, 3.0, 3.0)
    assert err.value.reason is CfFailureReason.DEGENERATE_GEOMETRY


def test_frame_half_plane_convention():
    for d01, d02, d12 in [(5.0, 4.0, 3.0), (3.0, 6.0, 5.0), (8.0, 5.0, 5.0)]:
        _, _, a2 = place_frame_anchors(d01, d02, d12)
        assert a2.y >= 0.0


ANCHORS = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 3.0]])


def test_trilateration_zero_residual():
    target = np.array([1.0, 1.0])
    ranges = np.hypot(*(ANCHORS - target).T)
    pos = trilaterate_lse(ANCHORS, ranges)
    assert math.hypot(pos.x - 1.0, pos.y - 1.0) < 1e-6


def test_trilateration_perturbed_matches_grid_search():
    target = np.array([1.0, 1.0])
    ranges = np.hypot(*(ANCHORS - target).T) + 0.1
    pos = trilaterate_lse(ANCHORS, ranges)
    ref = grid_search_trilateration(ANCHORS, ranges)
    assert math.hypot(pos.x - ref[0], pos.y - ref[1]) < 2e-3


def test_trilateration_insufficient_ranges():
    with pytest.raises(CfError) as err:
        trilaterate_lse(ANCHORS[:2], [1.0, 2.0])
    assert err.value.reason is CfFailureReason.INSUFFICIENT_RANGES


def test_trilateration_collinear_anchors_degenerate():
    collinear = np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]])
    with pytest.raises(CfError) as err:
        trilaterate_lse(collinear, [1.0, 1.0, 1.0])
    assert err.value.reason is CfFailureReason.DEGENERATE_GEOMETRY


def test_autoposition_exact_recovery(exact4):
    result = cf_autoposition(exact_matrix(exact4))
    assert result.success
    truth = exact4.as_array()
    for est in result.estimates:
        assert est.valid
        err = math.hypot(
            est.position.x - truth[est.node, 0], est.position.y - truth[est.node, 1]
        )
        assert err < 1e-9


def test_autoposition_frame_gauge(exact4):
    result = cf_autoposition(exact_matrix(exact4))
    assert (result.estimates[0].position.x, result.estimates[0].position.y) == (0.0, 0.0)
    assert result.estimates[1].position.y == 0.0
    assert result.estimates[2].position.y >= 0.0


def test_autoposition_missing_baseline(exact4):
    matrix = drop_pair(exact_matrix(exact4), 0, 1)
    result = cf_autoposition(matrix)
    assert not result.success
    assert result.failure_reasons[1] is CfFailureReason.MISSING_RANGE
    assert not result.estimates[1].valid
    assert not result.estimates[2].valid


def test_autoposition_uses_single_direction(exact4):
    # dropping one direction of the baseline must not hurt: fusion falls
    # back to the surviving directed measurement
    matrix = drop_directed(exact_matrix(exact4), 0, 1)
    result = cf_autoposition(matrix)
    assert result.success


def test_direction_average_invariance(exact4):
    matrix = exact_matrix(exact4)
    perturbed = matrix.ranges.copy()
    perturbed[0, 1] = 4.2
    perturbed[1, 0] = 3.8
    swapped = perturbed.copy()
    swapped[0, 1], swapped[1, 0] = swapped[1, 0], swapped[0, 1]
    from autopos import MeasurementMatrix

    r1 = cf_autoposition(
        MeasurementMatrix(epoch=0, ranges=perturbed, classes=matrix.classes)
    )
    r2 = cf_autoposition(
        MeasurementMatrix(epoch=0, ranges=swapped, classes=matrix.classes)
    )
    for e1, e2 in zip(r1.estimates, r2.estimates):
        assert e1.position == e2.position


def test_missing_range_to_new_node_fails_that_node(exact4):
    # node 3 keeps only 2 of its 3 anchor pairs: insufficient
    matrix = drop_pair(exact_matrix(exact4), 1, 3)
    result = cf_autoposition(matrix)
    assert not result.estimates[3].valid
    assert result.failure_reasons[3] is CfFailureReason.INSUFFICIENT_RANGES
    assert not result.success


def test_success_monotonicity(exact4):
    # removing measurements never turns a failed node into a successful one
    base = drop_pair(exact_matrix(exact4), 1, 3)
    base_result = cf_autoposition(base)
    weaker = drop_pair(base, 2, 3)
    weaker_result = cf_autoposition(weaker)
    for b, w in zip(base_result.estimates, weaker_result.estimates):
        if not b.valid:
            assert not w.valid
