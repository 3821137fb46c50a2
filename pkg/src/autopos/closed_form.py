"""Baseline closed-form auto-positioning.

The first three nodes fix the local frame analytically: node 0 at the
origin, node 1 on the positive x-axis at its measured distance, node 2
in the upper half-plane from the triangle of pairwise ranges.  Every
further node is placed by least-squares trilateration against all
previously placed nodes.  The method is intentionally strict about
availability: a node whose prerequisite ranges are missing stays
unplaced for that epoch, and overall success requires every node.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    CovarianceMatrix2,
    MeasurementMatrix,
    NodeEstimate,
    NodeId,
    NodePosition,
)

__all__ = [
    "CfFailureReason",
    "CfError",
    "CfResult",
    "place_frame_anchors",
    "trilaterate_lse",
    "cf_autoposition",
]

_MAX_ITER = 50
_STEP_TOL = 1e-6
_COND_LIMIT = 1e8


class CfFailureReason(enum.Enum):
    MISSING_RANGE = "missing_range"
    NEGATIVE_DISCRIMINANT = "negative_discriminant"
    DEGENERATE_GEOMETRY = "degenerate_geometry"
    INSUFFICIENT_RANGES = "insufficient_ranges"


class CfError(ValueError):
    """Placement failure with a machine-readable reason."""

    def __init__(self, reason: CfFailureReason, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class CfResult:
    """Per-epoch outcome of the closed-form pipeline.

    ``estimates`` carries one entry per node (covariance zero, the
    closed form does not quantify uncertainty); ``failure_reasons`` maps
    each invalid node to why it could not be placed.
    """

    estimates: tuple[NodeEstimate, ...]
    failure_reasons: dict[NodeId, CfFailureReason] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return all(e.valid for e in self.estimates)


def place_frame_anchors(
    d01: float, d02: float, d12: float
) -> tuple[NodePosition, NodePosition, NodePosition]:
    """Place the three frame nodes from their pairwise ranges.

    Node 0 sits at the origin, node 1 at (d01, 0); node 2 resolves to
        x2 = (d01^2 + d02^2 - d12^2) / (2 * d01)
        y2 = +sqrt(d02^2 - x2^2)
    with the positive root enforcing the upper-half-plane convention.

    Raises CfError(DEGENERATE_GEOMETRY) when d01 is zero and
    CfError(NEGATIVE_DISCRIMINANT) when the ranges violate the triangle
    inequality (y2 would be imaginary).
    """
    if min(d01, d02, d12) < 0.0:
        raise CfError(CfFailureReason.DEGENERATE_GEOMETRY, "negative range")
    if d01 == 0.0:
        raise CfError(
            CfFailureReason.DEGENERATE_GEOMETRY, "nodes 0 and 1 are coincident (d01 = 0)"
        )
    x2 = (d02 * d02 - d12 * d12 + d01 * d01) / (2.0 * d01)
    y2_sq = d02 * d02 - x2 * x2
    if y2_sq < 0.0:
        raise CfError(
            CfFailureReason.NEGATIVE_DISCRIMINANT,
            f"inconsistent triangle (d01={d01}, d02={d02}, d12={d12})",
        )
    return (
        NodePosition(0.0, 0.0),
        NodePosition(d01, 0.0),
        NodePosition(x2, math.sqrt(y2_sq)),
    )


def _objective(x: np.ndarray, anchors: np.ndarray, ranges: np.ndarray) -> float:
    dists = np.hypot(*(x - anchors).T)
    return float(np.sum((dists - ranges) ** 2))


def trilaterate_lse(
    anchors: Sequence[Sequence[float]] | np.ndarray, ranges: Sequence[float]
) -> NodePosition:
    """Gauss-Newton least-squares position fix from >= 3 anchor ranges.

    Minimizes sum_k (||X - A_k|| - r_k)^2 starting from the anchor
    centroid; converged when the step norm drops below 1e-6 m within 50
    iterations.  Raises CfError(INSUFFICIENT_RANGES) for fewer than
    three pairs and CfError(DEGENERATE_GEOMETRY) for near-collinear
    anchor sets (normal-equation condition number above 1e8) or
    non-convergence.
    """
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 2)
    ranges = np.asarray(ranges, dtype=float)
    if anchors.shape[0] != ranges.shape[0]:
        raise ValueError("anchors and ranges must pair up")
    if anchors.shape[0] < 3:
        raise CfError(
            CfFailureReason.INSUFFICIENT_RANGES,
            f"need >= 3 anchor ranges, got {anchors.shape[0]}",
        )

    x = anchors.mean(axis=0)
    for _ in range(_MAX_ITER):
        diff = x - anchors
        dists = np.maximum(np.hypot(diff[:, 0], diff[:, 1]), 1e-12)
        residuals = dists - ranges
        jac = diff / dists[:, None]
        jtj = jac.T @ jac
        if np.linalg.cond(jtj) > _COND_LIMIT:
            raise CfError(
                CfFailureReason.DEGENERATE_GEOMETRY, "anchors are collinear within tolerance"
            )
        step = np.linalg.solve(jtj, -jac.T @ residuals)
        x = x + step
        if np.hypot(step[0], step[1]) < _STEP_TOL:
            break
    else:
        raise CfError(CfFailureReason.DEGENERATE_GEOMETRY, "trilateration did not converge")

    # mirror ties (all anchors on the x-axis) resolve toward positive y
    if x[1] < 0.0:
        mirrored = np.array([x[0], -x[1]])
        obj = _objective(x, anchors, ranges)
        if abs(_objective(mirrored, anchors, ranges) - obj) <= 1e-12 * (1.0 + obj):
            x = mirrored
    return NodePosition(float(x[0]), float(x[1]))


def cf_autoposition(matrix: MeasurementMatrix) -> CfResult:
    """Run the closed-form pipeline on one epoch's measurement matrix.

    Directed pairs are fused by arithmetic mean before use.  Per-node
    failures (missing ranges, inconsistent frame triangle, degenerate
    trilateration) are recorded and never abort the epoch.
    """
    n = matrix.node_count
    if n < 3:
        raise ValueError(f"closed form requires at least 3 nodes, got {n}")

    zero = CovarianceMatrix2.zero()
    estimates: list[NodeEstimate] = [
        NodeEstimate(0, NodePosition(0.0, 0.0), zero, valid=True)
    ]
    reasons: dict[NodeId, CfFailureReason] = {}

    d01 = matrix.pair_range(0, 1)
    d02 = matrix.pair_range(0, 2)
    d12 = matrix.pair_range(1, 2)

    if d01 is None:
        reasons[1] = CfFailureReason.MISSING_RANGE
        reasons[2] = CfFailureReason.MISSING_RANGE
        estimates.append(NodeEstimate.invalid(1))
        estimates.append(NodeEstimate.invalid(2))
    elif d01 == 0.0:
        reasons[1] = CfFailureReason.DEGENERATE_GEOMETRY
        reasons[2] = CfFailureReason.DEGENERATE_GEOMETRY
        estimates.append(NodeEstimate.invalid(1))
        estimates.append(NodeEstimate.invalid(2))
    else:
        estimates.append(NodeEstimate(1, NodePosition(d01, 0.0), zero, valid=True))
        if d02 is None or d12 is None:
            reasons[2] = CfFailureReason.MISSING_RANGE
            estimates.append(NodeEstimate.invalid(2))
        else:
            try:
                _, _, a2 = place_frame_anchors(d01, d02, d12)
                estimates.append(NodeEstimate(2, a2, zero, valid=True))
            except CfError as err:
                reasons[2] = err.reason
                estimates.append(NodeEstimate.invalid(2))

    for node in range(3, n):
        anchor_pos = []
        anchor_ranges = []
        for est in estimates:
            if not est.valid:
                continue
            r = matrix.pair_range(est.node, node)
            if r is not None:
                anchor_pos.append([est.position.x, est.position.y])
                anchor_ranges.append(r)
        try:
            pos = trilaterate_lse(np.array(anchor_pos).reshape(-1, 2), anchor_ranges)
            estimates.append(NodeEstimate(node, pos, zero, valid=True))
        except CfError as err:
            reasons[node] = err.reason
            estimates.append(NodeEstimate.invalid(node))

    return CfResult(estimates=tuple(estimates), failure_reasons=reasons)
