"""Shared domain types and geometric primitives.

All coordinates are expressed in the local frame fixed by the
auto-positioning conventions: node 0 at the origin, node 1 on the
positive x-axis, node 2 in the upper half-plane.  Units are meters
throughout; covariances are meters squared.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

# Node indices are plain non-negative ints; index 0 is the frame origin.
NodeId = int

_PSD_EIG_TOL = 1e-12


class ErrorClass(enum.IntEnum):
    """Ground-truth label of a simulated ranging measurement.

    Assigned by the simulator, opaque to the estimators.
    """

    LOS = 0
    NLOS = 1
    OUTLIER = 2
    FAILED = 3


@dataclass(frozen=True)
class NodePosition:
    """2-D coordinate of a network node, meters."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def euclidean_distance(a: NodePosition, b: NodePosition) -> float:
    """Euclidean distance between two positions, meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class CovarianceMatrix2:
    """Symmetric positive-semidefinite 2x2 covariance, meters squared.

    Symmetry is structural (only the three independent entries are
    stored); positive semidefiniteness is asserted at construction.
    """

    xx: float
    xy: float
    yy: float

    def __post_init__(self) -> None:
        # smallest eigenvalue of [[xx, xy], [xy, yy]]
        half_gap = math.hypot((self.xx - self.yy) / 2.0, self.xy)
        eig_min = (self.xx + self.yy) / 2.0 - half_gap
        if eig_min < -_PSD_EIG_TOL:
            raise ValueError(f"covariance not PSD (min eigenvalue {eig_min:.3e})")

    @classmethod
    def zero(cls) -> "CovarianceMatrix2":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def diagonal(cls, var_x: float, var_y: float) -> "CovarianceMatrix2":
        return cls(var_x, 0.0, var_y)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "CovarianceMatrix2":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"expected 2x2 matrix, got shape {m.shape}")
        return cls(float(m[0, 0]), float((m[0, 1] + m[1, 0]) / 2.0), float(m[1, 1]))

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.xx, self.xy], [self.xy, self.yy]], dtype=float)


def trace(c: CovarianceMatrix2) -> float:
    """Sum of the diagonal entries, meters squared."""
    return c.xx + c.yy


@dataclass(frozen=True)
class NodeEstimate:
    """Estimated node position with its 2x2 sample covariance.

    An invalid estimate carries no usable position or covariance and
    must not be consumed downstream.
    """

    node: NodeId
    position: NodePosition
    covariance: CovarianceMatrix2
    valid: bool = True

    @classmethod
    def invalid(cls, node: NodeId) -> "NodeEstimate":
        return cls(node, NodePosition(0.0, 0.0), CovarianceMatrix2.zero(), valid=False)


@dataclass(frozen=True)
class Constellation:
    """Ground-truth node layout; positions are ordered by node index."""

    positions: tuple[NodePosition, ...]

    def __post_init__(self) -> None:
        if len(self.positions) < 1:
            raise ValueError("constellation must contain at least one node")
        pts = self.as_array()
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(dist, np.inf)
        if np.any(dist <= 0.0):
            raise ValueError("constellation contains coincident nodes")

    @classmethod
    def from_coords(cls, coords: Sequence[Sequence[float]]) -> "Constellation":
        return cls(tuple(NodePosition(float(x), float(y)) for x, y in coords))

    @property
    def count(self) -> int:
        return len(self.positions)

    def as_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.positions], dtype=float)

    def distance_matrix(self) -> np.ndarray:
        """Pairwise true distances, shape (N, N), zeros on the diagonal."""
        pts = self.as_array()
        diff = pts[:, None, :] - pts[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


@dataclass(frozen=True)
class RangingMeasurement:
    """One directed ranging attempt between two distinct nodes.

    ``range_m`` is None exactly when the measurement failed.
    """

    from_node: NodeId
    to_node: NodeId
    range_m: Optional[float]
    error_class: ErrorClass

    def __post_init__(self) -> None:
        if self.from_node == self.to_node:
            raise ValueError("self-measurement is not allowed")
        failed = self.error_class is ErrorClass.FAILED
        if failed != (self.range_m is None):
            raise ValueError("range must be None iff the measurement failed")
        if self.range_m is not None and self.range_m < 0.0:
            raise ValueError(f"negative range {self.range_m}")


@dataclass
class MeasurementMatrix:
    """Directed pairwise ranging measurements for one epoch.

    ``ranges[i, j]`` is the measured range of the (i -> j) attempt, NaN
    when failed; entries (i, j) and (j, i) are independent.  The
    diagonal is absent by construction (NaN, class FAILED is never read).
    """

    epoch: int
    ranges: np.ndarray  # (N, N) float, NaN = failed / absent
    classes: np.ndarray  # (N, N) int8 of ErrorClass values

    def __post_init__(self) -> None:
        self.ranges = np.asarray(self.ranges, dtype=float)
        self.classes = np.asarray(self.classes, dtype=np.int8)
        n = self.ranges.shape[0]
        if self.ranges.shape != (n, n) or self.classes.shape != (n, n):
            raise ValueError("ranges and classes must be square and congruent")
        if not np.all(np.isnan(np.diagonal(self.ranges))):
            raise ValueError("diagonal entries must be absent")
        off = ~np.eye(n, dtype=bool)
        valid = ~np.isnan(self.ranges)
        if np.any(valid & ~off):
            raise ValueError("self-measurements are not allowed")
        if np.any(self.ranges[valid] < 0.0):
            raise ValueError("negative range in measurement matrix")
        failed_marked = self.classes == int(ErrorClass.FAILED)
        if np.any(off & np.isnan(self.ranges) & ~failed_marked):
            raise ValueError("missing range without FAILED class")
        if np.any(off & valid & failed_marked):
            raise ValueError("FAILED class with a present range")

    @property
    def node_count(self) -> int:
        return self.ranges.shape[0]

    def measurement(self, i: NodeId, j: NodeId) -> RangingMeasurement:
        """Directed measurement record for the ordered pair (i, j)."""
        if i == j:
            raise ValueError("no self-measurements on the diagonal")
        r = self.ranges[i, j]
        cls = ErrorClass(int(self.classes[i, j]))
        return RangingMeasurement(i, j, None if np.isnan(r) else float(r), cls)

    def pair_range(self, i: NodeId, j: NodeId) -> Optional[float]:
        """Direction-fused range for the unordered pair {i, j}.

        Arithmetic mean when both directed measurements are present, the
        available one otherwise, None when both failed.
        """
        rij, rji = self.ranges[i, j], self.ranges[j, i]
        have_ij, have_ji = not np.isnan(rij), not np.isnan(rji)
        if have_ij and have_ji:
            return float((rij + rji) / 2.0)
        if have_ij:
            return float(rij)
        if have_ji:
            return float(rji)
        return None

    def iter_measurements(self) -> Iterator[RangingMeasurement]:
        n = self.node_count
        for i in range(n):
            for j in range(n):
                if i != j:
                    yield self.measurement(i, j)
