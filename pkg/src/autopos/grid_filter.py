"""Grid-based collaborative auto-positioning.

A discrete Bayes (histogram / point-mass) filter runs per node over a
finite equidistant grid.  Ranging observations originate from nodes
whose positions were already estimated, so the likelihood widens with
the originating node's positional uncertainty: for a range between
nodes a and b the combined noise scale is

    sigma_ab = sigma_r + sqrt(tr(Cov_a)) + sqrt(tr(Cov_b))

which propagates uncertainty through the network instead of treating
estimated nodes as perfectly known anchors.

Pipeline per epoch: node 0 is pinned to the origin, node 1 is estimated
by a one-dimensional filter on the positive x-axis, every further node
by a fresh two-dimensional filter fed with all available observations
from already-estimated nodes.  A node with at least one observation
always yields an estimate; ambiguity is encoded in the covariance
rather than reported as failure.  Beliefs can optionally be carried
across epochs (static nodes), in which case the prediction step applies
a small isotropic diffusion and a node stays valid once its belief has
ever been informed by an observation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import (
    CovarianceMatrix2,
    MeasurementMatrix,
    NodeEstimate,
    NodePosition,
    trace,
)

__all__ = [
    "GridDomain",
    "BeliefGrid",
    "GridObservation",
    "BeliefUnderflowError",
    "CgpConfig",
    "CgpState",
    "init_uniform",
    "predict",
    "combined_sigma",
    "update",
    "estimate",
    "estimate_a1_1d",
    "cgp_autoposition",
]

log = logging.getLogger(__name__)

_UNDERFLOW_TOTAL = 1e-300


class BeliefUnderflowError(ArithmeticError):
    """Total posterior mass underflowed after a likelihood multiplication."""


@dataclass(frozen=True)
class GridDomain:
    """Finite equidistant decomposition of the 2-D state space.

    Cell centers sit at (x_min + (i + 0.5) * cell_size,
    y_min + (j + 0.5) * cell_size); the linear cell index is row-major
    with y as the outer axis.
    """

    x_min: float
    y_min: float
    cell_size: float
    nx: int
    ny: int

    def __post_init__(self) -> None:
        if not self.cell_size > 0.0:
            raise ValueError(f"cell_size must be > 0, got {self.cell_size}")
        if self.nx * self.ny < 4:
            raise ValueError("grid needs at least 4 cells")

    @classmethod
    def from_bounds(
        cls, x_min: float, x_max: float, y_min: float, y_max: float, cell_size: float
    ) -> "GridDomain":
        nx = max(2, int(math.ceil((x_max - x_min) / cell_size)))
        ny = max(2, int(math.ceil((y_max - y_min) / cell_size)))
        return cls(x_min, y_min, cell_size, nx, ny)

    @classmethod
    def for_points(
        cls, points: np.ndarray, margin: float, cell_size: float
    ) -> "GridDomain":
        """Domain covering the bounding box of ``points`` plus a margin."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls.from_bounds(
            pts[:, 0].min() - margin,
            pts[:, 0].max() + margin,
            pts[:, 1].min() - margin,
            pts[:, 1].max() + margin,
            cell_size,
        )

    @property
    def x_max(self) -> float:
        return self.x_min + self.nx * self.cell_size

    @property
    def y_max(self) -> float:
        return self.y_min + self.ny * self.cell_size

    @property
    def cell_count(self) -> int:
        return self.nx * self.ny

    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.cell_size

    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.cell_size


@dataclass
class BeliefGrid:
    """Normalized probability mass over the cells of a GridDomain."""

    domain: GridDomain
    mass: np.ndarray  # shape (ny, nx), non-negative, sums to 1

    def __post_init__(self) -> None:
        self.mass = np.asarray(self.mass, dtype=float)
        if self.mass.shape != (self.domain.ny, self.domain.nx):
            raise ValueError(
                f"mass shape {self.mass.shape} does not match domain "
                f"({self.domain.ny}, {self.domain.nx})"
            )
        if np.any(self.mass < 0.0):
            raise ValueError("belief mass must be non-negative")

    def total(self) -> float:
        return float(self.mass.sum())

    def argmax_center(self) -> tuple[float, float]:
        """Center of the argmax cell; ties pick the lowest linear index."""
        flat = int(np.argmax(self.mass))
        iy, ix = divmod(flat, self.domain.nx)
        return (
            float(self.domain.x_centers()[ix]),
            float(self.domain.y_centers()[iy]),
        )

    def copy(self) -> "BeliefGrid":
        return BeliefGrid(self.domain, self.mass.copy())


@dataclass(frozen=True)
class GridObservation:
    """A range observation anchored at an already-estimated node."""

    origin: NodeEstimate
    range_m: float
    sigma_combined: float

    def __post_init__(self) -> None:
        if not self.origin.valid:
            raise ValueError("observation origin must be a valid estimate")
        if self.range_m < 0.0:
            raise ValueError(f"negative range {self.range_m}")
        if not self.sigma_combined > 0.0:
            raise ValueError(f"sigma_combined must be > 0, got {self.sigma_combined}")


def init_uniform(domain: GridDomain) -> BeliefGrid:
    """Uniform belief: every cell carries 1 / cell_count."""
    mass = np.full((domain.ny, domain.nx), 1.0 / domain.cell_count)
    return BeliefGrid(domain, mass)


def _gaussian_kernel(sigma_cells: float) -> np.ndarray:
    radius = max(1, int(math.ceil(4.0 * sigma_cells)))
    taps = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma_cells) ** 2)
    return taps / taps.sum()


def _blur_axis(mass: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0)] * mass.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(mass, pad, mode="symmetric")
    return np.apply_along_axis(np.convolve, axis, padded, kernel, "valid")


def predict(prior: BeliefGrid, sigma_pred_cells: float = 1.0) -> BeliefGrid:
    """Prediction step for static nodes: small isotropic diffusion.

    Convolves the belief with a discrete Gaussian of ``sigma_pred_cells``
    (separable, symmetric boundary) and renormalizes;
    ``sigma_pred_cells = 0`` degenerates to the identity kernel.
    """
    if sigma_pred_cells < 0.0:
        raise ValueError("sigma_pred_cells must be >= 0")
    if sigma_pred_cells == 0.0:
        return prior.copy()
    kernel = _gaussian_kernel(sigma_pred_cells)
    mass = _blur_axis(_blur_axis(prior.mass, kernel, 0), kernel, 1)
    return BeliefGrid(prior.domain, mass / mass.sum())


def combined_sigma(
    origin_cov: CovarianceMatrix2,
    peer_cov: Optional[CovarianceMatrix2],
    sigma_r: float,
) -> float:
    """Inter-node ranging noise scale with propagated uncertainties.

    ``peer_cov`` is None while the peer node has no estimate yet (it then
    contributes nothing).
    """
    sigma = sigma_r + math.sqrt(max(trace(origin_cov), 0.0))
    if peer_cov is not None:
        sigma += math.sqrt(max(trace(peer_cov), 0.0))
    return sigma


def _log_likelihood(
    domain: GridDomain, origin_x: float, origin_y: float, range_m: float, sigma: float
) -> np.ndarray:
    dist = np.hypot(
        domain.x_centers()[None, :] - origin_x,
        domain.y_centers()[:, None] - origin_y,
    )
    residual = dist - range_m
    return -0.5 * (residual / sigma) ** 2


def update(belief: BeliefGrid, obs: GridObservation) -> BeliefGrid:
    """Multiply the belief with one range likelihood and renormalize.

    The Gaussian likelihood is evaluated in log-space and shifted by its
    maximum before exponentiation; a total posterior mass below 1e-300
    raises BeliefUnderflowError (contradictory information), letting the
    caller fall back to re-initialization.
    """
    loglik = _log_likelihood(
        belief.domain, obs.origin.position.x, obs.origin.position.y, obs.range_m,
        obs.sigma_combined,
    )
    posterior = belief.mass * np.exp(loglik - loglik.max())
    total = posterior.sum()
    if not total >= _UNDERFLOW_TOTAL:
        raise BeliefUnderflowError(
            f"posterior mass {total:.3e} after range update from node "
            f"{obs.origin.node}"
        )
    return BeliefGrid(belief.domain, posterior / total)


def estimate(belief: BeliefGrid, node: int) -> NodeEstimate:
    """Point estimate and sample covariance from a belief.

    The position is the argmax cell center (ties resolve to the lowest
    linear index); the covariance is the belief-weighted spread around
    that argmax, so multi-modal or annular posteriors report large
    traces instead of false confidence.
    """
    x_hat, y_hat = belief.argmax_center()
    dx = belief.domain.x_centers() - x_hat
    dy = belief.domain.y_centers() - y_hat
    px = belief.mass.sum(axis=0)
    py = belief.mass.sum(axis=1)
    cov = CovarianceMatrix2(
        float(px @ (dx * dx)),
        float(dy @ belief.mass @ dx),
        float(py @ (dy * dy)),
    )
    return NodeEstimate(node, NodePosition(x_hat, y_hat), cov, valid=True)


# --- one-dimensional filter for node 1 on the positive x-axis ---------------


def _axis_centers(x_max: float, cell_size: float) -> np.ndarray:
    n = max(2, int(math.ceil(x_max / cell_size)))
    return (np.arange(n) + 0.5) * cell_size


def _axis_update(mass: np.ndarray, xs: np.ndarray, range_m: float, sigma: float) -> np.ndarray:
    loglik = -0.5 * ((xs - range_m) / sigma) ** 2
    posterior = mass * np.exp(loglik - loglik.max())
    total = posterior.sum()
    if not total >= _UNDERFLOW_TOTAL:
        raise BeliefUnderflowError(f"axis posterior mass {total:.3e}")
    return posterior / total


def _axis_blur(mass: np.ndarray, sigma_cells: float) -> np.ndarray:
    if sigma_cells == 0.0:
        return mass.copy()
    kernel = _gaussian_kernel(sigma_cells)
    radius = len(kernel) // 2
    padded = np.pad(mass, radius, mode="symmetric")
    blurred = np.convolve(padded, kernel, "valid")
    return blurred / blurred.sum()


def _axis_estimate(mass: np.ndarray, xs: np.ndarray) -> NodeEstimate:
    idx = int(np.argmax(mass))
    x_hat = float(xs[idx])
    var = float(mass @ (xs - x_hat) ** 2)
    return NodeEstimate(
        1, NodePosition(x_hat, 0.0), CovarianceMatrix2.diagonal(var, 0.0), valid=True
    )


def estimate_a1_1d(
    range_to_a0: Optional[float], x_max: float, cell_size: float, sigma: float
) -> NodeEstimate:
    """Estimate node 1 with a 1-D histogram filter on [0, x_max].

    The node sits on the positive x-axis by convention, so a single
    range to the origin fixes it up to noise.  Without that range the
    node is unsuccessful for this epoch.
    """
    if range_to_a0 is None:
        return NodeEstimate.invalid(1)
    xs = _axis_centers(x_max, cell_size)
    mass = np.full(xs.shape, 1.0 / xs.size)
    mass = _axis_update(mass, xs, range_to_a0, sigma)
    return _axis_estimate(mass, xs)


# --- collaborative pipeline --------------------------------------------------


@dataclass(frozen=True)
class CgpConfig:
    """Settings of the collaborative grid pipeline.

    The consistency gate only acts in carry-over mode: each pair keeps a
    rolling window of its raw directed ranges, and a range outside
    [ref - gate_sigma_low * sigma_r, ref + gate_sigma_high * sigma_r] is
    skipped for that epoch, where ref is a low quantile of the window.
    Accumulated Gaussian evidence is a mean estimator, so without the
    gate even a small share of gross outliers drags the converged map.
    The reference is a LOW quantile (not the median) and the acceptance
    band is asymmetric because multipath and in-range outliers corrupt
    ranges almost exclusively upward: the line-of-sight cluster is the
    lowest mode of the range stream.  The window records the raw stream
    unconditionally and never consults the belief, so a badly
    initialized node cannot lock itself in.  gate_sigma_low = 0 disables
    gating.

    ``uniform_mix`` regularizes the carried transition by mixing a tiny
    uniform component into each predicted belief, keeping every cell
    revivable (a pure product of likelihoods zeroes out remote cells
    forever in floating point).
    """

    domain: GridDomain
    sigma_r: float
    sigma_pred_cells: float = 1.0
    carry_beliefs: bool = False
    gate_sigma_low: float = 3.0
    gate_sigma_high: float = 2.5
    uniform_mix: float = 1e-30

    def __post_init__(self) -> None:
        if not self.sigma_r > 0.0:
            raise ValueError("sigma_r must be > 0")
        if self.sigma_pred_cells < 0.0:
            raise ValueError("sigma_pred_cells must be >= 0")
        if self.gate_sigma_low < 0.0 or self.gate_sigma_high < 0.0:
            raise ValueError("gate thresholds must be >= 0")
        if not 0.0 <= self.uniform_mix < 1.0:
            raise ValueError("uniform_mix must be in [0, 1)")


@dataclass
class CgpState:
    """Carry-over state between epochs (static-node operation).

    ``informed`` tracks which node beliefs have ever absorbed at least
    one observation; only informed beliefs yield valid estimates.
    """

    axis_mass: Optional[np.ndarray] = None
    beliefs: dict[int, BeliefGrid] = field(default_factory=dict)
    informed: set[int] = field(default_factory=set)
    last_estimates: dict[int, NodeEstimate] = field(default_factory=dict)
    range_history: dict[tuple[int, int], list[float]] = field(default_factory=dict)


def _positive_half_plane(belief: BeliefGrid) -> BeliefGrid:
    """Zero all mass strictly below the x-axis and renormalize."""
    mask = belief.domain.y_centers() < 0.0
    if not mask.any():
        return belief
    mass = belief.mass.copy()
    mass[mask, :] = 0.0
    total = mass.sum()
    if total <= 0.0:
        raise ValueError("half-plane constraint removed all belief mass")
    return BeliefGrid(belief.domain, mass / total)


def _peer_trace_cov(
    config: CgpConfig, state: CgpState, node: int
) -> Optional[CovarianceMatrix2]:
    if not config.carry_beliefs:
        return None
    prior = state.last_estimates.get(node)
    if prior is not None and prior.valid:
        return prior.covariance
    return None


_GATE_WINDOW = 31
_GATE_MIN_HISTORY = 4
_GATE_QUANTILE = 0.3
_ACQUIRED_TRACE_CELLS = 2.0


def _still_acquiring(config: CgpConfig, state: CgpState, node: int) -> bool:
    """A node counts as acquiring until its prior spread is within cells."""
    prior = state.last_estimates.get(node)
    if prior is None or not prior.valid:
        return True
    limit = _ACQUIRED_TRACE_CELLS * config.domain.cell_size
    return math.sqrt(max(trace(prior.covariance), 0.0)) > limit


def _gated_pair_range(
    config: CgpConfig,
    old_state: CgpState,
    new_state: CgpState,
    matrix: MeasurementMatrix,
    a: int,
    b: int,
) -> Optional[float]:
    """Direction-fused range for pair {a, b} after the consistency gate.

    Every raw directed range is recorded in a short rolling window for
    the pair; each direction is gated individually against the window
    median and only accepted directions are averaged.  Gating one
    direction at a time matters: averaging first would let a single
    corrupted direction shift the fused value (and, in heavily corrupted
    scenarios, poison the median itself).  The window tracks the raw
    stream unconditionally, so a corrupted start cannot lock the gate.

    Returns None when nothing was measured or nothing passed the gate.
    """
    raw = [
        float(r)
        for r in (matrix.ranges[a, b], matrix.ranges[b, a])
        if not math.isnan(r)
    ]
    if not raw:
        return None
    key = (min(a, b), max(a, b))
    updated = (old_state.range_history.get(key, []) + raw)[-_GATE_WINDOW:]
    new_state.range_history[key] = updated
    if (
        not config.carry_beliefs
        or config.gate_sigma_low == 0.0
        or len(updated) < _GATE_MIN_HISTORY
    ):
        return float(np.mean(raw))
    ref = float(np.quantile(updated, _GATE_QUANTILE))
    lo = ref - config.gate_sigma_low * config.sigma_r
    hi = ref + config.gate_sigma_high * config.sigma_r
    accepted = [r for r in raw if lo <= r <= hi]
    if not accepted:
        return None
    return float(np.mean(accepted))


def _mix_uniform(mass: np.ndarray, mix: float) -> np.ndarray:
    """Regularizing transition part: keep every cell revivable.

    A carried belief otherwise collapses to exact zeros almost
    everywhere, after which no evidence can ever move the node again.
    """
    if mix == 0.0:
        return mass
    return (1.0 - mix) * mass + mix / mass.size


def cgp_autoposition(
    matrix: MeasurementMatrix,
    config: CgpConfig,
    state: Optional[CgpState] = None,
) -> tuple[list[NodeEstimate], CgpState]:
    """Estimate all node positions of one epoch on the shared grid.

    Node 0 is fixed at the origin with zero covariance; node 1 runs the
    1-D axis filter; nodes 2..N-1 run 2-D filters in index order, each
    updated with every available (direction-fused) range whose origin
    already has a valid estimate this epoch.  Node 2 additionally has
    its belief restricted to the upper half-plane, which pins the
    reflection degree of freedom of the frame.

    With ``config.carry_beliefs`` the per-node posteriors survive into
    the next call via the returned state (pass it back in); prediction
    then applies the configured diffusion before the epoch's updates.
    """
    n = matrix.node_count
    if n < 3:
        raise ValueError(f"pipeline requires at least 3 nodes, got {n}")
    carry = config.carry_beliefs
    state = state if (carry and state is not None) else CgpState()
    new_state = CgpState()
    # pair windows persist even across epochs where a pair is unmeasured
    # or its nodes yield no valid origin
    new_state.range_history = {k: list(v) for k, v in state.range_history.items()}

    estimates: list[NodeEstimate] = [
        NodeEstimate(0, NodePosition(0.0, 0.0), CovarianceMatrix2.zero(), valid=True)
    ]

    # node 1: one-dimensional filter along the positive x-axis
    xs = _axis_centers(config.domain.x_max, config.domain.cell_size)
    if carry and state.axis_mass is not None:
        axis_mass = _axis_blur(state.axis_mass, config.sigma_pred_cells)
        axis_mass = _mix_uniform(axis_mass, config.uniform_mix)
    else:
        axis_mass = np.full(xs.shape, 1.0 / xs.size)
    r01 = _gated_pair_range(config, state, new_state, matrix, 0, 1)
    axis_informed = 1 in state.informed
    if r01 is not None:
        peer = _peer_trace_cov(config, state, 1)
        sigma = combined_sigma(CovarianceMatrix2.zero(), peer, config.sigma_r)
        try:
            axis_mass = _axis_update(axis_mass, xs, r01, sigma)
            axis_informed = True
        except BeliefUnderflowError:
            log.warning(
                "node 1 belief underflow at epoch %d, re-initialized", matrix.epoch
            )
            axis_mass = np.full(xs.shape, 1.0 / xs.size)
            axis_mass = _axis_update(axis_mass, xs, r01, sigma)
            axis_informed = True
    if axis_informed:
        estimates.append(_axis_estimate(axis_mass, xs))
    else:
        estimates.append(NodeEstimate.invalid(1))
    new_state.axis_mass = axis_mass
    if axis_informed:
        new_state.informed.add(1)

    # nodes 2..N-1: two-dimensional filters in index order
    for node in range(2, n):
        prior = state.beliefs.get(node)
        if carry and prior is not None:
            belief = predict(prior, config.sigma_pred_cells)
            belief = BeliefGrid(belief.domain, _mix_uniform(belief.mass, config.uniform_mix))
        else:
            belief = init_uniform(config.domain)
        if node == 2:
            belief = _positive_half_plane(belief)

        peer = _peer_trace_cov(config, state, node)
        origins = [e for e in estimates if e.valid]
        if carry and _still_acquiring(config, state, node):
            # while a node is still acquiring, estimates of later-indexed
            # nodes from the previous epoch also serve as origins:
            # information then flows both ways through the network, which
            # pins down nodes whose few lower-indexed origins
            # discriminate poorly (mirror-like ambiguities).  Converged
            # nodes stick to lower-indexed origins; permanent mutual
            # evidence would freeze the network onto a self-consistent
            # warp of the true map.
            origins += [
                prior_e
                for k, prior_e in sorted(state.last_estimates.items())
                if k > node and prior_e.valid
            ]
        observations = []
        for origin in origins:
            r = _gated_pair_range(config, state, new_state, matrix, origin.node, node)
            if r is None:
                continue
            observations.append(
                GridObservation(
                    origin, r, combined_sigma(origin.covariance, peer, config.sigma_r)
                )
            )

        for obs in observations:
            try:
                belief = update(belief, obs)
            except BeliefUnderflowError:
                log.warning(
                    "node %d belief underflow at epoch %d, re-initialized",
                    node,
                    matrix.epoch,
                )
                belief = init_uniform(config.domain)
                if node == 2:
                    belief = _positive_half_plane(belief)
                belief = update(belief, obs)

        informed = (node in state.informed) or bool(observations)
        if informed:
            estimates.append(estimate(belief, node))
            new_state.informed.add(node)
        else:
            estimates.append(NodeEstimate.invalid(node))
        new_state.beliefs[node] = belief

    new_state.last_estimates = {e.node: e for e in estimates if e.valid}
    return estimates, new_state
