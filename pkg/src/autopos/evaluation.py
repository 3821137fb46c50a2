"""Error metrics and frame alignment for estimator comparison.

Range-only networks fix their coordinate frame only up to translation,
rotation and reflection, so before errors are computed the ground truth
is re-expressed in the estimator's gauge: node 0 at the origin, node 1
on the positive x-axis, node 2 with non-negative y.  The gauge is exact
(no least-squares fitting), after which per-node errors are plain
euclidean distances.

Metrics follow the usual positioning-benchmark conventions: RMSE over
successful estimates, 68.27 / 95.45 / 99.73 empirical error percentiles
(nearest-rank), success rates, and the full ECDF.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import Constellation, NodeEstimate

__all__ = [
    "ErrorSample",
    "MethodMetrics",
    "EvalReport",
    "transform_to_gauge",
    "align_frame",
    "collect_samples",
    "compute_report",
    "write_report_csv",
    "write_ecdf_csv",
    "write_errors_csv",
]

QUANTILE_LEVELS = (0.6827, 0.9545, 0.9973)


@dataclass(frozen=True)
class ErrorSample:
    """Post-alignment euclidean error of one node estimate.

    ``position_error`` is NaN when the estimation was unsuccessful.
    """

    epoch: int
    node: int
    method: str
    position_error: float
    success: bool

    def __post_init__(self) -> None:
        if self.success and not self.position_error >= 0.0:
            raise ValueError("successful sample needs a non-negative error")


@dataclass(frozen=True)
class MethodMetrics:
    """Aggregate metrics of one method over a batch.

    All error metrics are NaN when no estimate succeeded.
    """

    rmse: float
    q1: float
    q2: float
    q3: float
    success_rate: float  # fraction of attempted node estimations
    epoch_success_rate: float  # fraction of epochs with every node valid
    n_attempted: int
    n_success: int
    ecdf_errors: np.ndarray  # sorted successful errors
    ecdf_fractions: np.ndarray  # cumulative fractions, ends at 1


@dataclass(frozen=True)
class EvalReport:
    methods: dict[str, MethodMetrics]


def transform_to_gauge(truth: np.ndarray) -> np.ndarray:
    """Re-express ground-truth coordinates in the gauge frame.

    Translates node 0 to the origin, rotates node 1 onto the positive
    x-axis and reflects about the x-axis if node 2 ends up below it.
    """
    pts = np.asarray(truth, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise ValueError("gauge transform needs at least 3 nodes")
    shifted = pts - pts[0]
    theta = math.atan2(shifted[1, 1], shifted[1, 0])
    c, s = math.cos(-theta), math.sin(-theta)
    rot = np.array([[c, -s], [s, c]])
    aligned = shifted @ rot.T
    if aligned[2, 1] < 0.0:
        aligned = aligned * np.array([1.0, -1.0])
    return aligned


def align_frame(
    estimates: Sequence[NodeEstimate], truth: Constellation
) -> Optional[np.ndarray]:
    """Gauge-frame truth for comparing against ``estimates``.

    Returns None when node 1 has no valid estimate: the estimator never
    realized its frame, so no node of this epoch is comparable.
    """
    if len(estimates) != truth.count:
        raise ValueError("estimates and truth must cover the same nodes")
    if not estimates[1].valid:
        return None
    return transform_to_gauge(truth.as_array())


def collect_samples(
    epoch: int,
    method: str,
    estimates: Sequence[NodeEstimate],
    truth: Constellation,
) -> list[ErrorSample]:
    """Error samples for nodes 1..N-1 of one epoch.

    Node 0 is the frame origin by construction and is not an estimate.
    """
    gauge = align_frame(estimates, truth)
    samples = []
    for node in range(1, truth.count):
        est = estimates[node]
        if gauge is None or not est.valid:
            samples.append(ErrorSample(epoch, node, method, math.nan, success=False))
            continue
        err = math.hypot(
            est.position.x - gauge[node, 0], est.position.y - gauge[node, 1]
        )
        samples.append(ErrorSample(epoch, node, method, err, success=True))
    return samples


def _nearest_rank(sorted_errors: np.ndarray, level: float) -> float:
    rank = max(1, math.ceil(level * sorted_errors.size))
    return float(sorted_errors[rank - 1])


def compute_report(samples: Sequence[ErrorSample]) -> EvalReport:
    """Aggregate a batch of error samples into per-method metrics."""
    if not samples:
        raise ValueError("compute_report requires at least one sample")
    methods: dict[str, MethodMetrics] = {}
    for method in sorted({s.method for s in samples}):
        ours = [s for s in samples if s.method == method]
        successes = np.sort(
            np.array([s.position_error for s in ours if s.success], dtype=float)
        )
        n_attempted = len(ours)
        n_success = successes.size

        epochs = sorted({s.epoch for s in ours})
        ok_epochs = sum(
            1
            for t in epochs
            if all(s.success for s in ours if s.epoch == t)
        )

        if n_success == 0:
            rmse = q1 = q2 = q3 = math.nan
            ecdf_fractions = np.empty(0)
        else:
            rmse = float(np.sqrt(np.mean(successes**2)))
            q1, q2, q3 = (_nearest_rank(successes, p) for p in QUANTILE_LEVELS)
            ecdf_fractions = np.arange(1, n_success + 1) / n_success

        methods[method] = MethodMetrics(
            rmse=rmse,
            q1=q1,
            q2=q2,
            q3=q3,
            success_rate=n_success / n_attempted,
            epoch_success_rate=ok_epochs / len(epochs),
            n_attempted=n_attempted,
            n_success=n_success,
            ecdf_errors=successes,
            ecdf_fractions=ecdf_fractions,
        )
    return EvalReport(methods=methods)


def _fmt(value: float) -> str:
    return "NA" if math.isnan(value) else f"{value:.6f}"


def write_report_csv(path: Path, scenario: str, report: EvalReport) -> None:
    """One row per method: the headline comparison table."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "scenario", "rmse", "q1", "q2", "q3", "success_rate"])
        for method, m in report.methods.items():
            writer.writerow(
                [method, scenario, _fmt(m.rmse), _fmt(m.q1), _fmt(m.q2), _fmt(m.q3),
                 f"{m.success_rate:.6f}"]
            )


def write_ecdf_csv(path: Path, metrics: MethodMetrics) -> None:
    """Two columns (error_m, cum_fraction), directly plottable."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["error_m", "cum_fraction"])
        for err, frac in zip(metrics.ecdf_errors, metrics.ecdf_fractions):
            writer.writerow([f"{err:.6f}", f"{frac:.8f}"])


def write_errors_csv(path: Path, samples: Iterable[ErrorSample]) -> None:
    """Raw per-node error samples for external analysis."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "node", "method", "position_error", "success"])
        for s in samples:
            writer.writerow(
                [s.epoch, s.node, s.method,
                 "" if math.isnan(s.position_error) else f"{s.position_error:.6f}",
                 int(s.success)]
            )
