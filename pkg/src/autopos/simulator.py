"""Seeded ranging-measurement simulator.

Generates directed inter-node range measurements with a semi-empirical
error model tuned for UWB-class indoor ranging:

* availability: an attempt at true distance d fails with probability
  d / d_max (distance-proportional dropout),
* multipath (NLOS): with probability 0.2 + 0.3 * d / d_max the error is
  drawn from a right-skewed lognormal, accepted only while smaller than
  the true distance,
* outliers: with probability p_out the error is uniform on
  [-d, d_max - d] (gross confusion anywhere within radio range),
* otherwise line-of-sight: zero-mean Gaussian hardware noise.

Each epoch owns an independent random stream derived from
(seed, epoch index), so epochs are reproducible in isolation and the
whole stream is reproducible bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import Constellation, ErrorClass, MeasurementMatrix

__all__ = [
    "RangingModelParams",
    "SimulationSummary",
    "draw_measurement",
    "simulate_epoch",
    "simulate_scenario",
    "summarize",
    "collect_residuals",
    "write_measurements_csv",
]


@dataclass(frozen=True)
class RangingModelParams:
    """All simulator knobs.

    ``sigma_r`` and ``mp_sigma`` are standard deviations (``mp_mean`` and
    ``mp_sigma`` parameterize the underlying normal of the lognormal in
    log-space).  ``nlos_enabled`` and ``failures_enabled`` switch the
    multipath branch and the availability stage off entirely for
    Gaussian-only scenarios.
    """

    sigma_r: float = 0.9
    d_max: float = 100.0
    p_out: float = 0.0
    mp_mean: float = 0.8
    mp_sigma: float = 1.07
    seed: int = 0
    nlos_enabled: bool = True
    failures_enabled: bool = True

    def __post_init__(self) -> None:
        if not self.sigma_r > 0.0:
            raise ValueError(f"sigma_r must be > 0, got {self.sigma_r}")
        if not self.d_max > 0.0:
            raise ValueError(f"d_max must be > 0, got {self.d_max}")
        if not 0.0 <= self.p_out <= 1.0:
            raise ValueError(f"p_out must be in [0, 1], got {self.p_out}")
        if not self.mp_sigma > 0.0:
            raise ValueError(f"mp_sigma must be > 0, got {self.mp_sigma}")
        if self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")


@dataclass(frozen=True)
class SimulationSummary:
    """Empirical class fractions over all attempted measurements."""

    los: float
    nlos: float
    outlier: float
    failed: float
    attempted: int

    def __post_init__(self) -> None:
        total = self.los + self.nlos + self.outlier + self.failed
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"class fractions must sum to 1, got {total}")


def _draw_batch(
    distances: np.ndarray, params: RangingModelParams, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one measurement per entry of ``distances``.

    Consumes the stream in fixed blocks (availability, classifier,
    multipath, outlier, hardware) regardless of which branch each entry
    takes, so the layout is reproducible for a given config.
    Returns (ranges with NaN for failures, ErrorClass codes).
    """
    d = np.asarray(distances, dtype=float)
    n = d.size
    ratio = d / params.d_max

    if params.failures_enabled:
        failed = rng.random(n).reshape(d.shape) <= ratio
    else:
        failed = np.zeros(d.shape, dtype=bool)

    p_eps = rng.random(n).reshape(d.shape)
    if params.nlos_enabled:
        eps_mp = rng.lognormal(params.mp_mean, params.mp_sigma, n).reshape(d.shape)
        # the lognormal draw falls through to the remaining cases when it
        # would exceed the true distance
        mp_case = (p_eps > 0.8 - 0.3 * ratio) & (eps_mp < d)
    else:
        eps_mp = np.zeros(d.shape)
        mp_case = np.zeros(d.shape, dtype=bool)
    eps_out = rng.uniform(-d, params.d_max - d)
    eps_hw = rng.normal(0.0, params.sigma_r, n).reshape(d.shape)

    # classifier cases resolve top-down: multipath, then outlier, then LOS
    out_case = ~mp_case & (p_eps < params.p_out)

    eps = np.where(mp_case, eps_mp, np.where(out_case, eps_out, eps_hw))
    ranges = np.maximum(d + eps, 0.0)
    ranges = np.where(failed, np.nan, ranges)

    classes = np.full(d.shape, int(ErrorClass.LOS), dtype=np.int8)
    classes[mp_case] = int(ErrorClass.NLOS)
    classes[out_case] = int(ErrorClass.OUTLIER)
    classes[failed] = int(ErrorClass.FAILED)
    return ranges, classes


def draw_measurement(
    true_distance: float, params: RangingModelParams, rng: np.random.Generator
) -> tuple[Optional[float], ErrorClass]:
    """Draw a single measurement payload for one directed attempt.

    ``true_distance >= d_max`` is a deterministic failure (the
    availability probability vanishes).
    """
    if not true_distance > 0.0:
        raise ValueError(f"true distance must be > 0, got {true_distance}")
    ranges, classes = _draw_batch(np.array([true_distance]), params, rng)
    cls = ErrorClass(int(classes[0]))
    r = None if math.isnan(ranges[0]) else float(ranges[0])
    return r, cls


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, epoch]))


def simulate_epoch(
    constellation: Constellation, params: RangingModelParams, epoch: int
) -> MeasurementMatrix:
    """Simulate the full directed measurement matrix for one epoch.

    One draw per ordered node pair (i != j), deterministic given
    (params.seed, epoch).
    """
    n = constellation.count
    rng = _epoch_rng(params.seed, epoch)
    dist = constellation.distance_matrix()
    off = ~np.eye(n, dtype=bool)
    ranges_flat, classes_flat = _draw_batch(dist[off], params, rng)

    ranges = np.full((n, n), np.nan)
    classes = np.full((n, n), int(ErrorClass.FAILED), dtype=np.int8)
    ranges[off] = ranges_flat
    classes[off] = classes_flat
    return MeasurementMatrix(epoch=epoch, ranges=ranges, classes=classes)


def simulate_scenario(
    constellation: Constellation, params: RangingModelParams, epochs: int
) -> list[MeasurementMatrix]:
    """Measurement matrices for epochs 0..epochs-1."""
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    return [simulate_epoch(constellation, params, t) for t in range(epochs)]


def summarize(matrices: Sequence[MeasurementMatrix]) -> SimulationSummary:
    """Empirical LOS/NLOS/outlier/failure fractions over a batch."""
    if not matrices:
        raise ValueError("summarize requires at least one measurement matrix")
    counts = np.zeros(4, dtype=np.int64)
    attempted = 0
    for m in matrices:
        n = m.node_count
        off = ~np.eye(n, dtype=bool)
        cls = m.classes[off]
        counts += np.bincount(cls, minlength=4)[:4]
        attempted += cls.size
    frac = counts / attempted
    return SimulationSummary(
        los=float(frac[int(ErrorClass.LOS)]),
        nlos=float(frac[int(ErrorClass.NLOS)]),
        outlier=float(frac[int(ErrorClass.OUTLIER)]),
        failed=float(frac[int(ErrorClass.FAILED)]),
        attempted=attempted,
    )


def collect_residuals(
    matrices: Iterable[MeasurementMatrix], constellation: Constellation
) -> np.ndarray:
    """Measured-minus-true residuals of all non-failed measurements."""
    dist = constellation.distance_matrix()
    residuals = []
    for m in matrices:
        ok = ~np.isnan(m.ranges)
        residuals.append(m.ranges[ok] - dist[ok])
    return np.concatenate(residuals) if residuals else np.empty(0)


def write_measurements_csv(
    matrices: Iterable[MeasurementMatrix],
    constellation: Constellation,
    path: Path,
) -> None:
    """Dump one CSV row per directed measurement attempt.

    Columns: epoch, from, to, true_distance, range (empty when the
    attempt failed), error_class.
    """
    dist = constellation.distance_matrix()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "from", "to", "true_distance", "range", "error_class"])
        for m in matrices:
            for meas in m.iter_measurements():
                writer.writerow(
                    [
                        m.epoch,
                        meas.from_node,
                        meas.to_node,
                        f"{dist[meas.from_node, meas.to_node]:.6f}",
                        "" if meas.range_m is None else f"{meas.range_m:.6f}",
                        meas.error_class.name,
                    ]
                )
