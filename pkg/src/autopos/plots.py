"""Figure rendering for run reports.

Figures are written next to the delimited outputs: ECDF comparison
curves (grid method solid, closed form dotted), ranging-residual
histograms, and a map of the last epoch's estimates over the reference
layout.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .closed_form import CfResult
from .core import NodeEstimate
from .evaluation import EvalReport

_METHOD_STYLE = {"cgp": "-", "cf": ":"}


def save_ecdf_figure(path: Path, reports: dict[str, EvalReport]) -> str:
    """ECDFs of absolute position errors, one color per scenario."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for idx, (label, report) in enumerate(reports.items()):
        color = colors[idx % len(colors)]
        for method, metrics in report.methods.items():
            if metrics.ecdf_errors.size == 0:
                continue
            ax.step(
                metrics.ecdf_errors,
                metrics.ecdf_fractions,
                _METHOD_STYLE.get(method, "-"),
                where="post",
                color=color,
                label=f"{label} {method}",
            )
    ax.set_xlabel("position error [m]")
    ax.set_ylabel("cumulative fraction")
    ax.set_xscale("log")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path).name


def save_residual_histogram(path: Path, residuals: np.ndarray, label: str) -> str:
    """Histogram of measured-minus-true ranging residuals."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if residuals.size:
        ax.hist(residuals, bins=120, density=True, color="#4878a8", edgecolor="none")
    ax.set_xlabel("ranging residual [m]")
    ax.set_ylabel("density")
    ax.set_title(f"{label}: ranging residuals")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path).name


def save_positions_figure(
    path: Path,
    gauge_truth: np.ndarray,
    cf_result: CfResult | None,
    cgp_estimates: list[NodeEstimate] | None,
    label: str,
) -> str:
    """Reference layout with the last epoch's estimates of both methods."""
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    ax.scatter(
        gauge_truth[:, 0], gauge_truth[:, 1], marker="x", s=60, color="black",
        label="reference",
    )
    if cgp_estimates is not None:
        pts = np.array(
            [[e.position.x, e.position.y] for e in cgp_estimates if e.valid]
        ).reshape(-1, 2)
        ax.scatter(pts[:, 0], pts[:, 1], marker="o", s=30, alpha=0.8,
                   color="#2e7d32", label="cgp")
    if cf_result is not None:
        pts = np.array(
            [[e.position.x, e.position.y] for e in cf_result.estimates if e.valid]
        ).reshape(-1, 2)
        ax.scatter(pts[:, 0], pts[:, 1], marker="s", s=25, alpha=0.8,
                   color="#c62828", label="cf")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{label}: last-epoch estimates")
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path).name
