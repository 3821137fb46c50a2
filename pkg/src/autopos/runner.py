"""Batch runner: simulate, estimate with both methods, evaluate, write reports.

One run covers every epoch of a scenario: the simulator produces the
measurement matrices, the closed-form and the grid-based estimators
solve each epoch, and the evaluator aggregates both error populations
into the comparison report.  All delimited outputs are written with
fixed formatting so identical (config, seed) pairs reproduce them byte
for byte; a manifest records the effective configuration and timings.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .closed_form import cf_autoposition
from .core import Constellation
from .evaluation import (
    ErrorSample,
    EvalReport,
    collect_samples,
    compute_report,
    write_ecdf_csv,
    write_errors_csv,
    write_report_csv,
)
from .grid_filter import CgpConfig, CgpState, GridDomain, cgp_autoposition
from .evaluation import transform_to_gauge
from .scenario import ScenarioSpec
from .simulator import (
    SimulationSummary,
    collect_residuals,
    simulate_epoch,
    summarize,
    write_measurements_csv,
)

__all__ = ["RunResult", "run_scenario", "run_all", "format_summary"]


@dataclass
class RunResult:
    spec: ScenarioSpec
    out_dir: Path
    report: EvalReport
    summary: SimulationSummary
    samples: list[ErrorSample]
    timings: dict[str, float] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"unsupported TOML value {value!r}")


def _spec_to_toml(spec: ScenarioSpec) -> str:
    """Serialize the effective configuration back to a loadable TOML file."""
    lines = [
        f"scenario_label = {_toml_value(spec.scenario_label)}",
        f"epochs = {spec.epochs}",
        f"seed = {spec.seed}",
        f"warmup_epochs = {spec.warmup_epochs}",
        "",
        "[constellation]",
        "nodes = [",
    ]
    for p in spec.constellation.positions:
        lines.append(f"    [{p.x!r}, {p.y!r}],")
    lines.append("]")
    r = spec.ranging
    lines += [
        "",
        "[ranging]",
        f"sigma_r = {r.sigma_r!r}",
        f"d_max = {r.d_max!r}",
        f"p_out = {r.p_out!r}",
        f"mp_mean = {r.mp_mean!r}",
        f"mp_sigma = {r.mp_sigma!r}",
        f"nlos_enabled = {_toml_value(r.nlos_enabled)}",
        f"failures_enabled = {_toml_value(r.failures_enabled)}",
        "",
        "[grid]",
        f"cell_size = {spec.grid.cell_size!r}",
        f"margin = {spec.grid.margin!r}",
        f"sigma_pred_cells = {spec.grid.sigma_pred_cells!r}",
        f"carry_beliefs = {_toml_value(spec.grid.carry_beliefs)}",
    ]
    if spec.output_dir is not None:
        lines += ["", "[output]", f"dir = {_toml_value(str(spec.output_dir))}"]
    return "\n".join(lines) + "\n"


def _write_atomic(path: Path, content: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(content)
    os.replace(tmp, path)


def run_scenario(
    spec: ScenarioSpec,
    out_dir: Optional[Path] = None,
    *,
    dump_measurements: bool = False,
    dump_beliefs: bool = False,
    make_figures: bool = True,
) -> RunResult:
    """Execute one scenario end to end and write all outputs."""
    t_start = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else (
        spec.output_dir if spec.output_dir is not None else Path("results") / spec.scenario_label
    )
    out.mkdir(parents=True, exist_ok=True)

    gauge_truth = transform_to_gauge(spec.constellation.as_array())
    domain = GridDomain.for_points(gauge_truth, spec.grid.margin, spec.grid.cell_size)
    cgp_config = CgpConfig(
        domain=domain,
        sigma_r=spec.ranging.sigma_r,
        sigma_pred_cells=spec.grid.sigma_pred_cells,
        carry_beliefs=spec.grid.carry_beliefs,
    )

    timings = {"simulate": 0.0, "cf": 0.0, "cgp": 0.0}
    matrices = []
    samples: list[ErrorSample] = []
    state: Optional[CgpState] = None
    last_cf = None
    last_cgp = None
    for t in range(spec.epochs):
        t0 = time.perf_counter()
        matrix = simulate_epoch(spec.constellation, spec.ranging, t)
        matrices.append(matrix)
        t1 = time.perf_counter()
        cf = cf_autoposition(matrix)
        t2 = time.perf_counter()
        cgp_estimates, state = cgp_autoposition(matrix, cgp_config, state)
        t3 = time.perf_counter()
        timings["simulate"] += t1 - t0
        timings["cf"] += t2 - t1
        timings["cgp"] += t3 - t2
        if t >= spec.warmup_epochs:
            samples.extend(collect_samples(t, "cf", cf.estimates, spec.constellation))
            samples.extend(collect_samples(t, "cgp", cgp_estimates, spec.constellation))
        last_cf, last_cgp = cf, cgp_estimates

    t_eval = time.perf_counter()
    summary = summarize(matrices)
    report = compute_report(samples)
    timings["evaluate"] = time.perf_counter() - t_eval

    label = spec.scenario_label
    files = []

    write_report_csv(out / "report.csv", label, report)
    files.append("report.csv")
    for method, metrics in report.methods.items():
        name = f"ecdf_{method}_{label}.csv"
        write_ecdf_csv(out / name, metrics)
        files.append(name)
    write_errors_csv(out / "errors.csv", samples)
    files.append("errors.csv")

    if dump_measurements:
        write_measurements_csv(matrices, spec.constellation, out / "measurements.csv")
        files.append("measurements.csv")
    if dump_beliefs and state is not None:
        belief_arrays = {f"node_{k}": b.mass for k, b in state.beliefs.items()}
        if state.axis_mass is not None:
            belief_arrays["node_1_axis"] = state.axis_mass
        belief_arrays["domain"] = np.array(
            [domain.x_min, domain.y_min, domain.cell_size, domain.nx, domain.ny]
        )
        np.savez_compressed(out / "beliefs.npz", **belief_arrays)
        files.append("beliefs.npz")

    if make_figures:
        t_fig = time.perf_counter()
        from . import plots

        residuals = collect_residuals(matrices, spec.constellation)
        files.append(plots.save_ecdf_figure(out / f"ecdf_{label}.png", {label: report}))
        files.append(
            plots.save_residual_histogram(out / f"residuals_{label}.png", residuals, label)
        )
        files.append(
            plots.save_positions_figure(
                out / f"positions_{label}.png", gauge_truth, last_cf, last_cgp, label
            )
        )
        timings["figures"] = time.perf_counter() - t_fig

    timings["total"] = time.perf_counter() - t_start

    manifest = {
        "tool": "autopos",
        "version": __version__,
        "scenario_label": label,
        "seed": spec.seed,
        "epochs": spec.epochs,
        "warmup_epochs": spec.warmup_epochs,
        "cell_size": spec.grid.cell_size,
        "carry_beliefs": spec.grid.carry_beliefs,
        "out_dir": str(out),
        "files": files,
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
    }
    _write_atomic(out / "effective_config.toml", _spec_to_toml(spec))
    _write_atomic(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")

    return RunResult(
        spec=spec,
        out_dir=out,
        report=report,
        summary=summary,
        samples=samples,
        timings=timings,
        files=files,
    )


def format_summary(result: RunResult) -> str:
    """Human-readable comparison block for one scenario run."""
    spec = result.spec
    s = result.summary
    lines = [
        f"== {spec.scenario_label}: {spec.epochs} epochs"
        + (f" ({spec.warmup_epochs} warm-up)" if spec.warmup_epochs else "")
        + f", seed {spec.seed}, cell {spec.grid.cell_size} m, carry-beliefs "
        f"{'on' if spec.grid.carry_beliefs else 'off'}",
        f"   measurements: LOS {s.los:6.1%}  NLOS {s.nlos:6.1%}  "
        f"outlier {s.outlier:6.1%}  failed {s.failed:6.1%}  ({s.attempted} attempted)",
        "   method    rmse[m]   q68[m]    q95[m]    q99.7[m]  node-succ  epoch-succ",
    ]
    for method, m in result.report.methods.items():
        def cell(v: float) -> str:
            return "   NA  " if np.isnan(v) else f"{v:7.3f}"

        lines.append(
            f"   {method:<8}{cell(m.rmse)}  {cell(m.q1)}  {cell(m.q2)}  {cell(m.q3)}"
            f"    {m.success_rate:6.3f}     {m.epoch_success_rate:6.3f}"
        )
    return "\n".join(lines)


def run_all(
    specs: list[ScenarioSpec],
    out_dir: Path,
    *,
    dump_measurements: bool = False,
    dump_beliefs: bool = False,
    make_figures: bool = True,
) -> tuple[list[RunResult], list[tuple[str, Exception]]]:
    """Run several scenarios, then write the combined comparison outputs.

    Failures of individual scenarios are collected, not raised, so one
    bad configuration cannot take down the batch.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results: list[RunResult] = []
    failures: list[tuple[str, Exception]] = []
    for spec in specs:
        try:
            results.append(
                run_scenario(
                    spec,
                    out_dir / spec.scenario_label,
                    dump_measurements=dump_measurements,
                    dump_beliefs=dump_beliefs,
                    make_figures=make_figures,
                )
            )
        except Exception as err:  # noqa: BLE001 - reported per scenario
            failures.append((spec.scenario_label, err))

    if results:
        import csv as _csv

        with open(out_dir / "combined_report.csv", "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(
                ["method", "scenario", "rmse", "q1", "q2", "q3", "success_rate"]
            )
            for res in results:
                for method, m in res.report.methods.items():
                    def fmt(v: float) -> str:
                        return "NA" if np.isnan(v) else f"{v:.6f}"

                    writer.writerow(
                        [method, res.spec.scenario_label, fmt(m.rmse), fmt(m.q1),
                         fmt(m.q2), fmt(m.q3), f"{m.success_rate:.6f}"]
                    )
        with open(out_dir / "combined_ecdf.csv", "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["scenario", "method", "error_m", "cum_fraction"])
            for res in results:
                for method, m in res.report.methods.items():
                    for err_val, frac in zip(m.ecdf_errors, m.ecdf_fractions):
                        writer.writerow(
                            [res.spec.scenario_label, method,
                             f"{err_val:.6f}", f"{frac:.8f}"]
                        )
        if make_figures:
            from . import plots

            plots.save_ecdf_figure(
                out_dir / "ecdf_all.png",
                {res.spec.scenario_label: res.report for res in results},
            )
    return results, failures
