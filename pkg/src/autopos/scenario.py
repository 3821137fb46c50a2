"""Scenario configuration files.

A scenario is a TOML file describing one batch run: the ground-truth
constellation, all ranging-model parameters, the epoch count and seed,
the grid settings consumed by the collaborative estimator, and the
output location.  Three ready-made scenarios ship with the package
(``autopos.scenario.bundled_scenarios``), covering a Gaussian-only
baseline and two increasingly corrupted environments.

Example
-------
    scenario_label = "scenario2"
    epochs = 1000
    seed = 20260809

    [constellation]
    nodes = [[0.0, 0.0], [7.2, 0.0], [3.1, 9.6]]

    [ranging]
    sigma_r = 0.9
    d_max = 100.0
    p_out = 0.07
    mp_mean = 0.8
    mp_sigma = 1.07
    nlos_enabled = true
    failures_enabled = true

    [grid]
    cell_size = 0.25
    margin = 5.0
    sigma_pred_cells = 1.0
    carry_beliefs = true

    [output]
    dir = "results/scenario2"
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import Constellation
from .simulator import RangingModelParams

__all__ = [
    "ConfigError",
    "GridSettings",
    "ScenarioSpec",
    "DEFAULT_CONSTELLATION",
    "load_scenario",
    "apply_overrides",
    "bundled_scenarios",
    "resolve_config_path",
]


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the field."""


# Default 13-node layout: an 18 m x 13 m parking-lot-like area.  The
# three frame nodes span the lot (node 0 at the origin, node 1 on the
# positive x-axis, node 2 in the upper half-plane, matching the gauge
# conventions) and the remaining nodes sit inside that triangle on a
# perturbed grid, so every sequentially placed node is surrounded by
# its anchors (placement quality degrades badly with one-sided anchor
# geometry).
DEFAULT_CONSTELLATION: tuple[tuple[float, float], ...] = (
    (0.0, 0.0),
    (18.0, 0.0),
    (9.0, 12.6),
    (8.9, 2.4),
    (4.8, 6.3),
    (13.3, 6.2),
    (6.7, 9.8),
    (13.7, 2.0),
    (4.0, 2.1),
    (11.4, 9.5),
    (2.1, 4.3),
    (15.8, 4.4),
    (9.3, 5.9),
)


@dataclass(frozen=True)
class GridSettings:
    """Grid geometry and filter behavior for the collaborative estimator."""

    cell_size: float = 0.1
    margin: float = 5.0
    sigma_pred_cells: float = 1.0
    carry_beliefs: bool = False

    def __post_init__(self) -> None:
        if not self.cell_size > 0.0:
            raise ConfigError("grid.cell_size: must be > 0")
        if self.margin < 0.0:
            raise ConfigError("grid.margin: must be >= 0")
        if self.sigma_pred_cells < 0.0:
            raise ConfigError("grid.sigma_pred_cells: must be >= 0")


@dataclass(frozen=True)
class ScenarioSpec:
    """Fully resolved description of one batch run.

    ``warmup_epochs`` is the evaluation convention for belief-carrying
    runs: the first epochs are simulated and filtered as usual but
    excluded from the error statistics, so the reported metrics describe
    the estimator past its acquisition phase.  It has no effect on the
    simulation itself.
    """

    scenario_label: str
    epochs: int
    constellation: Constellation
    ranging: RangingModelParams
    grid: GridSettings
    output_dir: Optional[Path] = None
    warmup_epochs: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs: must be >= 1")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ConfigError("warmup_epochs: must be in [0, epochs)")
        if self.constellation.count < 3:
            raise ConfigError("constellation.nodes: need at least 3 nodes")

    @property
    def seed(self) -> int:
        return self.ranging.seed


def _section(data: dict, name: str) -> dict:
    value = data.pop(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{name}: must be a table")
    return value


def _take(section: dict, section_name: str, key: str, kind, default: Any):
    dotted = f"{section_name}.{key}" if section_name else key
    if key not in section:
        if default is ...:
            raise ConfigError(f"{dotted}: missing required field")
        return default
    value = section.pop(key)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{dotted}: expected {kind.__name__}")
    if not isinstance(value, kind):
        raise ConfigError(f"{dotted}: expected {kind.__name__}")
    return value


def _reject_unknown_top(data: dict) -> None:
    if data:
        key = sorted(data)[0]
        raise ConfigError(f"{key}: unknown field")


def _reject_unknown(section: dict, section_name: str) -> None:
    if section:
        key = sorted(section)[0]
        raise ConfigError(f"{section_name}.{key}: unknown field")


def parse_scenario(data: dict, base_dir: Optional[Path] = None) -> ScenarioSpec:
    """Validate a parsed TOML document into a ScenarioSpec."""
    data = dict(data)
    label = _take(data, "", "scenario_label", str, ...)
    epochs = _take(data, "", "epochs", int, ...)
    seed = _take(data, "", "seed", int, ...)
    warmup = _take(data, "", "warmup_epochs", int, 0)
    if seed < 0:
        raise ConfigError("seed: must be a non-negative integer")

    cons_sec = _section(data, "constellation")
    nodes = cons_sec.pop("nodes", ...)
    if nodes is ... or not isinstance(nodes, list) or len(nodes) < 3:
        raise ConfigError("constellation.nodes: need a list of at least 3 [x, y] pairs")
    for i, entry in enumerate(nodes):
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in entry)
        ):
            raise ConfigError(f"constellation.nodes[{i}]: expected an [x, y] pair")
    _reject_unknown(cons_sec, "constellation")
    try:
        constellation = Constellation.from_coords(nodes)
    except ValueError as err:
        raise ConfigError(f"constellation.nodes: {err}") from err

    rng_sec = _section(data, "ranging")
    try:
        ranging = RangingModelParams(
            sigma_r=_take(rng_sec, "ranging", "sigma_r", float, ...),
            d_max=_take(rng_sec, "ranging", "d_max", float, ...),
            p_out=_take(rng_sec, "ranging", "p_out", float, ...),
            mp_mean=_take(rng_sec, "ranging", "mp_mean", float, 0.8),
            mp_sigma=_take(rng_sec, "ranging", "mp_sigma", float, 1.07),
            nlos_enabled=_take(rng_sec, "ranging", "nlos_enabled", bool, True),
            failures_enabled=_take(rng_sec, "ranging", "failures_enabled", bool, True),
            seed=seed,
        )
    except ValueError as err:
        raise ConfigError(f"ranging: {err}") from err
    _reject_unknown(rng_sec, "ranging")

    grid_sec = _section(data, "grid")
    grid = GridSettings(
        cell_size=_take(grid_sec, "grid", "cell_size", float, 0.1),
        margin=_take(grid_sec, "grid", "margin", float, 5.0),
        sigma_pred_cells=_take(grid_sec, "grid", "sigma_pred_cells", float, 1.0),
        carry_beliefs=_take(grid_sec, "grid", "carry_beliefs", bool, False),
    )
    _reject_unknown(grid_sec, "grid")

    out_sec = _section(data, "output")
    out_dir = _take(out_sec, "output", "dir", str, None)
    _reject_unknown(out_sec, "output")
    if out_dir is not None:
        out_path = Path(out_dir)
        if base_dir is not None and not out_path.is_absolute():
            out_path = base_dir / out_path
    else:
        out_path = None

    _reject_unknown_top(data)
    return ScenarioSpec(
        scenario_label=label,
        epochs=epochs,
        constellation=constellation,
        ranging=ranging,
        grid=grid,
        output_dir=out_path,
        warmup_epochs=warmup,
    )


def load_scenario(path: Path | str) -> ScenarioSpec:
    """Load and validate a scenario TOML file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: invalid TOML: {err}") from err
    return parse_scenario(data, base_dir=path.parent)


def apply_overrides(
    spec: ScenarioSpec,
    *,
    epochs: Optional[int] = None,
    cell_size: Optional[float] = None,
    seed: Optional[int] = None,
    carry_beliefs: Optional[bool] = None,
    output_dir: Optional[Path] = None,
) -> ScenarioSpec:
    """Command-line overrides beat file values; returns a new spec."""
    ranging = spec.ranging
    if seed is not None:
        if seed < 0:
            raise ConfigError("seed: must be a non-negative integer")
        ranging = dataclasses.replace(ranging, seed=seed)
    grid = spec.grid
    if cell_size is not None:
        if cell_size <= 0:
            raise ConfigError("grid.cell_size: must be > 0")
        grid = dataclasses.replace(grid, cell_size=cell_size)
    if carry_beliefs is not None:
        grid = dataclasses.replace(grid, carry_beliefs=carry_beliefs)
    new_epochs = epochs if epochs is not None else spec.epochs
    return ScenarioSpec(
        scenario_label=spec.scenario_label,
        epochs=new_epochs,
        constellation=spec.constellation,
        ranging=ranging,
        grid=grid,
        output_dir=output_dir if output_dir is not None else spec.output_dir,
        warmup_epochs=min(spec.warmup_epochs, max(new_epochs - 1, 0)),
    )


def bundled_scenarios() -> dict[str, Path]:
    """Name -> path of the scenario files shipped with the package."""
    root = resources.files("autopos") / "configs"
    out = {}
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".toml"):
            out[entry.name.removesuffix(".toml")] = Path(str(entry))
    return out


def resolve_config_path(value: str | Path) -> Path:
    """Resolve a --config argument: a real file, or a bundled scenario name."""
    path = Path(value)
    if path.exists():
        return path
    bundled = bundled_scenarios()
    name = path.name.removesuffix(".toml")
    if name in bundled:
        return bundled[name]
    raise ConfigError(f"config file not found: {value}")
