"""Collaborative auto-positioning laboratory.

Simulates corrupted inter-node ranging, solves node positions with a
closed-form baseline and a grid-based Bayesian estimator, and compares
both quantitatively (RMSE, error quantiles, ECDF, success rate).
"""

__version__ = "0.1.0"

from .core import (
    Constellation,
    CovarianceMatrix2,
    ErrorClass,
    MeasurementMatrix,
    NodeEstimate,
    NodePosition,
    RangingMeasurement,
    euclidean_distance,
    trace,
)
from .simulator import (
    RangingModelParams,
    SimulationSummary,
    draw_measurement,
    simulate_epoch,
    simulate_scenario,
    summarize,
)
from .closed_form import (
    CfError,
    CfFailureReason,
    CfResult,
    cf_autoposition,
    place_frame_anchors,
    trilaterate_lse,
)
from .grid_filter import (
    BeliefGrid,
    BeliefUnderflowError,
    CgpConfig,
    CgpState,
    GridDomain,
    GridObservation,
    cgp_autoposition,
    combined_sigma,
    estimate,
    estimate_a1_1d,
    init_uniform,
    predict,
    update,
)
from .evaluation import (
    ErrorSample,
    EvalReport,
    MethodMetrics,
    align_frame,
    collect_samples,
    compute_report,
    transform_to_gauge,
)
from .scenario import (
    ConfigError,
    GridSettings,
    ScenarioSpec,
    apply_overrides,
    bundled_scenarios,
    load_scenario,
)
from .runner import RunResult, run_all, run_scenario
