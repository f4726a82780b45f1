"""Multi-scaling analysis of hourly price panels.

Generalized Hurst exponent estimation, seasonal spectral filtering,
rolling-window dynamics, a constrained linear forecaster regressed against
the Hurst exponent, and synthetic generators with known scaling for ground
truth.
"""

from . import errors
from .forecast import (
    ForecastConfig,
    ForecastRecord,
    LogLinearFit,
    fit_error_vs_hurst,
    fit_trend_slope,
    forecast,
    run_study,
    slope_vs_lag,
)
from .ghe import (
    GheConfig,
    GheResult,
    MultiScalingReport,
    detrend_series,
    detrending_robustness,
    estimate_ghe,
    multiscaling_report,
    spectral_exponent_check,
    structure_function,
)
from .panel import (
    ComponentRole,
    NodeId,
    Panel,
    SeriesView,
    cumulative_sum,
    load_panel,
    save_panel,
)
from .rolling import RollingConfig, RollingTrace, detect_shifts, group_shifts, rolling_ghe
from .spectral import (
    FilterSpec,
    SpectrumReport,
    market_average_spectrum,
    power_spectrum,
    remove_components,
)
from .synth import (
    CascadeSpec,
    FbmSpec,
    SeasonalSpec,
    cascade_partition_exponent,
    fbm_panel,
    fgn_autocovariance,
    gen_cascade,
    gen_fbm,
    gen_seasonal,
    make_panel,
)

__version__ = "0.1.0"

__all__ = [
    "ComponentRole",
    "NodeId",
    "Panel",
    "SeriesView",
    "cumulative_sum",
    "load_panel",
    "save_panel",
    "GheConfig",
    "GheResult",
    "MultiScalingReport",
    "structure_function",
    "estimate_ghe",
    "multiscaling_report",
    "spectral_exponent_check",
    "detrending_robustness",
    "detrend_series",
    "FilterSpec",
    "SpectrumReport",
    "power_spectrum",
    "market_average_spectrum",
    "remove_components",
    "RollingConfig",
    "RollingTrace",
    "rolling_ghe",
    "detect_shifts",
    "group_shifts",
    "ForecastConfig",
    "ForecastRecord",
    "LogLinearFit",
    "fit_trend_slope",
    "forecast",
    "run_study",
    "fit_error_vs_hurst",
    "slope_vs_lag",
    "FbmSpec",
    "CascadeSpec",
    "SeasonalSpec",
    "gen_fbm",
    "gen_cascade",
    "gen_seasonal",
    "cascade_partition_exponent",
    "fgn_autocovariance",
    "make_panel",
    "fbm_panel",
    "errors",
]
