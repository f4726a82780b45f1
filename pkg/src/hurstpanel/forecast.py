"""Constrained linear extrapolation and the error-versus-Hurst regression.

The forecaster fits a line to the last `window` observations with the
intercept pinned to the latest value S(t); the slope then has the closed
form

    beta1 = sum_k k * (S(t) - S(t-k)) / sum_k k**2,   k = 1..window-1,

and the lag-p prediction is S(t) + beta1 * p. Every forecast is paired with
the Hurst exponents H(1), H(2) estimated on the training window [t-window, t]
(running sum taken inside the window, matching the rolling module), and the
pooled cloud of (H, log10 error) points is fitted as
E(H) ~ E0 * 10**(c * H). Records with zero error are excluded from the fit
(their count is reported); degenerate training windows are flagged and
excluded as well.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._util import ols_line, parallel_map
from .errors import (
    InsufficientData,
    OutOfRange,
    ValidationError,
    WindowTooSmall,
)
from .ghe import GheConfig, _ghe_rows
from .panel import NodeId, Panel, SeriesView
from .spectral import FilterSpec, remove_components


def _default_forecast_ghe() -> GheConfig:
    return GheConfig(q_grid=(1.0, 2.0), tau_max=25)


@dataclass(frozen=True)
class ForecastConfig:
    """Study parameters.

    The training window for the Hurst estimate is the closed interval
    [t-window, t] (window+1 samples), which supports tau_max up to
    window/2. squared_error switches the regression target from |error| to
    error**2 (doubling the fitted slope).
    """

    window: int = 50
    lags: tuple[int, ...] = (1,)
    ghe: GheConfig = field(default_factory=_default_forecast_ghe)
    filtered: bool = False
    filter_spec: FilterSpec = field(default_factory=FilterSpec)
    squared_error: bool = False

    def __post_init__(self):
        if self.window < 3:
            raise ValidationError("training window must be at least 3 samples")
        if not self.lags or any(p < 1 for p in self.lags):
            raise ValidationError("lags must be positive")
        if 2 * self.ghe.tau_max > self.window:
            raise ValidationError(
                f"training window {self.window} supports tau_max <= {self.window // 2}, "
                f"got {self.ghe.tau_max}"
            )
        if 1.0 not in self.ghe.q_grid or 2.0 not in self.ghe.q_grid:
            raise ValidationError("forecast records require q=1 and q=2 in the grid")


@dataclass
class ForecastRecord:
    """One (node, origin, lag) forecast with its training-window exponents."""

    node: NodeId
    t: int
    p: int
    predicted: float
    actual: float
    error: float
    h1: float
    h2: float
    degenerate: bool = False


@dataclass
class LogLinearFit:
    """Fit of log10(error) against H: error ~ e0 * 10**(c * H)."""

    e0: float
    c: float
    n_points: int
    r2: float
    n_excluded: int
    q: float

    def to_json_dict(self) -> dict:
        return {
            "E0": self.e0,
            "c": self.c,
            "n_points": self.n_points,
            "r2": self.r2,
            "n_excluded": self.n_excluded,
            "q": self.q,
        }


def fit_trend_slope(window: np.ndarray) -> float:
    """Slope of the least-squares line through the window with the intercept
    pinned at the last observation."""
    window = np.asarray(window, dtype=float)
    if len(window) < 2:
        raise WindowTooSmall("trend fit needs at least 2 samples")
    k = np.arange(1, len(window))
    last = window[-1]
    return float((k * (last - window[-2::-1])).sum() / (k * k).sum())


def forecast(
    series: SeriesView | np.ndarray,
    t: int,
    p: int,
    window: int,
) -> float:
    """Lag-p linear extrapolation from origin t using the last `window` values."""
    values = series.values if isinstance(series, SeriesView) else np.asarray(series, float)
    if window < 2:
        raise WindowTooSmall("forecast window must be at least 2 samples")
    if p < 1:
        raise OutOfRange("lag must be positive")
    if t < window - 1:
        raise OutOfRange(f"origin {t} needs at least {window} observations")
    if t + p >= len(values):
        raise OutOfRange(f"origin {t} + lag {p} runs past the series end")
    beta1 = fit_trend_slope(values[t - window + 1 : t + 1])
    return float(values[t] + beta1 * p)


def _node_study(
    values: np.ndarray,
    node: NodeId,
    config: ForecastConfig,
) -> list[ForecastRecord]:
    t_hours = len(values)
    window = config.window
    if config.filtered:
        values = remove_components(values, config.filter_spec)

    # slopes of all length-`window` regression windows; index s covers [s, s+window-1]
    reg_windows = np.ascontiguousarray(sliding_window_view(values, window))
    k = np.arange(1, window)
    denom = float((k * k).sum())
    beta1 = ((reg_windows[:, -1][:, None] - reg_windows[:, -2::-1]) * k).sum(axis=1) / denom

    # Hurst exponents on the closed training windows [t-window, t]
    h_windows = np.ascontiguousarray(sliding_window_view(values, window + 1))
    x = np.cumsum(h_windows, axis=1)
    h, _, _, _, ok = _ghe_rows(x, config.ghe)
    i1 = config.ghe.q_grid.index(1.0)
    i2 = config.ghe.q_grid.index(2.0)

    records = []
    for p in config.lags:
        origins = np.arange(window, t_hours - p)
        preds = values[origins] + beta1[origins - window + 1] * p
        actuals = values[origins + p]
        errors = np.abs(preds - actuals)
        widx = origins - window
        for j, t in enumerate(origins):
            w = widx[j]
            records.append(
                ForecastRecord(
                    node=node,
                    t=int(t),
                    p=int(p),
                    predicted=float(preds[j]),
                    actual=float(actuals[j]),
                    error=float(errors[j]),
                    h1=float(h[w, i1]),
                    h2=float(h[w, i2]),
                    degenerate=not bool(ok[w]),
                )
            )
    return records


def run_study(panel: Panel, config: ForecastConfig, threads: int = 1) -> list[ForecastRecord]:
    """Forecast every node at every valid origin and lag.

    Valid origins for lag p are t in [window, T-1-p]: the training window
    [t-window, t] must exist and the target t+p must stay inside the
    series, giving exactly T - window - p records per node and lag.
    """
    max_lag = max(config.lags)
    if panel.n_hours <= config.window + max_lag:
        raise WindowTooSmall(
            f"panel has {panel.n_hours} hours; study needs more than "
            f"window + max lag = {config.window + max_lag}"
        )
    per_node = parallel_map(
        lambda i: _node_study(panel.values[i], panel.nodes[i], config),
        range(panel.n_nodes),
        threads,
    )
    return [rec for node_records in per_node for rec in node_records]


def fit_error_vs_hurst(
    records: list[ForecastRecord],
    q: int | float,
    squared: bool = False,
    binned: bool = False,
    n_bins: int = 20,
) -> LogLinearFit:
    """Pooled log-linear regression of forecast error on H(q).

    Only records with positive error and a non-degenerate training window
    enter the fit; the number excluded is reported. With binned=True the
    regression runs on per-bin medians of log10(error) over an equal-width
    H grid instead of the raw cloud.
    """
    if q not in (1, 2, 1.0, 2.0):
        raise ValidationError("q must be 1 or 2")
    h = np.array([r.h1 if q in (1, 1.0) else r.h2 for r in records], dtype=float)
    err = np.array([r.error for r in records], dtype=float)
    bad = np.array([r.degenerate for r in records], dtype=bool)
    usable = (~bad) & (err > 0) & np.isfinite(h)
    n_excluded = int(len(records) - usable.sum())
    if usable.sum() < 2:
        raise InsufficientData(
            f"need at least 2 usable records, have {int(usable.sum())} "
            f"({n_excluded} excluded)"
        )
    hv = h[usable]
    log_err = np.log10(err[usable] ** 2 if squared else err[usable])

    if binned:
        edges = np.linspace(hv.min(), hv.max(), n_bins + 1)
        centers, medians = [], []
        for b in range(n_bins):
            sel = (hv >= edges[b]) & (hv < edges[b + 1] if b < n_bins - 1 else hv <= edges[b + 1])
            if sel.any():
                centers.append(float(hv[sel].mean()))
                medians.append(float(np.median(log_err[sel])))
        if len(centers) < 2:
            raise InsufficientData("fewer than 2 populated H bins")
        slope, intercept, r2 = ols_line(np.array(centers), np.array(medians))
    else:
        slope, intercept, r2 = ols_line(hv, log_err)
    return LogLinearFit(
        e0=float(10.0 ** intercept),
        c=float(slope),
        n_points=int(usable.sum()),
        r2=float(r2),
        n_excluded=n_excluded,
        q=float(q),
    )


def slope_vs_lag(
    panel: Panel,
    config: ForecastConfig,
    q: int | float,
    threads: int = 1,
) -> list[tuple[int, LogLinearFit | None]]:
    """The c(p) curve: one pooled fit per configured lag.

    Lags whose fit is impossible (for example every error is zero on a
    noiseless ramp panel) yield None rather than aborting the curve.
    """
    records = run_study(panel, config, threads)
    by_lag: dict[int, list[ForecastRecord]] = {p: [] for p in config.lags}
    for rec in records:
        by_lag[rec.p].append(rec)
    out: list[tuple[int, LogLinearFit | None]] = []
    for p in config.lags:
        try:
            out.append((p, fit_error_vs_hurst(by_lag[p], q, squared=config.squared_error)))
        except InsufficientData:
            out.append((p, None))
    return out


def write_records_csv(path: str | Path, records: list[ForecastRecord]) -> None:
    """Stream records to CSV; degenerate training windows leave H cells blank."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "t", "p", "predicted", "actual", "error", "H1", "H2"])
        for r in records:
            writer.writerow(
                [
                    r.node.name,
                    r.t,
                    r.p,
                    repr(r.predicted),
                    repr(r.actual),
                    repr(r.error),
                    "" if r.degenerate else repr(r.h1),
                    "" if r.degenerate else repr(r.h2),
                ]
            )


def write_slope_curve_csv(
    path: str | Path,
    curves: dict[str, list[tuple[int, LogLinearFit | None]]],
) -> None:
    """Plot-ready c(p) table; one labelled column set per curve."""
    labels = list(curves)
    lags = sorted({p for curve in curves.values() for p, _ in curve})
    by_label = {lab: dict(curve) for lab, curve in curves.items()}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["p"]
        for lab in labels:
            header += [f"c_{lab}", f"E0_{lab}", f"r2_{lab}", f"n_{lab}"]
        writer.writerow(header)
        for p in lags:
            row = [p]
            for lab in labels:
                fit = by_label[lab].get(p)
                if fit is None:
                    row += ["", "", "", ""]
                else:
                    row += [repr(fit.c), repr(fit.e0), repr(fit.r2), fit.n_points]
            writer.writerow(row)


def write_fits_json(path: str | Path, fits: dict) -> None:
    def encode(obj):
        if isinstance(obj, LogLinearFit):
            return obj.to_json_dict()
        raise TypeError(f"not JSON-serializable: {obj!r}")

    with open(path, "w") as fh:
        json.dump(fits, fh, indent=2, sort_keys=True, default=encode)
        fh.write("\n")
