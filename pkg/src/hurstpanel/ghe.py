"""Generalized Hurst exponent estimation from structure-function scaling.

The q-th order structure function of a series X at lag tau is

    K_q(tau) = mean_t |X(t+tau) - X(t)|^q / mean_t |X(t)|^q,

with the numerator averaged over all T-tau valid start points and the
denominator over all T points. For a scaling process K_q(tau) grows like
(tau/nu)^(q*H(q)); H(q) is recovered as the least-squares slope of
log K_q(tau) against log(tau/nu) over all integer lags nu..tau_max, divided
by q. A q-independent H(q) marks a uni-scaling process (fractional Brownian
motion); q-dependence marks multi-scaling.

The denominator is constant in tau and cannot change the fitted slope; it is
computed anyway so reported K_q values match the definition above exactly.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._util import abs_power, ols_slope_rows, parallel_map
from .errors import (
    AllSeriesDegenerate,
    DegenerateSeries,
    SeriesTooShort,
    ValidationError,
)
from .panel import Panel, SeriesView, cumulative_sum
from .spectral import find_peak_bins


@dataclass(frozen=True)
class GheConfig:
    """Estimation parameters.

    tau_max is the largest lag entering the log-log fit; with
    tau_max_sweep set, one fit is run per sweep value and H(q) is their
    mean. detrend, when set, subtracts a straight line fitted to the means
    of non-overlapping windows of that many samples (see detrend_series).
    """

    q_grid: tuple[float, ...] = (1.0, 2.0)
    tau_max: int = 19 * 24
    nu: int = 1
    detrend: int | None = None
    tau_max_sweep: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.q_grid:
            raise ValidationError("q_grid must be nonempty")
        if any(q <= 0 for q in self.q_grid):
            raise ValidationError("every q moment must be positive")
        if self.tau_max < 2:
            raise ValidationError("tau_max must be at least 2")
        if self.nu < 1:
            raise ValidationError("nu must be at least 1 sample")
        if self.tau_max < self.nu:
            raise ValidationError("tau_max must be at least nu")
        if self.detrend is not None and self.detrend < 2:
            raise ValidationError("detrend window must be at least 2 samples")
        if self.tau_max_sweep is not None:
            if not self.tau_max_sweep:
                raise ValidationError("tau_max_sweep must be nonempty when given")
            if any(t < max(2, self.nu) for t in self.tau_max_sweep):
                raise ValidationError("every sweep tau_max must be at least max(2, nu)")


@dataclass
class GheResult:
    """Per-q estimates with fit diagnostics.

    structure_values[i, j] is K_q(tau) for q_grid[i] and taus[j].
    """

    q_grid: tuple[float, ...]
    h: np.ndarray
    fit_r2: np.ndarray
    taus: np.ndarray
    structure_values: np.ndarray

    def h_at(self, q: float) -> float:
        for i, qi in enumerate(self.q_grid):
            if qi == q:
                return float(self.h[i])
        raise KeyError(f"q={q} not in grid {self.q_grid}")

    def to_json_dict(self) -> dict:
        return {
            "q_grid": list(self.q_grid),
            "h": self.h.tolist(),
            "fit_r2": self.fit_r2.tolist(),
            "taus": self.taus.tolist(),
            "structure_values": self.structure_values.tolist(),
        }


@dataclass
class MultiScalingReport:
    """Panel aggregate of the multi-scaling diagnostic q*H(q).

    concavity_gap is the panel mean of H(1) - H(2) (positive for
    multi-scaling panels), present when both moments are in the grid.
    """

    q_grid: tuple[float, ...]
    mean_qh: np.ndarray
    min_qh: np.ndarray
    max_qh: np.ndarray
    concavity_gap: float | None
    n_series: int
    n_skipped: int

    def to_json_dict(self) -> dict:
        return {
            "q_grid": list(self.q_grid),
            "mean_qH": self.mean_qh.tolist(),
            "min_qH": self.min_qh.tolist(),
            "max_qH": self.max_qh.tolist(),
            "concavity_gap": self.concavity_gap,
            "n_series": self.n_series,
            "n_skipped": self.n_skipped,
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["q", "mean_qH", "min_qH", "max_qH"])
            for i, q in enumerate(self.q_grid):
                writer.writerow(
                    [
                        repr(float(q)),
                        repr(float(self.mean_qh[i])),
                        repr(float(self.min_qh[i])),
                        repr(float(self.max_qh[i])),
                    ]
                )


def structure_function(x: np.ndarray, q: float, tau: int) -> float:
    """K_q(tau) for a single lag; see the module docstring for the definition."""
    x = np.asarray(x, dtype=float)
    if not 1 <= tau <= len(x) - 1:
        raise ValidationError(f"lag {tau} outside 1..{len(x) - 1}")
    if q <= 0:
        raise ValidationError("q must be positive")
    denominator = float(np.mean(abs_power(x, q)))
    if denominator == 0.0:
        raise DegenerateSeries("all-zero series has no q-th moment")
    numerator = float(np.mean(abs_power(x[tau:] - x[:-tau], q)))
    return numerator / denominator


def detrend_series(x: np.ndarray, window: int) -> np.ndarray:
    """Subtract the straight line fitted to means of non-overlapping windows.

    The trend is estimated at coarse resolution (one point per window of
    `window` samples, remainder window included) and removed as a single
    global line, so an exact linear trend is annihilated for any window
    size while the stochastic scaling structure is left intact.
    """
    return _detrend_rows(np.asarray(x, dtype=float)[None, :], window)[0]


def _detrend_rows(x: np.ndarray, window: int) -> np.ndarray:
    n, length = x.shape
    n_blocks = length // window
    if n_blocks >= 2 or (n_blocks == 1 and length > window):
        centers = []
        means = []
        for b in range(n_blocks):
            means.append(x[:, b * window:(b + 1) * window].mean(axis=1))
            centers.append(b * window + (window - 1) / 2.0)
        rem = length - n_blocks * window
        if rem >= 1:
            means.append(x[:, n_blocks * window:].mean(axis=1))
            centers.append(n_blocks * window + (rem - 1) / 2.0)
        centers = np.asarray(centers)
        pts = np.stack(means, axis=1)  # (n, n_pts)
    else:
        # window covers the whole series: fit the line to the raw samples
        centers = np.arange(length, dtype=float)
        pts = x
    cc = centers - centers.mean()
    sxx = float((cc * cc).sum())
    slope = ((pts - pts.mean(axis=1, keepdims=True)) * cc[None, :]).sum(axis=1) / sxx
    intercept = pts.mean(axis=1) - slope * centers.mean()
    t = np.arange(length, dtype=float)
    return x - (intercept[:, None] + slope[:, None] * t[None, :])


def _ghe_rows(x: np.ndarray, config: GheConfig):
    """Estimate H(q) for every row of x (rows are independent series).

    x must already be the analysis series (cumulative sum applied by the
    caller when requested); detrending per config happens here. Returns
    (h, r2, k_values, ok) where rows with zero moments, zero structure
    values, or non-finite data have ok=False and NaN estimates.

    Row-wise reductions keep each row's arithmetic independent of every
    other row, so batched results match single-series calls bit for bit.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n, length = x.shape
    sweep = config.tau_max_sweep
    tau_hi = config.tau_max if sweep is None else max(config.tau_max, max(sweep))
    if length <= 2 * tau_hi:
        raise SeriesTooShort(
            f"series of length {length} supports tau_max < {length / 2:.0f}, got {tau_hi}"
        )
    if config.detrend is not None:
        if config.detrend > length:
            raise ValidationError("detrend window exceeds series length")
        x = _detrend_rows(x, config.detrend)

    ok = np.all(np.isfinite(x), axis=1)
    taus = np.arange(config.nu, tau_hi + 1)
    n_q = len(config.q_grid)
    k_values = np.full((n, n_q, len(taus)), np.nan)
    for qi, q in enumerate(config.q_grid):
        den = np.mean(abs_power(x, q), axis=1)
        ok &= den > 0
        safe_den = np.where(den > 0, den, 1.0)
        for j, tau in enumerate(taus):
            num = np.mean(abs_power(x[:, tau:] - x[:, :-tau], q), axis=1)
            k_values[:, qi, j] = num / safe_den
    with np.errstate(invalid="ignore"):
        ok &= np.all(k_values > 0, axis=(1, 2)) & np.all(np.isfinite(k_values), axis=(1, 2))

    log_tau = np.log(taus / float(config.nu))
    h = np.full((n, n_q), np.nan)
    r2 = np.full((n, n_q), np.nan)
    fit_maxes = list(sweep) if sweep is not None else [config.tau_max]
    safe_k = np.where(k_values > 0, k_values, 1.0)
    for qi, q in enumerate(config.q_grid):
        # C-order is load-bearing: strided slices of the 3-D K array would
        # otherwise reach a different reduction kernel than single-row calls
        log_k = np.log(np.ascontiguousarray(safe_k[:, qi, :]))
        slopes = np.zeros(n)
        rsq = np.zeros(n)
        for fit_max in fit_maxes:
            sel = taus <= fit_max
            lx = log_tau[sel]
            s, r = ols_slope_rows(lx - lx.mean(), log_k[:, sel])
            slopes += s
            rsq += r
        h[:, qi] = slopes / (len(fit_maxes) * q)
        r2[:, qi] = rsq / len(fit_maxes)
    h[~ok] = np.nan
    r2[~ok] = np.nan
    keep = taus <= config.tau_max
    return h, r2, k_values[:, :, keep], taus[keep], ok


def estimate_ghe(
    series: SeriesView | np.ndarray,
    config: GheConfig,
    apply_cumsum: bool = True,
) -> GheResult:
    """Estimate H(q) over the configured q grid for one series.

    With apply_cumsum the estimate runs on the running sum of the series
    (prices accumulate to the actual return path); otherwise on the raw
    values. Raises DegenerateSeries rather than fitting through zero or
    non-finite structure values: a partial fit would silently change the
    estimator.
    """
    values = series.values if isinstance(series, SeriesView) else np.asarray(series, float)
    x = cumulative_sum(values) if apply_cumsum else np.asarray(values, dtype=np.float64)
    h, r2, k_values, taus, ok = _ghe_rows(x[None, :], config)
    if not ok[0]:
        raise DegenerateSeries(
            "series admits no scaling fit (zero moments, zero structure values, "
            "or non-finite data)"
        )
    return GheResult(config.q_grid, h[0], r2[0], taus, k_values[0])


def report_from_estimates(
    q_grid: tuple[float, ...],
    h: np.ndarray,
    ok: np.ndarray,
    n_series: int,
) -> MultiScalingReport:
    """Build the multi-scaling aggregate from a per-node estimate matrix."""
    n_skipped = int((~ok).sum())
    if not ok.any():
        raise AllSeriesDegenerate(f"all {n_series} series were degenerate")
    q = np.asarray(q_grid)
    qh = h[ok] * q[None, :]
    gap = None
    if 1.0 in q_grid and 2.0 in q_grid:
        i1 = q_grid.index(1.0)
        i2 = q_grid.index(2.0)
        gap = float(np.mean(h[ok, i1] - h[ok, i2]))
    return MultiScalingReport(
        q_grid=q_grid,
        mean_qh=qh.mean(axis=0),
        min_qh=qh.min(axis=0),
        max_qh=qh.max(axis=0),
        concavity_gap=gap,
        n_series=n_series,
        n_skipped=n_skipped,
    )


def multiscaling_report(
    panel: Panel,
    config: GheConfig,
    apply_cumsum: bool = True,
    threads: int = 1,
) -> MultiScalingReport:
    """Aggregate q*H_i(q) across the panel into mean/min/max curves.

    Degenerate series are skipped and counted; the report fails only when
    every series is degenerate.
    """
    h, _, ok = panel_node_estimates(panel, config, apply_cumsum, threads)
    return report_from_estimates(config.q_grid, h, ok, panel.n_nodes)


def spectral_exponent_check(
    series: SeriesView | np.ndarray,
    config: GheConfig,
    apply_cumsum: bool = True,
    fit_band: tuple[float, float] = (0.01, 0.1),
    peak_threshold: float = 10.0,
) -> tuple[float, float]:
    """Compare the spectral decay exponent with the 1 + 2*H(2) prediction.

    Returns (beta_spectral, beta_predicted). The spectral side is fitted on
    the periodogram of the first-differenced analysis series (the raw
    periodogram of a strongly red signal leaks across bins and caps fitted
    slopes near 2), then the exact +2 of the differencing transfer is added
    back. The fit runs over frequencies in fit_band (as fractions of the
    Nyquist frequency, default the decade ending at Nyquist/10, where the
    discrete-sampling fold is negligible), excluding any bins flagged as
    seasonal peaks.
    """
    values = series.values if isinstance(series, SeriesView) else np.asarray(series, float)
    x = cumulative_sum(values) if apply_cumsum else np.asarray(values, dtype=np.float64)

    cfg = config
    if 2.0 not in config.q_grid:
        cfg = replace(config, q_grid=config.q_grid + (2.0,))
    result = _estimate_on(x, cfg)
    h2 = result.h_at(2.0)
    beta_predicted = 1.0 + 2.0 * h2

    increments = np.diff(x)
    power = np.abs(np.fft.rfft(increments)) ** 2
    n = len(increments)
    k = np.arange(len(power))
    freqs = k / float(n)
    nyquist = 0.5
    lo, hi = fit_band
    sel = (freqs >= nyquist * lo) & (freqs <= nyquist * hi) & (k > 0)
    sel[find_peak_bins(power, threshold=peak_threshold)] = False
    if sel.sum() < 2:
        raise SeriesTooShort("too few spectral bins in the fit band")
    lx = np.log(freqs[sel])
    ly = np.log(power[sel])
    slope = float((lx - lx.mean()) @ (ly - ly.mean()) / ((lx - lx.mean()) @ (lx - lx.mean())))
    beta_spectral = -slope + 2.0
    return beta_spectral, beta_predicted


def _estimate_on(x: np.ndarray, config: GheConfig) -> GheResult:
    h, r2, k_values, taus, ok = _ghe_rows(x[None, :], config)
    if not ok[0]:
        raise DegenerateSeries("series admits no scaling fit")
    return GheResult(config.q_grid, h[0], r2[0], taus, k_values[0])


def detrending_robustness(
    series: SeriesView | np.ndarray,
    config: GheConfig,
    windows: tuple[int, ...] | list[int],
    apply_cumsum: bool = True,
) -> float:
    """Largest relative change of H(q) over a sweep of detrending windows.

    Returns max over windows and q of |H_detrended(q) - H_raw(q)| / |H_raw(q)|;
    0.0 for an empty sweep.
    """
    if not windows:
        return 0.0
    values = series.values if isinstance(series, SeriesView) else np.asarray(series, float)
    length = len(values)
    for dt in windows:
        if not 2 <= dt <= length / 4:
            raise ValidationError(f"detrend window {dt} outside [2, {length / 4:.0f}]")
    raw = estimate_ghe(values, replace(config, detrend=None), apply_cumsum)
    worst = 0.0
    for dt in windows:
        det = estimate_ghe(values, replace(config, detrend=int(dt)), apply_cumsum)
        rel = np.abs(det.h - raw.h) / np.abs(raw.h)
        worst = max(worst, float(rel.max()))
    return worst


def write_node_estimates_csv(
    path: str | Path,
    names: list[str],
    q_grid: tuple[float, ...],
    h: np.ndarray,
    r2: np.ndarray,
) -> None:
    """Per-node H(q) table; NaN rows (degenerate series) are left blank."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["node"]
        for q in q_grid:
            header += [f"H({q:g})", f"r2({q:g})"]
        writer.writerow(header)
        for i, name in enumerate(names):
            row = [name]
            for qi in range(len(q_grid)):
                hv, rv = h[i, qi], r2[i, qi]
                row += ["" if np.isnan(hv) else repr(float(hv)),
                        "" if np.isnan(rv) else repr(float(rv))]
            writer.writerow(row)


def panel_node_estimates(
    panel: Panel,
    config: GheConfig,
    apply_cumsum: bool = True,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """H and r2 matrices (nodes x q) for a whole panel, NaN where degenerate."""
    x = panel.values
    if apply_cumsum:
        x = np.cumsum(x, axis=1)
    idx = np.arange(panel.n_nodes)
    chunks = np.array_split(idx, max(1, min(threads, panel.n_nodes))) if threads > 1 else [idx]
    parts = parallel_map(lambda rows: _ghe_rows(x[rows], config), chunks, threads)
    h = np.vstack([p[0] for p in parts])
    r2 = np.vstack([p[1] for p in parts])
    ok = np.concatenate([p[4] for p in parts])
    return h, r2, ok
