"""Dynamic Hurst exponents on moving windows with market envelopes.

Each window of `window` samples is treated as a fresh price segment: the
running sum is taken inside the window before estimating, so estimates are
invariant to the price level outside the window. Windows that admit no
estimate become gaps (NaN), never sentinel values, so the mean/std envelopes
are unbiased.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._util import parallel_map
from .errors import ValidationError, WindowTooSmall
from .ghe import GheConfig, _ghe_rows
from .panel import Panel
from .spectral import FilterSpec, remove_components


def _default_rolling_ghe() -> GheConfig:
    return GheConfig(q_grid=(1.0, 2.0), tau_max=24)


@dataclass(frozen=True)
class RollingConfig:
    """Moving-window estimation parameters.

    The window must strictly exceed twice the lag range
    (window > 2 * ghe.tau_max) so every windowed estimate satisfies the
    estimator's own length requirement. With `filtered`, cyclic components
    are removed from the full series once before windowing; a 50-sample
    window cannot resolve a 24-hour bin on its own.
    """

    window: int = 50
    stride: int = 1
    ghe: GheConfig = field(default_factory=_default_rolling_ghe)
    filtered: bool = False
    filter_spec: FilterSpec = field(default_factory=FilterSpec)
    keep_node_matrix: bool = False

    def __post_init__(self):
        if self.window < 8:
            raise ValidationError("rolling window must be at least 8 samples")
        if self.stride < 1:
            raise ValidationError("stride must be at least 1")
        if 2 * self.ghe.tau_max >= self.window:
            raise ValidationError(
                f"window {self.window} needs tau_max < {self.window / 2:.0f}, "
                f"got {self.ghe.tau_max}"
            )
        if self.ghe.tau_max_sweep is not None and 2 * max(self.ghe.tau_max_sweep) >= self.window:
            raise ValidationError("tau_max sweep exceeds what the window supports")


@dataclass
class RollingTrace:
    """Envelope of windowed estimates across the market.

    times are window-end sample indices. mean_h/std_h have shape
    (len(q_grid), len(times)); NaN marks windows where every node was
    degenerate. node_h, when kept, has shape (n_nodes, n_q, n_times).
    """

    times: np.ndarray
    q_grid: tuple[float, ...]
    mean_h: np.ndarray
    std_h: np.ndarray
    node_h: np.ndarray | None
    n_degenerate: int
    window: int
    stride: int

    def mean_for(self, q: float) -> np.ndarray:
        return self.mean_h[self.q_grid.index(q)]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["time"]
            for q in self.q_grid:
                header += [f"mean_H{q:g}", f"std_H{q:g}"]
            writer.writerow(header)
            for j, t in enumerate(self.times):
                row = [int(t)]
                for qi in range(len(self.q_grid)):
                    for arr in (self.mean_h, self.std_h):
                        v = arr[qi, j]
                        row.append("" if np.isnan(v) else repr(float(v)))
                writer.writerow(row)

    def write_node_matrix_csv(self, path: str | Path, names: list[str]) -> None:
        if self.node_h is None:
            raise ValidationError("trace was built without keep_node_matrix")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "node", "q", "H"])
            for j, t in enumerate(self.times):
                for i, name in enumerate(names):
                    for qi, q in enumerate(self.q_grid):
                        v = self.node_h[i, qi, j]
                        writer.writerow(
                            [int(t), name, f"{q:g}", "" if np.isnan(v) else repr(float(v))]
                        )

    def write_json(self, path: str | Path) -> None:
        doc = {
            "window": self.window,
            "stride": self.stride,
            "q_grid": list(self.q_grid),
            "times": self.times.tolist(),
            "mean_h": [[None if np.isnan(v) else v for v in row] for row in self.mean_h],
            "std_h": [[None if np.isnan(v) else v for v in row] for row in self.std_h],
            "n_degenerate": self.n_degenerate,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def rolling_ghe(panel: Panel, config: RollingConfig, threads: int = 1) -> RollingTrace:
    """Windowed estimates for every node, aggregated into mean/std envelopes.

    Trace length is floor((T - window) / stride) + 1. Estimates with stride
    s are exactly the stride-s subsequence of the stride-1 estimates, and
    each window's estimate depends only on samples inside the window.
    """
    t_hours = panel.n_hours
    if t_hours <= config.window:
        raise WindowTooSmall(
            f"panel has {t_hours} hours; rolling needs more than window={config.window}"
        )
    starts = np.arange(0, t_hours - config.window + 1, config.stride)
    times = starts + config.window - 1
    n_q = len(config.ghe.q_grid)

    def node_trace(i: int) -> np.ndarray:
        values = panel.values[i]
        if config.filtered:
            values = remove_components(values, config.filter_spec)
        windows = np.ascontiguousarray(sliding_window_view(values, config.window)[starts])
        x = np.cumsum(windows, axis=1)
        h, _, _, _, _ = _ghe_rows(x, config.ghe)
        return h.T  # (n_q, n_windows)

    per_node = parallel_map(node_trace, range(panel.n_nodes), threads)
    node_h = np.stack(per_node)  # (n_nodes, n_q, n_windows)
    n_degenerate = int(np.isnan(node_h[:, 0, :]).sum())

    counts = np.sum(~np.isnan(node_h), axis=0)  # (n_q, n_windows)
    with np.errstate(invalid="ignore", divide="ignore"):
        total = np.nansum(node_h, axis=0)
        mean_h = np.where(counts > 0, total / counts, np.nan)
        sq = np.nansum((node_h - mean_h[None, :, :]) ** 2, axis=0)
        std_h = np.where(counts > 0, np.sqrt(sq / counts), np.nan)

    return RollingTrace(
        times=times,
        q_grid=config.ghe.q_grid,
        mean_h=mean_h,
        std_h=std_h,
        node_h=node_h if config.keep_node_matrix else None,
        n_degenerate=n_degenerate,
        window=config.window,
        stride=config.stride,
    )


def detect_shifts(
    trace: RollingTrace,
    q: float,
    threshold: float = 0.1,
) -> list[tuple[int, float]]:
    """Window-end times where the market mean jumps by more than threshold.

    Returns (time, signed jump) pairs; steps into or out of gaps are never
    flagged. An unreachable threshold yields an empty list.
    """
    if len(trace.times) == 0:
        raise ValidationError("trace is empty")
    mean = trace.mean_for(q)
    out = []
    for j in range(1, len(mean)):
        jump = mean[j] - mean[j - 1]
        if np.isfinite(jump) and abs(jump) > threshold:
            out.append((int(trace.times[j]), float(jump)))
    return out


def group_shifts(
    shifts: list[tuple[int, float]],
    max_gap: int,
) -> list[tuple[int, int, float]]:
    """Merge flagged times closer than max_gap samples into regions.

    Returns (start_time, end_time, largest |jump|) per region.
    """
    if not shifts:
        return []
    regions = []
    start, end, peak = shifts[0][0], shifts[0][0], abs(shifts[0][1])
    for t, jump in shifts[1:]:
        if t - end <= max_gap:
            end = t
            peak = max(peak, abs(jump))
        else:
            regions.append((start, end, peak))
            start, end, peak = t, t, abs(jump)
    regions.append((start, end, peak))
    return regions
