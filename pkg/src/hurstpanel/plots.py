"""Render report figures to files next to the delimited outputs.

Each report command has one figure mirroring its CSV: the averaged power
spectrum with flagged peaks, per-node exponent histograms, the q*H(q)
multi-scaling curve with its market envelope, rolling mean +- std bands,
the error-versus-Hurst cloud with its fitted line, and the c(p) curves.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .forecast import ForecastRecord, LogLinearFit
from .ghe import MultiScalingReport
from .rolling import RollingTrace
from .spectral import SpectrumReport


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_spectrum(report: SpectrumReport, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    sel = report.bin_freqs > 0
    ax.loglog(report.bin_freqs[sel], report.mean_power[sel], lw=0.7, color="navy")
    for peak in report.peaks:
        f = report.bin_freqs[peak.bin_index]
        ax.axvline(f, color="crimson", ls=":", lw=0.8)
        label = f"{peak.period_label:g}h" if peak.period_label else f"{peak.period_hours:.1f}h"
        ax.annotate(
            label,
            (f, report.mean_power[peak.bin_index]),
            textcoords="offset points",
            xytext=(3, 3),
            fontsize=8,
            color="crimson",
        )
    ax.set_xlabel("frequency (cycles/hour)")
    ax.set_ylabel("mean power")
    ax.set_title(f"market-average power spectrum ({report.n_series} nodes)")
    _save(fig, path)


def plot_node_hists(
    h: np.ndarray,
    q_grid: tuple[float, ...],
    path: str | Path,
) -> None:
    n_q = len(q_grid)
    fig, axes = plt.subplots(1, n_q, figsize=(4 * n_q, 3.2), squeeze=False)
    for qi, q in enumerate(q_grid):
        ax = axes[0][qi]
        vals = h[:, qi]
        vals = vals[np.isfinite(vals)]
        if len(vals):
            ax.hist(vals, bins=min(30, max(5, len(vals) // 3)), color="steelblue", ec="white")
        ax.axvline(0.5, color="k", ls="--", lw=0.8)
        ax.set_xlabel(f"H({q:g})")
        ax.set_ylabel("nodes")
    fig.suptitle("whole-series Hurst exponents by node")
    _save(fig, path)


def plot_multiscaling(report: MultiScalingReport, path: str | Path) -> None:
    q = np.asarray(report.q_grid)
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    ax.fill_between(q, report.min_qh, report.max_qh, alpha=0.25, color="steelblue",
                    label="market envelope")
    ax.plot(q, report.mean_qh, "o-", color="k", lw=1.2, label="market mean qH(q)")
    # uniscaling reference: straight line through the first point's slope
    h0 = report.mean_qh[0] / q[0]
    ax.plot(q, h0 * q, color="crimson", ls="--", lw=1.0, label="uniscaling reference")
    ax.set_xlabel("q")
    ax.set_ylabel("q H(q)")
    ax.legend(fontsize=8)
    title = "multi-scaling diagnostic"
    if report.concavity_gap is not None:
        title += f"  (mean H(1)-H(2) = {report.concavity_gap:.3f})"
    ax.set_title(title, fontsize=10)
    _save(fig, path)


def plot_rolling(trace: RollingTrace, path: str | Path) -> None:
    n_q = len(trace.q_grid)
    fig, axes = plt.subplots(n_q, 1, figsize=(9, 2.8 * n_q), sharex=True, squeeze=False)
    for qi, q in enumerate(trace.q_grid):
        ax = axes[qi][0]
        mean = trace.mean_h[qi]
        std = trace.std_h[qi]
        ax.fill_between(trace.times, mean - std, mean + std, alpha=0.3, color="steelblue")
        ax.plot(trace.times, mean, color="k", lw=0.9)
        ax.axhline(0.5, color="crimson", ls=":", lw=0.8)
        ax.set_ylabel(f"H({q:g})")
    axes[-1][0].set_xlabel("window end (hours)")
    fig.suptitle(f"rolling Hurst exponents (window {trace.window}h)")
    _save(fig, path)


def plot_error_vs_hurst(
    records: list[ForecastRecord],
    fit: LogLinearFit | None,
    q: float,
    path: str | Path,
) -> None:
    h = np.array([r.h1 if q == 1 else r.h2 for r in records])
    err = np.array([r.error for r in records])
    bad = np.array([r.degenerate for r in records])
    sel = (~bad) & (err > 0) & np.isfinite(h)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if sel.any():
        ax.hexbin(h[sel], np.log10(err[sel]), gridsize=60, cmap="Blues", mincnt=1)
    if fit is not None:
        hx = np.linspace(h[sel].min(), h[sel].max(), 50) if sel.any() else np.linspace(0, 1, 50)
        ax.plot(hx, np.log10(fit.e0) + fit.c * hx, color="crimson", lw=1.5,
                label=f"c = {fit.c:+.3f}")
        ax.legend()
    ax.set_xlabel(f"H({q:g}) on training window")
    ax.set_ylabel("log10 forecast error")
    ax.set_title("forecast error vs Hurst exponent", fontsize=10)
    _save(fig, path)


def plot_slope_curves(
    curves: dict[str, list[tuple[int, LogLinearFit | None]]],
    q: float,
    path: str | Path,
) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.2))
    styles = {"unfiltered": "-", "filtered": "--"}
    for label, curve in curves.items():
        ps = [p for p, fit in curve if fit is not None]
        cs = [fit.c for _, fit in curve if fit is not None]
        ax.plot(ps, cs, styles.get(label, "-"), marker="o", ms=3, label=label)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel("forecast lag p (hours)")
    ax.set_ylabel(f"slope c of log10 E vs H({q:g})")
    ax.legend()
    _save(fig, path)
