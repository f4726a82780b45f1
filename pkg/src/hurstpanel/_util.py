"""Small shared helpers: least-squares fits on log grids and ordered parallel map."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def abs_power(d: np.ndarray, q: float) -> np.ndarray:
    """|d|**q with exact fast paths for q=1 and q=2.

    The fast paths keep batched and single-series code bit-identical: x*x is
    the same IEEE operation regardless of how the caller sliced the data.
    """
    if q == 1.0:
        return np.abs(d)
    if q == 2.0:
        return d * d
    return np.abs(d) ** q


def ols_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Plain least-squares line fit.

    Returns (slope, intercept, r2). r2 is defined as 1.0 when the responses
    are exactly constant (a perfect horizontal fit).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    sxy = float(xc @ yc)
    syy = float(yc @ yc)
    slope = sxy / sxx
    intercept = float(y.mean() - slope * x.mean())
    r2 = 1.0 if syy == 0.0 else min(1.0, (sxy * sxy) / (sxx * syy))
    return slope, intercept, r2


def ols_slope_rows(xc: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise OLS of y (n, m) against a shared centered abscissa xc (m,).

    Returns (slopes, r2) arrays of shape (n,). Uses elementwise products with
    per-row axis sums rather than BLAS matvec: the pairwise-sum kernel depends
    only on row content, keeping results identical however rows are batched.
    """
    y = np.ascontiguousarray(y)
    yc = y - y.mean(axis=1, keepdims=True)
    sxx = float((xc * xc).sum())
    sxy = (yc * xc[None, :]).sum(axis=1)
    syy = (yc * yc).sum(axis=1)
    slopes = sxy / sxx
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(syy == 0.0, 1.0, np.minimum(1.0, (sxy * sxy) / (sxx * syy)))
    return slopes, r2


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map fn over items, preserving order; threads <= 1 runs sequentially.

    Results are gathered in input order so reductions downstream are
    deterministic regardless of scheduling.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
