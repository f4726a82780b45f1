"""Synthetic series with analytically known scaling, used as ground truth.

Three generators cover the behaviours the estimators must discriminate:

* fractional Gaussian noise / fractional Brownian motion with exact target
  covariance (circulant embedding), the canonical uni-scaling process;
* the binomial multiplicative cascade, the canonical multi-scaling measure
  with closed-form partition-function exponents
  tau(q) = -log2(m0**q + (1-m0)**q);
* harmonic seasonal series (cosines at chosen periods plus optional fGn
  noise) reproducing the peak structure of market spectra.

All generators are pure functions of their spec, seed included.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import EmbeddingFailure, ValidationError
from .panel import DEFAULT_START, ComponentRole, NodeId, Panel, SeriesView


@dataclass(frozen=True)
class FbmSpec:
    """Exact-covariance fractional noise sample.

    output selects fractional Gaussian noise ("increments", unit variance)
    or its running sum ("path", fractional Brownian motion). length must be
    a power of two of at least 64 so the embedding stays well conditioned.
    """

    hurst: float
    length: int
    seed: int
    output: str = "path"

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValidationError("hurst must lie strictly between 0 and 1")
        if self.length < 64 or self.length & (self.length - 1):
            raise ValidationError("length must be a power of two >= 64")
        if self.output not in ("path", "increments"):
            raise ValidationError("output must be 'path' or 'increments'")


@dataclass(frozen=True)
class CascadeSpec:
    """Binomial multiplicative cascade over 2**depth cells."""

    m0: float
    depth: int
    seed: int

    def __post_init__(self):
        if not 0.5 <= self.m0 < 1.0:
            raise ValidationError("m0 must lie in [0.5, 1)")
        if self.depth < 6:
            raise ValidationError("depth must be at least 6")

    @property
    def length(self) -> int:
        return 2 ** self.depth


@dataclass(frozen=True)
class SeasonalSpec:
    """Sum of cosines at (period_hours, amplitude) pairs plus optional noise.

    The noise spec's length must cover this spec's length; the generated
    noise is truncated to fit (harmless for a stationary increment process).
    """

    components: tuple[tuple[float, float], ...]
    length: int
    noise: FbmSpec | None = None

    def __post_init__(self):
        if self.length < 2:
            raise ValidationError("length must be at least 2")
        if any(a < 0 for _, a in self.components):
            raise ValidationError("amplitudes must be non-negative")
        if any(p <= 0 for p, _ in self.components):
            raise ValidationError("periods must be positive")
        if self.noise is not None and self.noise.length < self.length:
            raise ValidationError("noise length must cover the seasonal length")


def fgn_autocovariance(hurst: float, lags: np.ndarray) -> np.ndarray:
    """Closed-form fGn autocovariance gamma(k) for unit-variance increments."""
    k = np.asarray(lags, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * np.abs(k) ** h2 + np.abs(k - 1) ** h2)


def _fgn_davies_harte(hurst: float, length: int, rng: np.random.Generator) -> np.ndarray:
    """Sample exact-covariance fGn by circulant embedding.

    The embedding row is [gamma(0..T), gamma(T-1..1)]; its FFT gives the
    circulant eigenvalues, which must be non-negative. On failure the
    embedding is doubled up to three times before giving up.
    """
    embed = length
    for _ in range(4):
        gamma = fgn_autocovariance(hurst, np.arange(embed + 1))
        row = np.concatenate([gamma[:-1], [gamma[embed]], gamma[embed - 1:0:-1]])
        eig = np.fft.fft(row).real
        if eig.min() >= -1e-10 * eig.max():
            eig = np.maximum(eig, 0.0)
            m = 2 * embed
            g1 = rng.standard_normal(embed + 1)
            g2 = rng.standard_normal(embed + 1)
            w = np.zeros(m, dtype=complex)
            w[0] = np.sqrt(eig[0] / m) * g1[0]
            w[1:embed] = np.sqrt(eig[1:embed] / (2 * m)) * (g1[1:embed] + 1j * g2[1:embed])
            w[embed] = np.sqrt(eig[embed] / m) * g2[0]
            w[embed + 1:] = np.conj(w[embed - 1:0:-1])
            return np.fft.fft(w)[:length].real
        embed *= 2
    raise EmbeddingFailure(
        f"circulant embedding stayed indefinite after 3 doublings (H={hurst}, T={length})"
    )


def gen_fbm(spec: FbmSpec) -> SeriesView:
    """Fractional noise (or its path) with exact covariance, deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    increments = _fgn_davies_harte(spec.hurst, spec.length, rng)
    values = np.cumsum(increments) if spec.output == "path" else increments
    name = f"fbm-h{spec.hurst:g}-s{spec.seed}"
    return SeriesView(NodeId(name, ComponentRole.OTHER), values)


def gen_cascade(spec: CascadeSpec) -> SeriesView:
    """Binomial cascade measure as an increment series of cell masses.

    Each refinement splits every cell's mass by factors m0 / (1 - m0) with
    the heavier side chosen uniformly at random per branch. The multiset of
    cell masses is deterministic; only their arrangement is random, so the
    dyadic partition function matches the closed-form tau(q) exactly.
    """
    rng = np.random.default_rng(spec.seed)
    masses = np.array([1.0])
    for _ in range(spec.depth):
        heavy_left = rng.random(len(masses)) < 0.5
        left = np.where(heavy_left, spec.m0, 1.0 - spec.m0)
        children = np.empty(2 * len(masses))
        children[0::2] = masses * left
        children[1::2] = masses * (1.0 - left)
        masses = children
    name = f"cascade-m{spec.m0:g}-d{spec.depth}-s{spec.seed}"
    return SeriesView(NodeId(name, ComponentRole.OTHER), masses)


def cascade_partition_exponent(masses: np.ndarray, q: float, max_level: int | None = None) -> float:
    """Empirical tau(q) from the dyadic partition function of a cascade.

    Sums mass**q over boxes of 2**j cells for each dyadic size and fits
    log2(sum) against log2(size). Serves as the independent oracle for the
    closed-form -log2(m0**q + (1-m0)**q).
    """
    n = len(masses)
    depth = int(np.log2(n))
    if 2 ** depth != n:
        raise ValidationError("cascade length must be a power of two")
    levels = range(0, (max_level if max_level is not None else depth // 2) + 1)
    log_sizes, log_sums = [], []
    for j in levels:
        box = masses.reshape(-1, 2 ** j).sum(axis=1)
        log_sizes.append(float(j))
        log_sums.append(float(np.log2(np.sum(box ** q))))
    x = np.asarray(log_sizes)
    y = np.asarray(log_sums)
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


def gen_seasonal(spec: SeasonalSpec) -> SeriesView:
    """Cosines at the requested periods plus optional fGn noise."""
    t = np.arange(spec.length, dtype=float)
    values = np.zeros(spec.length)
    for period, amplitude in spec.components:
        values += amplitude * np.cos(2.0 * np.pi * t / period)
    if spec.noise is not None:
        values = values + gen_fbm(spec.noise).values[: spec.length]
    name = f"seasonal-{len(spec.components)}c-T{spec.length}"
    return SeriesView(NodeId(name, ComponentRole.OTHER), values)


def make_panel(
    series: list[SeriesView],
    start_time: datetime = DEFAULT_START,
    rename: bool = True,
) -> Panel:
    """Stack generated series into a panel (names uniquified when asked)."""
    if not series:
        raise ValidationError("make_panel needs at least one series")
    lengths = {len(s.values) for s in series}
    if len(lengths) != 1:
        raise ValidationError(f"series lengths differ: {sorted(lengths)}")
    if rename:
        nodes = [NodeId(f"{s.node.name}-{i}", s.node.role) for i, s in enumerate(series)]
    else:
        nodes = [s.node for s in series]
    values = np.vstack([s.values for s in series])
    return Panel(nodes, start_time, values)


def fbm_panel(
    hursts: list[float] | tuple[float, ...],
    length: int,
    seed: int,
    output: str = "increments",
    start_time: datetime = DEFAULT_START,
) -> Panel:
    """Panel of independent fractional-noise nodes, one per requested H.

    Node i is generated from seed + i, so panels are reproducible and nodes
    are independent.
    """
    series = [
        gen_fbm(FbmSpec(hurst=h, length=length, seed=seed + i, output=output))
        for i, h in enumerate(hursts)
    ]
    return make_panel(series, start_time)
