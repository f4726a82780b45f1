"""FFT power spectra, panel-averaged spectra, peak detection, and notch filtering.

Hourly price series carry strong cyclic components (daily and intra-day).
This module finds them as dominant peaks in the one-sided power spectrum and
removes them by zeroing the corresponding DFT bins. Zeroing exact bins is
deterministic, idempotent, and leaves the rest of the spectrum untouched;
no window function is applied, since notching requires an unwindowed
transform to align bins.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import parallel_map
from .errors import PeriodOutOfRange, SeriesTooShort
from .panel import Panel, SeriesView

STANDARD_PERIODS = (24.0, 12.0, 8.0, 6.0)


@dataclass(frozen=True)
class FilterSpec:
    """Which periodic components to remove.

    periods_hours defaults to the four standard intra-day cycles. With
    bin_halfwidth = 0 only the exact bin is zeroed; series whose length is an
    exact multiple of every period make single-bin notches exact.
    """

    periods_hours: tuple[float, ...] = STANDARD_PERIODS
    bin_halfwidth: int = 0

    def __post_init__(self):
        if any(p < 2 for p in self.periods_hours):
            raise PeriodOutOfRange("filter periods must be at least 2 hours")
        if self.bin_halfwidth < 0:
            raise PeriodOutOfRange("bin_halfwidth must be non-negative")


@dataclass(frozen=True)
class SpectrumPeak:
    period_hours: float
    bin_index: int
    power_ratio: float  # peak power over the local median
    period_label: float | None  # nearest standard period, if within one bin


@dataclass
class SpectrumReport:
    bin_freqs: np.ndarray  # cycles/hour, one-sided, k = 0..T/2
    mean_power: np.ndarray
    peaks: list[SpectrumPeak]
    n_series: int

    def peak_periods(self) -> list[float]:
        return [p.period_label for p in self.peaks if p.period_label is not None]

    def to_json_dict(self) -> dict:
        return {
            "n_series": self.n_series,
            "bin_freqs": self.bin_freqs.tolist(),
            "mean_power": self.mean_power.tolist(),
            "peaks": [
                {
                    "period_hours": p.period_hours,
                    "bin_index": p.bin_index,
                    "power_ratio": p.power_ratio,
                    "period_label": p.period_label,
                }
                for p in self.peaks
            ],
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path: str | Path) -> None:
        flagged = {p.bin_index: p for p in self.peaks}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin", "freq", "power", "is_peak", "period_label"])
            for k in range(len(self.mean_power)):
                peak = flagged.get(k)
                writer.writerow(
                    [
                        k,
                        repr(float(self.bin_freqs[k])),
                        repr(float(self.mean_power[k])),
                        int(peak is not None),
                        "" if peak is None or peak.period_label is None else repr(peak.period_label),
                    ]
                )


def power_spectrum(series: SeriesView | np.ndarray) -> np.ndarray:
    """One-sided squared-magnitude spectrum of the raw series (no taper).

    Output length is floor(T/2) + 1; bin k corresponds to k/T cycles/hour.
    """
    values = series.values if isinstance(series, SeriesView) else np.asarray(series, float)
    if len(values) < 4:
        raise SeriesTooShort("power spectrum needs at least 4 samples")
    spec = np.fft.rfft(values)
    return (spec * spec.conj()).real


def local_median_ratio(power: np.ndarray, halfspan: int = 16) -> np.ndarray:
    """Power of each bin over the median of its +-halfspan neighborhood.

    Bin 0 (DC) gets ratio 0 so it is never flagged as a cycle.
    """
    n = len(power)
    ratio = np.zeros(n)
    for k in range(1, n):
        lo = max(0, k - halfspan)
        hi = min(n, k + halfspan + 1)
        med = np.median(power[lo:hi])
        ratio[k] = np.inf if med == 0 else power[k] / med
    return ratio


def find_peak_bins(power: np.ndarray, threshold: float = 10.0, halfspan: int = 16) -> np.ndarray:
    """Indices of bins whose power exceeds threshold times the local median."""
    return np.nonzero(local_median_ratio(power, halfspan) > threshold)[0]


def market_average_spectrum(
    panel: Panel,
    peak_threshold: float = 10.0,
    neighborhood: int = 16,
    standard_periods: tuple[float, ...] = STANDARD_PERIODS,
    threads: int = 1,
) -> SpectrumReport:
    """Average the per-node power spectra and flag dominant-period peaks.

    A bin is a peak when its power exceeds peak_threshold times the median
    power over the +-neighborhood bins around it. Peaks are annotated with
    the nearest standard period whose bin lies within one bin of the peak.
    """
    t_hours = panel.n_hours
    spectra = parallel_map(lambda i: power_spectrum(panel.series(i)), range(panel.n_nodes), threads)
    mean_power = np.mean(spectra, axis=0)
    ratios = local_median_ratio(mean_power, neighborhood)
    peaks = []
    for k in np.nonzero(ratios > peak_threshold)[0]:
        label = None
        best = 2.0
        for period in standard_periods:
            gap = abs(k - round(t_hours / period))
            if gap <= 1 and gap < best:
                best = gap
                label = float(period)
        peaks.append(
            SpectrumPeak(
                period_hours=t_hours / float(k),
                bin_index=int(k),
                power_ratio=float(ratios[k]),
                period_label=label,
            )
        )
    freqs = np.arange(len(mean_power)) / float(t_hours)
    return SpectrumReport(freqs, mean_power, peaks, panel.n_nodes)


def remove_components(series: SeriesView | np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Zero the DFT bins of the requested periods and transform back.

    Each period maps to bin round(T/period); that bin and its
    bin_halfwidth neighbors are zeroed on both conjugate sides (the
    one-sided transform handles mirrors implicitly). The DC bin is never
    touched, so the series mean is preserved. Applying the same spec twice
    is a no-op.
    """
    values = series.values if isinstance(series, SeriesView) else np.asarray(series, float)
    t = len(values)
    if t < 4:
        raise SeriesTooShort("filtering needs at least 4 samples")
    spectrum = np.fft.rfft(values)
    n_bins = len(spectrum)
    for period in spec.periods_hours:
        center = round(t / period)
        if center < 1:
            raise PeriodOutOfRange(
                f"period {period}h maps to bin {center} for a {t}-sample series"
            )
        for k in range(center - spec.bin_halfwidth, center + spec.bin_halfwidth + 1):
            if 1 <= k < n_bins:
                spectrum[k] = 0.0
    return np.fft.irfft(spectrum, n=t)
