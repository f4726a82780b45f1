import math

import numpy as np
import pytest

from hurstpanel import (
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
    power_spectrum,
)
from hurstpanel.errors import ValidationError


def test_fbm_deterministic_per_seed():
    spec = FbmSpec(hurst=0.7, length=1024, seed=123)
    assert np.array_equal(gen_fbm(spec).values, gen_fbm(spec).values)
    other = gen_fbm(FbmSpec(hurst=0.7, length=1024, seed=124))
    assert not np.array_equal(gen_fbm(spec).values, other.values)


def test_fbm_path_is_cumsum_of_increments():
    inc = gen_fbm(FbmSpec(hurst=0.6, length=256, seed=9, output="increments"))
    path = gen_fbm(FbmSpec(hurst=0.6, length=256, seed=9, output="path"))
    assert np.allclose(np.cumsum(inc.values), path.values, rtol=1e-12)


def test_fbm_h05_increments_uncorrelated():
    inc = gen_fbm(FbmSpec(hurst=0.5, length=2 ** 14, seed=0, output="increments")).values
    x = inc - inc.mean()
    rho1 = (x[1:] @ x[:-1]) / (x @ x)
    assert abs(rho1) <= 0.03


def test_fbm_autocovariance_matches_closed_form():
    # sample autocovariance across seeds vs gamma(k), within 3 standard errors
    hurst, length, n_seeds = 0.7, 2 ** 13, 12
    lags = np.arange(1, 11)
    gamma = fgn_autocovariance(hurst, lags)
    samples = np.zeros((n_seeds, len(lags)))
    for s in range(n_seeds):
        inc = gen_fbm(FbmSpec(hurst=hurst, length=length, seed=100 + s,
                              output="increments")).values
        x = inc - inc.mean()
        for j, k in enumerate(lags):
            samples[s, j] = (x[k:] @ x[:-k]) / len(x)
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(n_seeds)
    assert np.all(np.abs(mean - gamma) <= 3.0 * se)


def test_fbm_variance_scaling():
    # Var[X(t+tau)-X(t)] = tau^(2H) exactly; increments have zero mean, so the
    # raw second moment is the unbiased path estimator
    for hurst in (0.3, 0.7):
        slopes = []
        for seed in range(10):
            path = gen_fbm(FbmSpec(hurst=hurst, length=2 ** 13, seed=seed)).values
            taus = np.unique(np.geomspace(1, len(path) // 8, 12).astype(int))
            var = [np.mean((path[t:] - path[:-t]) ** 2) for t in taus]
            lx, ly = np.log(taus), np.log(var)
            lxc = lx - lx.mean()
            slopes.append(lxc @ (ly - ly.mean()) / (lxc @ lxc))
        assert abs(np.mean(slopes) - 2 * hurst) < 0.05


def test_fbm_spec_validation():
    with pytest.raises(ValidationError):
        FbmSpec(hurst=0.0, length=1024, seed=0)
    with pytest.raises(ValidationError):
        FbmSpec(hurst=1.0, length=1024, seed=0)
    with pytest.raises(ValidationError):
        FbmSpec(hurst=0.5, length=1000, seed=0)  # not a power of two
    with pytest.raises(ValidationError):
        FbmSpec(hurst=0.5, length=32, seed=0)
    with pytest.raises(ValidationError):
        FbmSpec(hurst=0.5, length=1024, seed=0, output="steps")


def test_cascade_symmetric_multiplier_is_uniform():
    masses = gen_cascade(CascadeSpec(m0=0.5, depth=8, seed=0)).values
    assert np.allclose(masses, 2.0 ** -8, rtol=0, atol=1e-15)


def test_cascade_mass_conservation():
    for depth in (6, 10, 14):
        masses = gen_cascade(CascadeSpec(m0=0.6, depth=depth, seed=1)).values
        assert len(masses) == 2 ** depth
        assert abs(math.fsum(masses) - 1.0) < 1e-12


def test_cascade_partition_exponent_matches_closed_form():
    m0 = 0.6
    expected = -math.log2(m0 ** 2 + (1 - m0) ** 2)  # -log2(0.52)
    for seed in (0, 1, 2):
        masses = gen_cascade(CascadeSpec(m0=m0, depth=14, seed=seed)).values
        tau2 = cascade_partition_exponent(masses, 2.0)
        assert tau2 == pytest.approx(expected, abs=1e-9)
    # scaling holds for other moments too
    masses = gen_cascade(CascadeSpec(m0=m0, depth=14, seed=0)).values
    for q in (1.0, 3.0):
        expected_q = -math.log2(m0 ** q + (1 - m0) ** q)
        assert cascade_partition_exponent(masses, q) == pytest.approx(expected_q, abs=1e-9)


def test_cascade_deterministic_and_validated():
    spec = CascadeSpec(m0=0.7, depth=8, seed=5)
    assert np.array_equal(gen_cascade(spec).values, gen_cascade(spec).values)
    with pytest.raises(ValidationError):
        CascadeSpec(m0=0.4, depth=8, seed=0)
    with pytest.raises(ValidationError):
        CascadeSpec(m0=1.0, depth=8, seed=0)
    with pytest.raises(ValidationError):
        CascadeSpec(m0=0.6, depth=5, seed=0)


def test_seasonal_exact_bin_peak():
    sv = gen_seasonal(SeasonalSpec(components=((24.0, 1.0),), length=1632))
    p = power_spectrum(sv.values)
    assert np.argmax(p) == 68


def test_seasonal_amplitude_power_ratio():
    sv = gen_seasonal(SeasonalSpec(components=((24.0, 3.0), (12.0, 1.0)), length=1632))
    p = power_spectrum(sv.values)
    assert p[68] / p[136] == pytest.approx(9.0, abs=1e-9)


def test_seasonal_noise_only_equals_fbm():
    noise = FbmSpec(hurst=0.6, length=1024, seed=7, output="increments")
    sv = gen_seasonal(SeasonalSpec(components=((24.0, 0.0),), length=1024, noise=noise))
    assert np.array_equal(sv.values, gen_fbm(noise).values)


def test_seasonal_noise_truncation():
    noise = FbmSpec(hurst=0.5, length=2048, seed=3, output="increments")
    sv = gen_seasonal(SeasonalSpec(components=(), length=1500, noise=noise))
    assert len(sv.values) == 1500
    assert np.array_equal(sv.values, gen_fbm(noise).values[:1500])


def test_seasonal_validation():
    with pytest.raises(ValidationError):
        SeasonalSpec(components=((24.0, -1.0),), length=100)
    with pytest.raises(ValidationError):
        SeasonalSpec(components=((0.0, 1.0),), length=100)
    with pytest.raises(ValidationError):
        SeasonalSpec(
            components=(),
            length=5000,
            noise=FbmSpec(hurst=0.5, length=1024, seed=0),
        )


def test_make_panel_and_fbm_panel():
    panel = fbm_panel([0.4, 0.8], length=256, seed=10)
    assert panel.n_nodes == 2
    assert panel.n_hours == 256
    # node i uses seed + i
    direct = gen_fbm(FbmSpec(hurst=0.8, length=256, seed=11, output="increments"))
    assert np.array_equal(panel.values[1], direct.values)
    with pytest.raises(ValidationError):
        make_panel([])
    a = gen_fbm(FbmSpec(hurst=0.5, length=256, seed=0))
    b = gen_fbm(FbmSpec(hurst=0.5, length=512, seed=0))
    with pytest.raises(ValidationError):
        make_panel([a, b])
