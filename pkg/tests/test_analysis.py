import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import fft

from squidjpa.analysis import (
    FluxSweepRecord,
    StarkCalibration,
    drive_power_calibration,
    fit_reflection,
    flux_modulation_spectrum,
    photons_from_stark,
    reflection_model,
    resonator_input_power,
)
from squidjpa.errors import BadFit, FitDiverged, NonUniformGrid
from squidjpa.units import watts_to_dbm


def trace(f0=6e9, q=10.0, delay=3e-9, scale=0.8 * np.exp(0.4j), n=401, span=6.0, noise=0.0, seed=0):
    kappa = f0 / q
    f = np.linspace(f0 - span * kappa / 2, f0 + span * kappa / 2, n)
    s = reflection_model(f, f0, kappa, delay, scale)
    if noise:
        rng = np.random.default_rng(seed)
        s = s + noise * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return f, s


def test_reflection_exact_recovery():
    f, s = trace()
    fit = fit_reflection(f, s)
    assert math.isclose(fit.f0, 6e9, rel_tol=1e-9)
    assert math.isclose(fit.q_total, 10.0, rel_tol=1e-7)
    assert math.isclose(fit.delay, 3e-9, rel_tol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_reflection_noisy(seed):
    f, s = trace(noise=0.01, seed=seed)
    fit = fit_reflection(f, s)
    assert abs(fit.f0 / 6e9 - 1) < 1e-3
    assert abs(fit.q_total / 10 - 1) < 0.02


def test_reflection_phase_invariance():
    f, s = trace(noise=0.005, seed=3)
    a = fit_reflection(f, s)
    b = fit_reflection(f, s * np.exp(1.3j))
    # an optimum is only located to ~sqrt(eps) of the parameter scale
    assert abs(a.f0 - b.f0) < 1e-6 * a.kappa
    assert math.isclose(a.q_total, b.q_total, rel_tol=1e-6)
    assert abs(a.scale * np.exp(1.3j) - b.scale) < 1e-6


def test_reflection_unresolved():
    f, s = trace(span=0.5)
    with pytest.raises(FitDiverged):
        fit_reflection(f, s)


def sweep(n=256, tones=((8.0, 1.0),), dc=6e9, amp=20e6):
    b = np.linspace(0, 1, n)
    y = dc + sum(a * amp * np.cos(2 * np.pi * c * b) for c, a in tones)
    return FluxSweepRecord(b, y)


def expected_bin(cycles, n=256):
    # bin k has 1/(2 N step) k cycles per unit bias
    step = 1 / (n - 1)
    return cycles * 2 * n * step


def test_dct_single_tone():
    spec = flux_modulation_spectrum(sweep())
    assert abs(spec.peaks[0].index - expected_bin(8.0)) <= 1


def test_dct_two_tones_ratio():
    spec = flux_modulation_spectrum(sweep(tones=((4.0, 1.0), (12.0, 0.25))))
    idx = sorted(p.index for p in spec.peaks[:2])
    assert abs(idx[0] - expected_bin(4.0)) <= 1 and abs(idx[1] - expected_bin(12.0)) <= 1
    ratio = spec.peaks[0].magnitude / spec.peaks[1].magnitude
    assert abs(ratio / 4.0 - 1) < 0.10


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=16, max_size=64))
def test_dct_round_trip(y):
    y = np.array(y)
    back = fft.idct(fft.dct(y, type=2, norm="ortho"), type=2, norm="ortho")
    assert np.allclose(back, y, atol=1e-10 * max(1.0, np.abs(y).max()))


def test_dct_nonuniform_grid():
    b = np.linspace(0, 1, 64) ** 1.5
    with pytest.raises(NonUniformGrid):
        flux_modulation_spectrum(FluxSweepRecord(b, np.cos(b)))
    b2 = np.linspace(0, 1, 64)
    b2[10] += 0.03 * (b2[1] - b2[0])
    spec = flux_modulation_spectrum(FluxSweepRecord(b2, 6e9 + 1e7 * np.cos(16 * np.pi * b2)))
    assert spec.peaks


def test_dct_flat_input_no_peaks():
    b = np.linspace(0, 1, 64)
    spec = flux_modulation_spectrum(FluxSweepRecord(b, np.full(64, 6e9)))
    assert spec.peaks == []


def test_stark_arithmetic():
    cal = StarkCalibration(0.348e6, 1e6, 5.7e9)
    assert photons_from_stark(cal, 3.48e6) == 10.0
    assert photons_from_stark(cal, 0.0) == 0.0
    assert math.isclose(photons_from_stark(cal, 0.348e6), 1.0)
    assert photons_from_stark(cal, 2 * 1.234e6) == 2 * photons_from_stark(cal, 1.234e6)


def test_input_power_reference():
    cal = StarkCalibration(0.348e6, 1e6, 5.7e9)
    p = resonator_input_power(cal, 10.0)
    assert math.isclose(p, 5.93e-17, rel_tol=2e-3)
    assert abs(float(watts_to_dbm(p)) + 132.3) < 0.05


def test_drive_fit():
    cal = StarkCalibration(0.348e6, 1e6, 5.7e9)
    v = np.linspace(0.05, 0.5, 8)
    fit = drive_power_calibration(list(zip(v, 40 * v**2)), cal)
    assert abs(fit.exponent - 2) < 1e-3
    assert math.isclose(fit.photons_per_v2, 40.0)
    with pytest.raises(BadFit):
        drive_power_calibration(list(zip(v, 40 * v**3)), cal)
