import math

import numpy as np
import pytest

from squidjpa.dynamics import amplitude_for_dbm, integrate_to_steady_state, make_two_tone
from squidjpa.errors import NoCompressionInRange
from squidjpa.metrics import (
    SaturationResult,
    bandwidth_3db,
    compression_point,
    estimate_pump_dbm,
    measure_gain,
    photon_gains,
    pump_added_efficiency,
    pump_frequency,
    tune_pump,
)


def test_pump_frequency_on_grid(device_a):
    _, bias = device_a
    fp = pump_frequency(bias)
    assert fp == 12e9
    assert (fp / 1e6) % 2 == 0


def test_bandwidth_of_lorentzian():
    f = np.linspace(-50, 50, 20001)
    g = 10 * np.log10(100 / (1 + (f / 5.0) ** 2))
    assert math.isclose(bandwidth_3db(f, g), 2 * 5.0 * math.sqrt(10 ** 0.3 - 1), rel_tol=1e-4)
    assert math.isnan(bandwidth_3db(f[:10000], np.linspace(0, 1, 10000)))


def test_compression_point_interpolates():
    sweep = [(-130, 20.0), (-120, 19.8), (-110, 19.5), (-100, 18.5)]
    assert math.isclose(compression_point(sweep, 20.0), -105.0)
    with pytest.raises(NoCompressionInRange):
        compression_point(sweep[:3], 20.0)


def test_pae_arithmetic():
    sat = SaturationResult(-100.0, -81.0, 20.0, [])
    eta, db = pump_added_efficiency(sat, -60.0)
    p_out, p_in, p_p = 10 ** (-81 / 10), 10 ** (-100 / 10), 10 ** (-60 / 10)
    assert math.isclose(eta, (p_out - p_in) / p_p, rel_tol=1e-12)
    assert math.isclose(db, 10 * math.log10(eta))
    eta2, _ = pump_added_efficiency(sat, -60.0, subtract_input=False)
    assert eta2 > eta


def test_pump_off_gain_is_unity(device_a):
    params, bias = device_a
    pt = measure_gain(params, bias, -math.inf)
    assert abs(pt.gain_db) < 1e-6
    assert pt.solution.power_balance < 1e-6


def test_zero_target_returns_pump_off(device_a):
    params, bias = device_a
    r = tune_pump(params, bias, target_gain_db=0.0)
    assert r.pump_power_dbm == -math.inf
    assert abs(r.achieved_gain_db) < 1e-6


def test_estimate_is_finite(device_a):
    params, bias = device_a
    est = estimate_pump_dbm(params, bias)
    assert -60 < est < -30


@pytest.mark.slow
def test_moderate_gain_unitarity(device_a):
    params, bias = device_a
    pt = measure_gain(params, bias, -45.0)
    gs, gi = photon_gains(pt)
    assert 3 < pt.gain_db < 15
    assert abs(gs - gi - 1.0) < 0.02


@pytest.mark.slow
def test_sideband_manley_rowe_closes(device_a):
    """Photon flux of all probe-linear sidebands ``m fp +/- fs`` balances.

    The two-mode relation ``G_s - G_i = 1`` misses flux scattered into
    ``fp +/- fs`` and higher; the full signed sum vanishes for a lossless
    reactance.
    """
    params, bias = device_a
    base = 1e6
    fp = pump_frequency(bias, base)
    fs = 0.5 * fp + base
    drive = make_two_tone(fp, base, base, amplitude_for_dbm(-45.0, 2 * math.pi * fp, params.r_env),
                          amplitude_for_dbm(-140.0, 2 * math.pi * fs, params.r_env))
    family = [(n, m * fp + n * fs) for m in range(5) for n in (1, -1) if m * fp + n * fs > 0]
    track = sorted({drive.multiple(f) for _, f in family} | {drive.multiple(fp), drive.multiple(2 * fp), 0})
    sol = integrate_to_steady_state(params, bias, drive, track=track)
    n_in = sol.power(fs, "phi_in") / fs
    flux = {f: sol.power(f) / f / n_in - (f == fs) for _, f in family}
    two_mode = flux[fs] - flux[fp - fs]
    total = sum(n * flux[f] for n, f in family)
    assert abs(two_mode) > 1e-3
    assert abs(total) < 1e-6


@pytest.mark.slow
def test_tune_from_above_steps_down(device_a):
    params, bias = device_a
    r = tune_pump(params, bias, 10.0, start_dbm=-42.0, tol_db=0.1)
    assert abs(r.achieved_gain_db - 10.0) <= 0.1
    assert r.pump_power_dbm < -42.0
    assert r.max_power_balance < 1e-2
