"""Acceptance criteria 1-11, one test each, each printing a PASS/FAIL line.

Expensive shared runs (device-A tune-up and saturation, the 6x6 desk map,
the device-A bias contour) are module fixtures, so each is computed once.
"""

import math
import os
import time

import numpy as np
import pytest

from squidjpa.analysis import (
    FluxSweepRecord,
    StarkCalibration,
    drive_power_calibration,
    flux_modulation_spectrum,
    photons_from_stark,
)
from squidjpa.circuit import (
    CircuitParams,
    array_inductance,
    max_c3_bias,
    max_c3_bias_numeric,
    resonant_frequency,
)
from squidjpa.cli import main as cli_main
from squidjpa.coupling import capacitive_network, pce, total_efficiency
from squidjpa.design_space import bias_pump_map, build_family, design_map
from squidjpa.dynamics import (
    PROBE,
    DriveSpec,
    SolverOptions,
    Tone,
    amplitude_for_dbm,
    integrate_to_steady_state,
)
from squidjpa.metrics import find_p1db, measure_gain, photon_gains, pump_added_efficiency, tune_pump
from squidjpa.parallel import default_workers

pytestmark = pytest.mark.slow

RESULTS = []

DEVICE_A = dict(l_shunt=15e-12, q_target=8.1, l_junction=60e-12, n_squids=25, f0_target=6e9)
C_COUPLING = 0.26e-12


def report(n, title, ok, detail):
    line = f"ACCEPTANCE #{n:<2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


class Timed:
    def __init__(self, fn):
        t0 = time.perf_counter()
        self.value = fn()
        self.seconds = time.perf_counter() - t0


@pytest.fixture(scope="module")
def device():
    return build_family(**DEVICE_A)


@pytest.fixture(scope="module")
def lossless(device):
    params, bias = device
    f0 = bias.f0
    kappa = f0 / 8.1
    freqs = [round((f0 + d * kappa) / 1e6) * 1e6 for d in np.linspace(-3, 3, 21)]

    def run():
        sols = []
        for f in freqs:
            amp = amplitude_for_dbm(-140.0, 2 * math.pi * f, params.r_env)
            drive = DriveSpec(f, (Tone(f, amp, 0.0, PROBE),))
            sols.append(integrate_to_steady_state(params, bias, drive, SolverOptions(target_gain_db=0.0)))
        return sols

    return freqs, Timed(run)


@pytest.fixture(scope="module")
def tuned(device):
    params, bias = device
    return Timed(lambda: tune_pump(params, bias, 20.0))


@pytest.fixture(scope="module")
def saturation(device, tuned):
    params, bias = device
    t = tuned.value
    return Timed(lambda: find_p1db(params, bias, t.pump_power_dbm, t.achieved_gain_db))


@pytest.fixture(scope="module")
def desk_map():
    return Timed(lambda: design_map(workers=default_workers()))


BIAS_FLUX_QUANTA = np.round(np.arange(0.20, 0.4001, 0.01), 4)
BIAS_PUMPS = np.arange(-45.0, -32.5, 1.0)


@pytest.fixture(scope="module")
def contour(device):
    params, _ = device
    phi = 2 * math.pi * BIAS_FLUX_QUANTA
    return Timed(lambda: bias_pump_map(params, phi, BIAS_PUMPS, 20.0, workers=default_workers()))


# ---------------------------------------------------------------- criteria


def test_01_lossless_reflection(lossless):
    freqs, run = lossless
    dev = [abs(abs(s.amplitude(f)) / abs(s.amplitude(f, "phi_in")) - 1) for f, s in zip(freqs, run.value)]
    ok = max(dev) <= 1e-6 and run.seconds < 10 and len(freqs) == 21
    report(1, "lossless reflection", ok,
           f"max | |phi_out/phi_in| - 1 | = {max(dev):.2e} over 21 points (tol 1e-6), {run.seconds:.1f} s")


def test_02_dc_closed_forms():
    t0 = time.perf_counter()
    params, bias = build_family(**DEVICE_A)
    err_phi = abs(max_c3_bias_numeric(params) - (math.pi / 2 + params.beta))
    err_l = abs(array_inductance(params, bias) - 25 * 15e-12) / (25 * 15e-12)
    p2 = CircuitParams(25, 15e-12, 60e-12, 2e-12, 50.0)
    f0 = resonant_frequency(p2, max_c3_bias(p2)) / (2 * math.pi)
    dt = time.perf_counter() - t0
    ok = err_phi <= 1e-9 and err_l <= 1e-14 and 5.70e9 <= f0 <= 6.10e9 and dt < 1
    report(2, "DC/bias closed forms", ok,
           f"|phi_e* - (pi/2+beta)| = {err_phi:.1e}, L_arr rel err {err_l:.1e}, "
           f"f0(C=2 pF) = {f0 / 1e9:.4f} GHz, {dt:.2f} s")


def test_03_tune_up(tuned):
    t = tuned.value
    ok = abs(t.achieved_gain_db - 20.0) <= 0.05 and tuned.seconds < 300
    report(3, "20 dB tune-up", ok,
           f"gain {t.achieved_gain_db:.3f} dB at {t.pump_power_dbm:.3f} dBm incident "
           f"({t.core_pump_power_dbm:.2f} dBm at the node), {tuned.seconds:.0f} s")


def test_04_saturation(saturation, tuned):
    s = saturation.value
    ok = abs(s.input_p1db - (-94.2)) <= 4.0 and saturation.seconds + tuned.seconds < 1200
    report(4, "saturation target", ok,
           f"input P1dB {s.input_p1db:.2f} dBm (target -94.2 +/- 4), output {s.output_p1db:.2f} dBm, "
           f"{saturation.seconds:.0f} s")


def test_05_design_boundary(desk_map):
    cells = desk_map.value
    bad_low = [c for c in cells if c.inv_beta_q <= 0.5 and not c.ok]
    bad_high = [c for c in cells if c.inv_beta_q >= 0.8 and c.ok]
    max_ok = max(c.inv_beta_q for c in cells if c.ok)
    min_fail = min(c.inv_beta_q for c in cells if not c.ok)
    ok = (len(cells) == 36 and not bad_low and not bad_high and max_ok <= 0.65 <= min_fail
          and desk_map.seconds < 7200)
    report(5, "design-map boundary", ok,
           f"{sum(c.ok for c in cells)}/36 ok; largest ok 1/(beta Q) = {max_ok:.3f}, smallest failing "
           f"{min_fail:.3f}; violations <=0.5: {len(bad_low)}, >=0.8: {len(bad_high)}; "
           f"{desk_map.seconds / 60:.1f} min on {default_workers()} worker(s)")


def test_06_saturation_spread(desk_map):
    p1 = [c.input_p1db for c in desk_map.value if c.ok]
    spread = max(p1) - min(p1)
    report(6, "saturation-power spread", spread >= 10.0,
           f"input P1dB over ok cells {min(p1):.1f} .. {max(p1):.1f} dBm, spread {spread:.1f} dB (>= 10)")


def test_07_efficiency_budget(device, tuned, saturation):
    params, bias = device
    t, s = tuned.value, saturation.value
    t0 = time.perf_counter()
    eta_pae, pae_db = pump_added_efficiency(s, t.core_pump_power_dbm)
    net = capacitive_network(C_COUPLING, params.c_main, array_inductance(params, bias))
    eta_pce, pce_db = pce(net, 2 * bias.omega0)
    _, total_db = total_efficiency(eta_pce, eta_pae)
    dt = time.perf_counter() - t0
    ok = abs(pae_db + 20) <= 3 and abs(total_db + 37) <= 5 and dt < 300
    report(7, "efficiency budget", ok,
           f"eta_PAE {pae_db:.2f} dB (-20 +/- 3), eta_PCE(2 w0) {pce_db:.2f} dB, "
           f"eta_total {total_db:.2f} dB (-37 +/- 5)")


def test_08_scattering_properties(device, lossless, tuned, saturation, desk_map):
    params, bias = device
    t = tuned.value
    balances = [s.power_balance for s in lossless[1].value]
    balances += [t.max_power_balance, saturation.value.max_power_balance]
    balances += [c.max_power_balance for c in desk_map.value if c.max_power_balance is not None]
    worst = max(balances)
    gs, gi = photon_gains(t.point)
    unitarity = abs((gs - gi) - 1.0)
    g_plus = measure_gain(params, bias, t.pump_power_dbm, detuning=5e6).gain_db
    g_minus = measure_gain(params, bias, t.pump_power_dbm, detuning=-5e6).gain_db
    asym = abs(g_plus - g_minus)
    ok = worst <= 0.01 and unitarity <= 0.02 and asym <= 0.1
    report(8, "scattering/energy properties", ok,
           f"worst power balance {worst:.1e} over {len(balances)} run groups (tol 1e-2); "
           f"G_s - G_i = {gs - gi:.5f} (photon units, tol 2%); "
           f"G(+5 MHz) - G(-5 MHz) = {g_plus - g_minus:+.4f} dB (tol 0.1)")


def test_09_bias_contour(contour, tuned):
    c = contour.value
    low = [b for b in c.low_branch if b.input_p1db is not None]
    p1 = [b.input_p1db for b in low]
    pumps = [b.pump_power_dbm for b in c.low_branch]
    p1_range = max(p1) - min(p1)
    pump_range = max(pumps) - min(pumps)
    star = min(c.low_branch, key=lambda b: abs(b.phi_e - (math.pi / 2 + 0.25)))
    ordered = all(
        b.pump_power_dbm <= h.pump_power_dbm
        for b in c.low_branch for h in c.high_branch if h.phi_e == b.phi_e
    )
    ok = len(low) >= 3 and p1_range <= 6.0 and pump_range >= 3.0 and ordered and contour.seconds < 3600
    report(9, "bias-contour properties", ok,
           f"{len(c.low_branch)} low-branch points, P1dB range {p1_range:.2f} dB (<= 6), "
           f"pump range {pump_range:.2f} dB (>= 3), low <= high branch: {ordered}; "
           f"near max-c3 ({star.phi_e / (2 * math.pi):.2f} flux quanta) {star.pump_power_dbm:.2f} dBm vs "
           f"tune-up {tuned.value.pump_power_dbm:.2f} dBm; {contour.seconds / 60:.1f} min")


def test_10_analysis_pipeline():
    t0 = time.perf_counter()
    n = 256
    b = np.linspace(0, 1, n)
    bin_of = lambda cycles: cycles * 2 * n / (n - 1)
    one = flux_modulation_spectrum(FluxSweepRecord(b, 6e9 + 2e7 * np.cos(2 * np.pi * 8 * b)))
    err1 = abs(one.peaks[0].index - bin_of(8))
    two = flux_modulation_spectrum(FluxSweepRecord(
        b, 6e9 + 2e7 * np.cos(2 * np.pi * 4 * b) + 5e6 * np.cos(2 * np.pi * 12 * b)))
    idx = sorted(p.index for p in two.peaks[:2])
    err2 = max(abs(idx[0] - bin_of(4)), abs(idx[1] - bin_of(12)))
    ratio = two.peaks[0].magnitude / two.peaks[1].magnitude
    cal = StarkCalibration(0.348e6, 1e6, 5.7e9)
    n_bar = photons_from_stark(cal, 3.48e6)
    v = np.linspace(0.05, 0.5, 10)
    fit = drive_power_calibration(list(zip(v, 25.0 * v**2)), cal)
    dt = time.perf_counter() - t0
    ok = (err1 <= 1 and err2 <= 1 and abs(ratio / 4 - 1) <= 0.10 and n_bar == 10.0
          and abs(fit.exponent - 2) <= 0.05 and dt < 10)
    report(10, "analysis pipeline", ok,
           f"DCT bin errors {err1:.2f}, {err2:.2f} (<= 1), two-tone ratio {ratio:.3f} (4 +/- 10%), "
           f"n = {n_bar!r}, drive exponent {fit.exponent:.4f}, {dt:.2f} s")


def _run_twice(tmp_path, name, args):
    a, b = tmp_path / f"{name}_a", tmp_path / f"{name}_b"
    code_a = cli_main([*args, "--out", str(a), "--threads", "1"])
    code_b = cli_main([*args, "--out", str(b), "--threads", "2"])
    files = sorted(f for f in os.listdir(a) if f.endswith(".csv"))
    same = all((a / f).read_bytes() == (b / f).read_bytes() for f in files)
    return code_a == code_b and bool(files) and same, files


def test_11_determinism(tmp_path, lossless):
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    cfg = lambda n: os.path.join(here, "configs", n)
    b = np.linspace(0, 1, 128)
    sweep = tmp_path / "sweep.csv"
    sweep.write_text("bias,f0_hz\n" + "".join(
        f"{float(x)!r},{float(6e9 + 2e7 * np.cos(2 * np.pi * 5 * x))!r}\n" for x in b))
    checks = {}
    checks["dc"] = _run_twice(tmp_path, "dc", [
        "dc", "--set", "circuit.l_shunt=15", "--set", "circuit.f0_target=6", "--set", "circuit.q_target=8.1",
        "--set", "task.phi_e_grid=[0.5,1.0,1.5,2.0]"])
    checks["tune"] = _run_twice(tmp_path, "tune", ["tune", "--config", cfg("device_a_tune.json")])
    checks["pce"] = _run_twice(tmp_path, "pce", ["pce", "--config", cfg("device_a_pce.json")])
    checks["fluxfft"] = _run_twice(tmp_path, "fluxfft", ["fluxfft", "--set", f"task.input={sweep}"])
    checks["map"] = _run_twice(tmp_path, "map", [
        "map", "--set", "task.l_shunt_grid=[12.4, 30.0]", "--set", "task.q_grid=[4.0]"])
    freqs, first = lossless
    params, bias = build_family(**DEVICE_A)
    f = freqs[7]
    amp = amplitude_for_dbm(-140.0, 2 * math.pi * f, params.r_env)
    again = integrate_to_steady_state(params, bias, DriveSpec(f, (Tone(f, amp, 0.0, PROBE),)),
                                      SolverOptions(target_gain_db=0.0))
    checks["reflection"] = (np.array_equal(again.phi, first.value[7].phi), ["in-memory"])
    ok = all(v[0] for v in checks.values())
    detail = ", ".join(f"{k}: {'identical' if v[0] else 'DIFFERENT'} ({len(v[1])} file(s))"
                       for k, v in checks.items())
    report(11, "determinism (threads 1 vs 2)", ok, detail)
