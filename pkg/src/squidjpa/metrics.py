"""Amplifier figures of merit built on steady-state runs.

Gain is the reflected signal power over the incident probe power at the same
frequency. The model has no loss channel, so the pump-off reflection is unity
and this ratio is already normalized to the unpumped response.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .circuit import CircuitParams, FluxBias, taylor_coefficients
from .dynamics import (
    SolverOptions,
    SteadyStateSolution,
    amplitude_for_dbm,
    integrate_to_steady_state,
    make_two_tone,
    wave_power,
)
from .errors import (
    DivergedTrajectory,
    MaxGainBelowTarget,
    NoCompressionInRange,
    NoConvergence,
)
from .parallel import pmap
from .units import dbm_to_watts, watts_to_dbm

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

DEFAULT_PROBE_DBM = -140.0
DEFAULT_DETUNING_HZ = 1e6
DEFAULT_BASE_HZ = 1e6


def pump_frequency(bias: FluxBias, base_f: float = DEFAULT_BASE_HZ) -> float:
    """``2 f0`` rounded to the nearest even multiple of ``base_f``."""
    return 2.0 * base_f * round(bias.f0 / base_f)


@dataclass
class GainPoint:
    pump_power_dbm: float
    probe_power_dbm: float
    probe_frequency: float
    gain_db: float
    idler_gain_db: float
    core_pump_power_dbm: float
    solution: SteadyStateSolution = field(repr=False)


def measure_gain(
    params: CircuitParams,
    bias: FluxBias,
    pump_power_dbm: float,
    probe_power_dbm: float = DEFAULT_PROBE_DBM,
    detuning: float = DEFAULT_DETUNING_HZ,
    base_f: float = DEFAULT_BASE_HZ,
    opts: Optional[SolverOptions] = None,
    pump_f: Optional[float] = None,
) -> GainPoint:
    """One steady-state run; signal and idler gains referenced to the probe."""
    fp = pump_frequency(bias, base_f) if pump_f is None else pump_f
    fs = 0.5 * fp + detuning
    fi = fp - fs
    a_p = amplitude_for_dbm(pump_power_dbm, TWO_PI * fp, params.r_env)
    a_s = amplitude_for_dbm(probe_power_dbm, TWO_PI * fs, params.r_env)
    drive = make_two_tone(fp, detuning, base_f, a_p, a_s)
    sol = integrate_to_steady_state(params, bias, drive, opts)
    p_in = wave_power(a_s, TWO_PI * fs, params.r_env)
    g = sol.power(fs) / p_in
    gi = sol.power(fi) / p_in
    core = wave_power(abs(sol.amplitude(fp, "phi")), TWO_PI * fp, params.r_env)
    return GainPoint(
        pump_power_dbm=pump_power_dbm,
        probe_power_dbm=probe_power_dbm,
        probe_frequency=fs,
        gain_db=10 * math.log10(g),
        idler_gain_db=10 * math.log10(gi) if gi > 0 else -math.inf,
        core_pump_power_dbm=float(watts_to_dbm(core)),
        solution=sol,
    )


def photon_gains(point: GainPoint) -> Tuple[float, float]:
    """Signal and idler gains in photon-flux units (linear).

    For a lossless three-wave mixer ``G_s - G_i = 1`` exactly in these units.
    """
    sol = point.solution
    fs = point.probe_frequency
    fi = sol.drive.pump.frequency - fs
    n_in = sol.power(fs, "phi_in") / fs
    return sol.power(fs) / fs / n_in, sol.power(fi) / fi / n_in


def estimate_pump_dbm(params: CircuitParams, bias: FluxBias, base_f=DEFAULT_BASE_HZ) -> float:
    """Incident pump power at the small-signal parametric threshold.

    Linear estimate: node pump amplitude ``omega0^2 / (Q |c3|)`` mapped through
    the off-resonant linear response at the pump frequency.
    """
    c3 = abs(taylor_coefficients(params, bias).c3)
    if c3 == 0:
        return math.inf
    w0 = bias.omega0
    q = w0 / params.gamma
    node = w0**2 / (q * c3)
    wp = TWO_PI * pump_frequency(bias, base_f)
    g = params.gamma
    transfer = 2 * g * wp / abs(w0**2 - wp**2 - 1j * g * wp)
    return float(watts_to_dbm(wave_power(node / transfer, wp, params.r_env)))


class _BalanceTracker:
    """Wraps a ``pump or input power -> GainPoint`` callable and records the
    worst relative power balance over every converged run."""

    def __init__(self, fn):
        self.fn = fn
        self.worst = 0.0

    def __call__(self, *args, **kwargs):
        pt = self.fn(*args, **kwargs)
        self.worst = max(self.worst, pt.solution.power_balance)
        return pt


@dataclass
class TuneResult:
    pump_power_dbm: float
    achieved_gain_db: float
    pump_frequency: float
    core_pump_power_dbm: float
    samples: List[Tuple[float, float]]
    point: Optional[GainPoint] = field(default=None, repr=False)
    max_power_balance: float = 0.0


def tune_pump(
    params: CircuitParams,
    bias: FluxBias,
    target_gain_db: float = 20.0,
    probe_power_dbm: float = DEFAULT_PROBE_DBM,
    detuning: float = DEFAULT_DETUNING_HZ,
    base_f: float = DEFAULT_BASE_HZ,
    opts: Optional[SolverOptions] = None,
    tol_db: float = 0.05,
    step_db: float = 1.0,
    start_dbm: Optional[float] = None,
    span_db: float = 20.0,
    max_bisections: int = 40,
) -> TuneResult:
    """Lowest pump power giving ``target_gain_db`` for a weak probe.

    Steps the pump upward by ``step_db`` until the gain first reaches the
    target (stepping down instead if the first point already does), then
    bisects that bracket. A gain turnover or the end of the
    ``span_db`` window raises :class:`MaxGainBelowTarget`.
    """
    opts = opts or SolverOptions(target_gain_db=max(target_gain_db, 0.0))
    measure = partial(
        measure_gain,
        params,
        bias,
        probe_power_dbm=probe_power_dbm,
        detuning=detuning,
        base_f=base_f,
        opts=opts,
    )
    measure = _BalanceTracker(measure)
    fp = pump_frequency(bias, base_f)
    if target_gain_db <= 0:
        pt = measure(-math.inf)
        return TuneResult(-math.inf, pt.gain_db, fp, -math.inf, [(-math.inf, pt.gain_db)], pt,
                          measure.worst)

    est = estimate_pump_dbm(params, bias, base_f)
    if not math.isfinite(est):
        raise MaxGainBelowTarget(0.0, target_gain_db)
    p = est - 6.0 if start_dbm is None else start_dbm
    p_stop = p + span_db
    samples = []
    best = -math.inf
    best_p = None
    falling = 0
    lo = hi = None
    lo_pt = hi_pt = None
    while p <= p_stop + 1e-9:
        try:
            pt = measure(p)
        except DivergedTrajectory as exc:
            exc.pump_power_dbm = p
            if best_p is not None:
                raise MaxGainBelowTarget(best, target_gain_db, best_p) from exc
            raise
        except NoConvergence:
            log.info("no steady state at pump %.3f dBm; ending sweep", p)
            break
        samples.append((p, pt.gain_db))
        if pt.gain_db >= target_gain_db:
            hi, hi_pt = p, pt
            break
        lo, lo_pt = p, pt
        if pt.gain_db > best:
            best, best_p = pt.gain_db, p
            falling = 0
        else:
            falling += 1
            if falling >= 3 or pt.gain_db < best - 3.0:
                break
        p += step_db
    if hi is None:
        raise MaxGainBelowTarget(best, target_gain_db, best_p)
    p = hi - step_db
    while lo is None and p >= hi - span_db - 1e-9:
        try:
            pt = measure(p)
        except (DivergedTrajectory, NoConvergence):
            hi, hi_pt = p, None
            p -= step_db
            continue
        samples.append((p, pt.gain_db))
        if pt.gain_db < target_gain_db:
            lo, lo_pt = p, pt
        else:
            hi, hi_pt = p, pt
        p -= step_db
    if lo is None or hi_pt is None:
        raise ValueError(f"no pump power in the search window gives less than {target_gain_db} dB")

    pt = refine_crossing(measure, lo_pt, hi_pt, target_gain_db, tol_db, max_bisections, samples)
    samples.sort()
    return TuneResult(
        pump_power_dbm=pt.pump_power_dbm,
        achieved_gain_db=pt.gain_db,
        pump_frequency=fp,
        core_pump_power_dbm=pt.core_pump_power_dbm,
        samples=samples,
        point=pt,
        max_power_balance=measure.worst,
    )


def refine_crossing(measure, lo_pt, hi_pt, target_gain_db, tol_db=0.05, max_bisections=40,
                    samples=None):
    """Bisect pump power between a below-target and an at-or-above-target point.

    Stops once the gain is within ``tol_db / 2`` of the target and returns the
    closest :class:`GainPoint` seen.
    """
    lo, hi = lo_pt.pump_power_dbm, hi_pt.pump_power_dbm
    pt = hi_pt
    for _ in range(max_bisections):
        if abs(pt.gain_db - target_gain_db) <= 0.5 * tol_db:
            break
        mid = 0.5 * (lo + hi)
        try:
            pt_mid = measure(mid)
        except (DivergedTrajectory, NoConvergence):
            hi = mid
            continue
        if samples is not None:
            samples.append((mid, pt_mid.gain_db))
        pt = pt_mid
        if pt_mid.gain_db >= target_gain_db:
            hi, hi_pt = mid, pt_mid
        else:
            lo, lo_pt = mid, pt_mid
    if abs(pt.gain_db - target_gain_db) > tol_db:
        pt = min((hi_pt, lo_pt), key=lambda q: abs(q.gain_db - target_gain_db))
    return pt


@dataclass
class GainCurve:
    bias: FluxBias
    pump_frequency: float
    pump_power_dbm: float
    points: List[Tuple[float, float]]
    peak_gain_db: float
    bandwidth_3db: float
    gbw: float


def _crossing(x0, y0, x1, y1, level):
    if y1 == y0:
        return 0.5 * (x0 + x1)
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def bandwidth_3db(freqs: Sequence[float], gains_db: Sequence[float]) -> float:
    """Full width between the -3 dB crossings around the peak (NaN if open)."""
    f = np.asarray(freqs, dtype=float)
    g = np.asarray(gains_db, dtype=float)
    i = int(np.argmax(g))
    level = g[i] - 3.0
    left = right = None
    for j in range(i, 0, -1):
        if g[j - 1] <= level:
            left = _crossing(f[j - 1], g[j - 1], f[j], g[j], level)
            break
    for j in range(i, len(g) - 1):
        if g[j + 1] <= level:
            right = _crossing(f[j], g[j], f[j + 1], g[j + 1], level)
            break
    if left is None or right is None:
        return math.nan
    return right - left


def _gain_at(args):
    params, bias, pump_dbm, det, probe_dbm, base_f, opts = args
    return measure_gain(params, bias, pump_dbm, probe_dbm, det, base_f, opts).gain_db


def gain_curve(
    params: CircuitParams,
    bias: FluxBias,
    pump_power_dbm: float,
    detuning_grid: Sequence[float],
    probe_power_dbm: float = DEFAULT_PROBE_DBM,
    base_f: float = DEFAULT_BASE_HZ,
    opts: Optional[SolverOptions] = None,
    workers: int = 1,
) -> GainCurve:
    """Gain versus probe frequency at fixed pump."""
    opts = opts or SolverOptions()
    fp = pump_frequency(bias, base_f)
    dets = sorted(float(d) for d in detuning_grid)
    gains = pmap(
        _gain_at,
        [(params, bias, pump_power_dbm, d, probe_power_dbm, base_f, opts) for d in dets],
        workers,
    )
    freqs = [0.5 * fp + d for d in dets]
    points = list(zip(freqs, gains))
    peak = max(gains)
    bw = bandwidth_3db(freqs, gains)
    return GainCurve(
        bias=bias,
        pump_frequency=fp,
        pump_power_dbm=pump_power_dbm,
        points=points,
        peak_gain_db=peak,
        bandwidth_3db=bw,
        gbw=math.sqrt(10 ** (peak / 10)) * bw,
    )


@dataclass
class SaturationResult:
    input_p1db: float
    output_p1db: float
    small_signal_gain: float
    sweep: List[Tuple[float, float]]
    max_power_balance: float = 0.0


def compression_point(sweep: Sequence[Tuple[float, float]], small_signal_gain: float) -> float:
    """Interpolated input power of the first downward 1 dB compression crossing."""
    level = small_signal_gain - 1.0
    pts = sorted(sweep)
    for (p0, g0), (p1, g1) in zip(pts, pts[1:]):
        if g0 > level >= g1:
            return _crossing(p0, g0, p1, g1, level)
    if pts and pts[0][1] <= level:
        return pts[0][0]
    raise NoCompressionInRange(pts[-1][0] if pts else -math.inf)


def _sat_result(sweep, small_signal_gain, balance=0.0):
    p1 = compression_point(sweep, small_signal_gain)
    return SaturationResult(
        input_p1db=p1,
        output_p1db=p1 + small_signal_gain - 1.0,
        small_signal_gain=small_signal_gain,
        sweep=sorted(sweep),
        max_power_balance=balance,
    )


def saturation_sweep(
    params: CircuitParams,
    bias: FluxBias,
    pump_power_dbm: float,
    input_powers: Sequence[float],
    detuning: float = DEFAULT_DETUNING_HZ,
    base_f: float = DEFAULT_BASE_HZ,
    opts: Optional[SolverOptions] = None,
    small_signal_gain: Optional[float] = None,
) -> SaturationResult:
    """Gain at each input power; small-signal gain from the weakest point.

    The sweep stops at the first diverged or non-periodic run.
    """
    opts = opts or SolverOptions()
    measure = _BalanceTracker(measure_gain)
    sweep = []
    for p_in in sorted(input_powers):
        try:
            pt = measure(params, bias, pump_power_dbm, p_in, detuning, base_f, opts)
        except (DivergedTrajectory, NoConvergence):
            log.info("saturation sweep stopped at %.2f dBm", p_in)
            break
        sweep.append((float(p_in), pt.gain_db))
    if not sweep:
        raise NoCompressionInRange(-math.inf)
    ss = sweep[0][1] if small_signal_gain is None else small_signal_gain
    return _sat_result(sweep, ss, measure.worst)


def find_p1db(
    params: CircuitParams,
    bias: FluxBias,
    pump_power_dbm: float,
    small_signal_gain: float,
    detuning: float = DEFAULT_DETUNING_HZ,
    base_f: float = DEFAULT_BASE_HZ,
    opts: Optional[SolverOptions] = None,
    start_dbm: float = -130.0,
    stop_dbm: float = -50.0,
    coarse_db: float = 2.0,
    fine_db: float = 0.25,
    probe_power_dbm: float = DEFAULT_PROBE_DBM,
) -> SaturationResult:
    """Coarse upward input-power sweep, then a fine grid over the crossing.

    ``small_signal_gain`` is the tuned weak-probe gain (at ``probe_power_dbm``),
    which is included as the first sweep sample.
    """
    opts = opts or SolverOptions()
    measure = _BalanceTracker(partial(measure_gain, params, bias, pump_power_dbm,
                                      detuning=detuning, base_f=base_f, opts=opts))
    sweep = [(probe_power_dbm, small_signal_gain)]
    level = small_signal_gain - 1.0
    p = start_dbm
    crossed = False
    while p <= stop_dbm + 1e-9:
        try:
            g = measure(p).gain_db
        except (DivergedTrajectory, NoConvergence):
            break
        sweep.append((p, g))
        if g <= level:
            crossed = True
            break
        p += coarse_db
    if not crossed:
        raise NoCompressionInRange(sweep[-1][0])
    hi = sweep[-1][0]
    lo = hi - coarse_db
    n_fine = int(round(coarse_db / fine_db))
    for i in range(1, n_fine):
        pf = lo + i * fine_db
        try:
            sweep.append((pf, measure(pf).gain_db))
        except (DivergedTrajectory, NoConvergence):
            break
    return _sat_result(sweep, small_signal_gain, measure.worst)


def pump_added_efficiency(sat: SaturationResult, pump_power_dbm: float, subtract_input=True):
    """``(P_out,1dB - P_in,1dB) / P_pump`` as ``(linear, dB)``."""
    p_out = float(dbm_to_watts(sat.output_p1db))
    p_in = float(dbm_to_watts(sat.input_p1db)) if subtract_input else 0.0
    p_pump = float(dbm_to_watts(pump_power_dbm))
    if math.isinf(p_pump):
        return 0.0, -math.inf
    eta = (p_out - p_in) / p_pump
    return eta, 10 * math.log10(eta) if eta > 0 else -math.inf
