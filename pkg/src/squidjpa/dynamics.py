"""Time-domain integration of the driven array to periodic steady state.

The node phase obeys (DC part removed)::

    phi'' = -gamma phi' - omega0^2 phi
            - omega_J^2 [sin((phi + dphi)/N) - sin(dphi/N) - (phi/N) cos(dphi/N)]
            + 2 gamma phi_in'

with ``phi_in`` the incoming wave and ``phi_out = phi - phi_in`` the outgoing
wave. All drive tones sit on a common frequency grid, so after a warm-up the
trajectory is periodic in ``1/base_frequency`` and harmonic amplitudes are
exact discrete inner products over one such period.
"""

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from . import kernel
from .circuit import CircuitParams, FluxBias, quality_factor
from .errors import DivergedTrajectory, IncommensurateDrive, NoConvergence
from .units import REDUCED_FLUX_QUANTUM, dbm_to_watts, watts_to_dbm

PUMP = "pump"
PROBE = "probe"

_GRID_RTOL = 1e-9


def _multiple(freq: float, base: float) -> int:
    k = round(freq / base)
    if k < 0 or abs(freq - k * base) > _GRID_RTOL * max(abs(freq), base):
        raise IncommensurateDrive(
            f"{freq:.12g} Hz is not an integer multiple of {base:.12g} Hz"
        )
    return int(k)


@dataclass(frozen=True)
class Tone:
    frequency: float
    amplitude: float
    phase: float = 0.0
    role: str = PROBE


@dataclass(frozen=True)
class DriveSpec:
    """Commensurate set of incoming tones.

    Each tone contributes ``amplitude * cos(2 pi f t + phase)`` to the
    incoming-wave phase ``phi_in``.
    """

    base_frequency: float
    tones: Tuple[Tone, ...]

    def __post_init__(self):
        if not self.base_frequency > 0:
            raise ValueError("base_frequency must be > 0")
        object.__setattr__(self, "tones", tuple(self.tones))
        n_pump = 0
        for tone in self.tones:
            if tone.amplitude < 0 or not math.isfinite(tone.amplitude):
                raise ValueError(f"tone amplitude must be finite and >= 0: {tone}")
            if tone.role not in (PUMP, PROBE):
                raise ValueError(f"unknown tone role {tone.role!r}")
            if tone.frequency <= 0:
                raise ValueError("tone frequencies must be > 0")
            _multiple(tone.frequency, self.base_frequency)
            n_pump += tone.role == PUMP
        if n_pump > 1:
            raise ValueError("at most one pump tone is allowed")

    def multiple(self, freq: float) -> int:
        return _multiple(freq, self.base_frequency)

    @property
    def pump(self) -> Optional[Tone]:
        for tone in self.tones:
            if tone.role == PUMP:
                return tone
        return None

    @property
    def probe(self) -> Optional[Tone]:
        for tone in self.tones:
            if tone.role == PROBE:
                return tone
        return None

    def with_amplitudes(self, pump_amp=None, probe_amp=None) -> "DriveSpec":
        tones = []
        for tone in self.tones:
            if tone.role == PUMP and pump_amp is not None:
                tone = replace(tone, amplitude=pump_amp)
            elif tone.role == PROBE and probe_amp is not None:
                tone = replace(tone, amplitude=probe_amp)
            tones.append(tone)
        return DriveSpec(self.base_frequency, tuple(tones))


def make_two_tone(pump_f, probe_detuning, base_f, pump_amp, probe_amp) -> DriveSpec:
    """Pump at ``pump_f`` and probe at ``pump_f/2 + probe_detuning``.

    Raises :class:`IncommensurateDrive` unless pump, probe and idler all lie on
    the ``base_f`` grid.
    """
    _multiple(pump_f, base_f)
    probe_f = 0.5 * pump_f + probe_detuning
    _multiple(probe_f, base_f)
    _multiple(pump_f - probe_f, base_f)
    if probe_detuning == 0:
        raise ValueError("zero detuning makes signal and idler degenerate")
    return DriveSpec(
        base_f,
        (
            Tone(pump_f, pump_amp, 0.0, PUMP),
            Tone(probe_f, probe_amp, 0.0, PROBE),
        ),
    )


def wave_power(amplitude, omega, r_env):
    """Power (W) carried by a travelling wave of phase amplitude ``amplitude``.

    Voltage amplitude is ``omega * Phi0/2pi * |A|``; power is ``|V|^2/(2R)``.
    """
    if np.any(np.asarray(omega) <= 0):
        raise ValueError("omega must be > 0")
    v = REDUCED_FLUX_QUANTUM * np.asarray(omega) * np.abs(amplitude)
    p = v**2 / (2.0 * r_env)
    return float(p) if np.ndim(p) == 0 else p


def wave_power_dbm(amplitude, omega, r_env):
    return float(watts_to_dbm(wave_power(amplitude, omega, r_env)))


def amplitude_for_power(power_w, omega, r_env):
    """Inverse of :func:`wave_power`."""
    if omega <= 0:
        raise ValueError("omega must be > 0")
    return math.sqrt(2.0 * r_env * power_w) / (REDUCED_FLUX_QUANTUM * omega)


def amplitude_for_dbm(power_dbm, omega, r_env):
    if power_dbm == -math.inf:
        return 0.0
    return amplitude_for_power(float(dbm_to_watts(power_dbm)), omega, r_env)


def nonlinear_bracket(phi, bias: FluxBias):
    """``sin((phi+dphi)/N) - sin(dphi/N) - (phi/N) cos(dphi/N)``, O(phi^2)."""
    y0 = bias.junction_phase
    u = np.asarray(phi, dtype=float) / bias.n_squids
    return (np.sin(u) - u) * math.cos(y0) + (np.cos(u) - 1.0) * math.sin(y0)


def eom_rhs(params: CircuitParams, bias: FluxBias, state, drive_velocity, nonlinear=True):
    """Right-hand side ``(phi', phi'')`` of the DC-separated equation of motion."""
    phi, dphi = state
    bracket = nonlinear_bracket(phi, bias) if nonlinear else 0.0
    ddphi = (
        -params.gamma * dphi
        - bias.omega0**2 * phi
        - params.omega_j_sq * bracket
        + 2.0 * params.gamma * drive_velocity
    )
    return dphi, ddphi


@dataclass(frozen=True)
class SolverOptions:
    """Integrator and steady-state detection settings.

    ``warmup_pump_periods=None`` selects ``ceil(20 Q sqrt(G_target))``.
    """

    steps_per_pump_period: int = 512
    tol: float = 1e-5
    min_periods: int = 2
    max_periods: int = 8
    warmup_pump_periods: Optional[int] = None
    target_gain_db: float = 20.0
    nonlinear: bool = True
    initial_state: Tuple[float, float] = (0.0, 0.0)
    trajectory_path: Optional[str] = None
    trajectory_decimation: int = 64

    def __post_init__(self):
        if self.steps_per_pump_period < 8:
            raise ValueError("steps_per_pump_period must be >= 8")
        if self.min_periods < 2 or self.max_periods < self.min_periods:
            raise ValueError("need 2 <= min_periods <= max_periods")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


@dataclass
class SteadyStateSolution:
    """Harmonic content of the converged periodic trajectory.

    ``phi``, ``phi_in`` and ``phi_out`` are complex amplitudes ``X`` such that
    the signal is ``Re(X exp(i 2 pi f t))`` (DC entries are plain means).
    """

    frequencies: np.ndarray
    multiples: np.ndarray
    phi: np.ndarray
    phi_in: np.ndarray
    phi_out: np.ndarray
    converged: bool
    periods_integrated: int
    residual: float
    power_in_w: float
    power_out_w: float
    drive: DriveSpec
    r_env: float
    steps_per_period: int = 0
    backend: str = field(default=kernel.BACKEND)

    def _index(self, freq):
        k = self.drive.multiple(freq)
        hits = np.nonzero(self.multiples == k)[0]
        if hits.size == 0:
            raise KeyError(f"{freq} Hz is not a tracked harmonic")
        return int(hits[0])

    def amplitude(self, freq, wave="phi_out") -> complex:
        return complex(getattr(self, wave)[self._index(freq)])

    def power(self, freq, wave="phi_out") -> float:
        """Wave power (W) at ``freq``; zero for DC."""
        if freq == 0:
            return 0.0
        return wave_power(self.amplitude(freq, wave), 2 * math.pi * freq, self.r_env)

    @property
    def power_balance(self) -> float:
        """Relative mismatch ``|P_out - P_in| / P_in`` over all frequencies."""
        if self.power_in_w == 0:
            return 0.0 if self.power_out_w == 0 else math.inf
        return abs(self.power_out_w - self.power_in_w) / self.power_in_w

    def table(self):
        """Rows ``(frequency_hz, wave, re, im)`` in tracked order."""
        rows = []
        for i, f in enumerate(self.frequencies):
            for wave in ("phi", "phi_in", "phi_out"):
                z = getattr(self, wave)[i]
                rows.append((float(f), wave, float(z.real), float(z.imag)))
        return rows


def default_tracking(drive: DriveSpec) -> list:
    """Tracked harmonic multiples: tones, idler, second pump harmonic, DC."""
    ks = []
    pump, probe = drive.pump, drive.probe
    if probe is not None:
        ks.append(drive.multiple(probe.frequency))
    if pump is not None:
        kp = drive.multiple(pump.frequency)
        if probe is not None:
            ks.append(abs(kp - ks[0]))
        ks += [kp, 2 * kp]
    elif probe is not None:
        ks.append(2 * ks[0])
    for tone in drive.tones:
        ks.append(drive.multiple(tone.frequency))
    ks.append(0)
    out = []
    for k in ks:
        if k not in out:
            out.append(k)
    return out


def reference_frequency(drive: DriveSpec) -> float:
    """Frequency whose period sets the step size: pump, else twice the top tone."""
    if drive.pump is not None:
        return drive.pump.frequency
    return 2.0 * max(t.frequency for t in drive.tones)


def _prepare(params, bias, drive, opts, track):
    base = drive.base_frequency
    k_ref = drive.multiple(reference_frequency(drive))
    steps_per_period = opts.steps_per_pump_period * k_ref
    two_m = 2 * steps_per_period
    h = 1.0 / (base * steps_per_period)
    tone_k = np.array([drive.multiple(t.frequency) for t in drive.tones], dtype=np.int64)
    b = np.array(
        [t.amplitude * 2 * math.pi * t.frequency * np.exp(1j * t.phase) for t in drive.tones],
        dtype=complex,
    )
    y0 = bias.junction_phase
    coef = np.array(
        [
            params.gamma,
            bias.omega0**2,
            params.omega_j_sq,
            1.0 / params.n_squids,
            math.sin(y0),
            math.cos(y0),
            1.0 if opts.nonlinear else 0.0,
        ]
    )
    harm_k = np.array(track, dtype=np.int64)
    return dict(
        two_m=two_m,
        h=h,
        steps_per_period=steps_per_period,
        coef=coef,
        tone_k=tone_k,
        b_re=np.ascontiguousarray(b.real),
        b_im=np.ascontiguousarray(b.imag),
        harm_k=harm_k,
    )


def _warmup_steps(params, bias, opts):
    if opts.warmup_pump_periods is not None:
        n = opts.warmup_pump_periods
    else:
        q = quality_factor(params, bias)
        g = 10 ** (opts.target_gain_db / 20.0)
        n = math.ceil(20.0 * q * g)
    return int(n) * opts.steps_per_pump_period


class _Trajectory:
    def __init__(self, path, decimation, h):
        self.path = path
        self.decimation = max(1, int(decimation))
        self.h = h
        self.rows = []

    def record(self, n, state):
        self.rows.append((n * self.h, state[0], state[1]))

    def write(self):
        with open(self.path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "phi_rad", "dphi_rad_per_s"])
            for t, p, v in self.rows:
                w.writerow([repr(t), repr(p), repr(v)])


def _advance(run, state, n0, nsteps, prep, acc, traj):
    args = (
        prep["two_m"],
        prep["h"],
        prep["coef"],
        prep["tone_k"],
        prep["b_re"],
        prep["b_im"],
        prep["harm_k"],
    )
    resync = prep["resync"]
    if traj is None:
        return run(state, n0, nsteps, *args, acc, resync)
    n, end = n0, n0 + nsteps
    while n < end:
        chunk = min(traj.decimation, end - n)
        status = run(state, n, chunk, *args, acc, resync)
        n += chunk
        traj.record(n, state)
        if status:
            return status
    return 0


def integrate_to_steady_state(
    params: CircuitParams,
    bias: FluxBias,
    drive: DriveSpec,
    opts: Optional[SolverOptions] = None,
    track: Optional[Sequence[int]] = None,
    backend=None,
) -> SteadyStateSolution:
    """Integrate from ``opts.initial_state`` until harmonics stop changing.

    Raises :class:`NoConvergence` (solution attached) if ``max_periods`` is
    reached and :class:`DivergedTrajectory` on overflow.
    """
    opts = opts or SolverOptions()
    run = backend or kernel.run_span
    track = list(track) if track is not None else default_tracking(drive)
    prep = _prepare(params, bias, drive, opts, track)
    prep["resync"] = opts.steps_per_pump_period
    m = prep["steps_per_period"]
    nh = len(track)

    state = np.array(opts.initial_state, dtype=float)
    traj = None
    if opts.trajectory_path:
        traj = _Trajectory(opts.trajectory_path, opts.trajectory_decimation, prep["h"])
        traj.record(0, state)

    n = 0
    scratch = np.zeros(2 * nh + 2)
    n_warm = _warmup_steps(params, bias, opts)
    if n_warm:
        if _advance(run, state, 0, n_warm, prep, scratch, traj):
            raise DivergedTrajectory("trajectory diverged during warm-up")
        n = n_warm

    k = np.asarray(track)
    norm = np.where(k == 0, 1.0 / m, 2.0 / m)
    prev = None
    residual = math.inf
    periods = 0
    converged = False
    while periods < opts.max_periods:
        acc = np.zeros(2 * nh + 2)
        if _advance(run, state, n, m, prep, acc, traj):
            raise DivergedTrajectory(f"trajectory diverged in period {periods + 1}")
        n += m
        periods += 1
        harm = norm * (acc[0 : 2 * nh : 2] + 1j * acc[1 : 2 * nh : 2])
        if not np.all(np.isfinite(harm)):
            raise DivergedTrajectory("non-finite harmonic amplitudes")
        if prev is not None:
            residual = _relative_change(harm, prev)
            if periods >= opts.min_periods and residual < opts.tol:
                converged = True
                break
        prev = harm

    if traj is not None:
        traj.write()

    phi_in = np.zeros(nh, dtype=complex)
    for tone in drive.tones:
        kt = drive.multiple(tone.frequency)
        for i, kk in enumerate(track):
            if kk == kt:
                phi_in[i] += tone.amplitude * np.exp(1j * tone.phase)
    scale = REDUCED_FLUX_QUANTUM**2 / params.r_env / m
    sol = SteadyStateSolution(
        frequencies=k.astype(float) * drive.base_frequency,
        multiples=k.copy(),
        phi=harm,
        phi_in=phi_in,
        phi_out=harm - phi_in,
        converged=converged,
        periods_integrated=periods,
        residual=float(residual),
        power_in_w=float(scale * acc[2 * nh]),
        power_out_w=float(scale * acc[2 * nh + 1]),
        drive=drive,
        r_env=params.r_env,
        steps_per_period=m,
        backend="python" if run is kernel.python_run_span else kernel.BACKEND,
    )
    if not converged:
        raise NoConvergence(
            f"no periodic steady state after {periods} periods (residual {residual:.3g})",
            solution=sol,
        )
    return sol


def _relative_change(cur, prev, floor_rel=1e-9):
    mags = np.abs(cur)
    floor = floor_rel * mags.max() if mags.size else 0.0
    mask = mags > floor
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(cur[mask] - prev[mask]) / mags[mask]))
