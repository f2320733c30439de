"""Measurement data reduction: reflection fits, flux-modulation spectra and
qubit-based power calibration."""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft, optimize

from .errors import BadFit, FitDiverged, NonUniformGrid
from .units import HBAR, watts_to_dbm

# ---------------------------------------------------------------- reflection


def reflection_model(freqs, f0, kappa, delay=0.0, scale=1.0 + 0j):
    """Lossless one-port ``(w - w0 - i k/2)/(w - w0 + i k/2)`` with nuisances.

    ``kappa`` is the full linewidth in Hz; ``delay`` an electrical delay in s.
    """
    f = np.asarray(freqs, dtype=float)
    df = f - f0
    return scale * np.exp(-2j * np.pi * f * delay) * (df - 0.5j * kappa) / (df + 0.5j * kappa)


def _resonant_phase(f, f0, kappa):
    return -2.0 * np.arctan2(0.5 * kappa, f - f0)


@dataclass
class ReflectionFit:
    f0: float
    q_total: float
    kappa: float
    delay: float
    scale: complex
    residual_rms: float


def fit_reflection(freqs: Sequence[float], s11: Sequence[complex]) -> ReflectionFit:
    """Least-squares fit of a single externally coupled resonance.

    A coarse grid over ``(f0, kappa)`` with the delay and phase offset solved
    linearly seeds a full complex least-squares refinement.
    """
    f = np.asarray(freqs, dtype=float)
    s = np.asarray(s11, dtype=complex)
    if f.size < 8 or f.size != s.size:
        raise FitDiverged("need at least 8 matching frequency/S11 samples")
    order = np.argsort(f)
    f, s = f[order], s[order]
    # remove the overall phase so the problem is identical for any rotation
    rot = np.exp(-1j * np.angle(np.sum(s)))
    s = s * rot
    span = f[-1] - f[0]
    fc = 0.5 * (f[0] + f[-1])
    x = f - fc
    phase = np.unwrap(np.angle(s))
    design = np.column_stack([np.ones_like(x), x])

    # phase minus the resonant part is linear in x (offset + delay); solve that
    # linear problem for every (f0, kappa) candidate and keep the best
    pinv = np.linalg.pinv(design)
    kappas = span * np.logspace(-2.5, 1.0, 40)
    f0s = np.linspace(f[0], f[-1], 101)
    best_cost = math.inf
    for kap in kappas:
        target = phase[None, :] - _resonant_phase(f[None, :], f0s[:, None], kap)
        coef = target @ pinv.T
        r = target - coef @ design.T
        cost = np.einsum("ij,ij->i", r, r)
        i = int(np.argmin(cost))
        if cost[i] < best_cost:
            best_cost = float(cost[i])
            f0_g, kap_g, (off, slope) = f0s[i], kap, coef[i]
    mag = float(np.mean(np.abs(s)))

    # O(1) parameters: f0 offset and log-linewidth in units of the span,
    # delay times span, and the complex scale referenced to the centre
    def unpack(p):
        u, lk, w, a_re, a_im = p
        tau = w / span
        return fc + u * span, span * math.exp(lk), tau, complex(a_re, a_im) * np.exp(2j * np.pi * fc * tau)

    def resid(p):
        f0, kappa, tau, scale = unpack(p)
        d = reflection_model(f, f0, kappa, tau, scale) - s
        return np.concatenate([d.real, d.imag])

    tau0 = -slope / (2 * np.pi)
    a0 = mag * np.exp(1j * off)
    p0 = [(f0_g - fc) / span, math.log(kap_g / span), tau0 * span, a0.real, a0.imag]
    try:
        sol = optimize.least_squares(resid, p0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                     max_nfev=4000)
    except (ValueError, FloatingPointError) as exc:
        raise FitDiverged(f"least squares failed: {exc}") from exc
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    f0, kappa, tau, scale = unpack(sol.x)
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitDiverged("least squares did not converge", residual=rms)
    if not f[0] <= f0 <= f[-1]:
        raise FitDiverged(f"fitted f0 {f0:.6g} Hz outside the trace", residual=rms)
    if span < kappa:
        raise FitDiverged(
            f"trace spans {span / kappa:.2f} linewidths; resonance not resolved", residual=rms
        )
    return ReflectionFit(
        f0=float(f0),
        q_total=float(f0 / kappa),
        kappa=kappa,
        delay=float(tau),
        scale=complex(scale / rot),
        residual_rms=rms,
    )


# ------------------------------------------------------ flux modulation (DCT)


@dataclass
class FluxSweepRecord:
    bias_values: np.ndarray
    f0_values: np.ndarray
    q_values: Optional[np.ndarray] = None

    def __post_init__(self):
        self.bias_values = np.asarray(self.bias_values, dtype=float)
        self.f0_values = np.asarray(self.f0_values, dtype=float)
        if self.q_values is not None:
            self.q_values = np.asarray(self.q_values, dtype=float)
            if self.q_values.shape != self.f0_values.shape:
                raise ValueError("q_values length differs from f0_values")
        if self.bias_values.shape != self.f0_values.shape or self.bias_values.ndim != 1:
            raise ValueError("bias_values and f0_values must be 1-D of equal length")
        d = np.diff(self.bias_values)
        if self.bias_values.size < 2 or not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("bias_values must be strictly monotone")


@dataclass
class SpectrumPeak:
    index: int
    frequency: float
    period: float
    magnitude: float


@dataclass
class FluxSpectrum:
    frequencies: np.ndarray
    magnitudes: np.ndarray
    retained: np.ndarray
    peaks: List[SpectrumPeak]
    bias: np.ndarray
    reconstruction: np.ndarray
    relative_rms_error: float
    threshold_db: float = 20.0


def _uniform(record: FluxSweepRecord, resample_tol: float):
    b = record.bias_values
    y = record.f0_values
    if b[0] > b[-1]:
        b, y = b[::-1], y[::-1]
    d = np.diff(b)
    step = (b[-1] - b[0]) / (b.size - 1)
    dev = float(np.max(np.abs(d - step)) / step)
    if dev <= 1e-9:
        return b, y
    if dev > resample_tol:
        raise NonUniformGrid(f"bias spacing deviates {dev:.2%} from uniform (limit {resample_tol:.2%})")
    grid = np.linspace(b[0], b[-1], b.size)
    return grid, np.interp(grid, b, y)


def blackman3() -> np.ndarray:
    w = np.blackman(3)
    return w / w.sum()


def flux_modulation_spectrum(
    record: FluxSweepRecord,
    threshold_db: float = 20.0,
    resample_tol: float = 0.05,
    noise_floor: float = 1e-9,
    peak_halfwidth: int = 2,
) -> FluxSpectrum:
    """Orthonormal DCT-II of the resonant frequency versus bias.

    Coefficients more than ``threshold_db`` below the strongest non-DC
    coefficient are zeroed, the result is smoothed with a 3-sample Blackman
    window, and the inverse transform is compared with the input.
    Modulation frequency of bin ``k`` is ``k / (2 N step)`` cycles per bias unit.

    Peaks are local maxima of the smoothed spectrum; a peak's magnitude is the
    root-sum-square of the raw coefficients within ``peak_halfwidth`` bins,
    which absorbs leakage from modulations that fall between bins.
    """
    b, y = _uniform(record, resample_tol)
    n = y.size
    step = (b[-1] - b[0]) / (n - 1)
    coef = fft.dct(y, type=2, norm="ortho")
    mag = np.abs(coef)
    freqs = np.arange(n) / (2.0 * n * step)

    ac = mag[1:]
    floor = noise_floor * max(mag[0], ac.max() if ac.size else 0.0)
    peak_ac = ac.max() if ac.size else 0.0
    keep = np.zeros(n, dtype=bool)
    keep[0] = True
    if peak_ac > floor:
        keep[1:] = ac >= peak_ac * 10 ** (-threshold_db / 20.0)
    retained = np.where(keep, coef, 0.0)
    smoothed = np.convolve(retained, blackman3(), mode="same")
    smoothed[0] = retained[0]

    peaks = []
    sm = np.abs(smoothed)
    level = peak_ac * 10 ** (-threshold_db / 20.0)
    if peak_ac > floor:
        for k in range(1, n):
            left = sm[k - 1] if k > 1 else -math.inf
            right = sm[k + 1] if k + 1 < n else -math.inf
            if sm[k] >= level and sm[k] > left and sm[k] >= right:
                peaks.append(
                    SpectrumPeak(
                        index=k,
                        frequency=float(freqs[k]),
                        period=float(1.0 / freqs[k]),
                        magnitude=float(np.sqrt(np.sum(coef[max(1, k - peak_halfwidth) : k + peak_halfwidth + 1] ** 2))),
                    )
                )
    peaks.sort(key=lambda p: -p.magnitude)

    recon = fft.idct(smoothed, type=2, norm="ortho")
    ref = y - y.mean()
    denom = float(np.sqrt(np.mean(ref**2))) or float(np.sqrt(np.mean(y**2))) or 1.0
    err = float(np.sqrt(np.mean((recon - y) ** 2)) / denom)
    return FluxSpectrum(
        frequencies=freqs,
        magnitudes=mag,
        retained=smoothed,
        peaks=peaks,
        bias=b,
        reconstruction=recon,
        relative_rms_error=err,
        threshold_db=threshold_db,
    )


# ------------------------------------------------------- power calibration


@dataclass(frozen=True)
class StarkCalibration:
    """Dispersive shift per photon and readout linewidth, both in Hz."""

    two_chi: float
    kappa: float
    readout_frequency: float

    def __post_init__(self):
        for name in ("two_chi", "kappa", "readout_frequency"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def chi_over_kappa(self) -> float:
        return self.two_chi / self.kappa


def photons_from_stark(cal: StarkCalibration, qubit_shift: float) -> float:
    return abs(qubit_shift) / cal.two_chi


def resonator_input_power(cal: StarkCalibration, n_photons: float) -> float:
    """On-resonance input power (W) that holds ``n_photons`` in the readout mode.

    ``P = n hbar omega_r kappa / 4`` with ``kappa`` in rad/s.
    """
    omega_r = 2 * math.pi * cal.readout_frequency
    kappa = 2 * math.pi * cal.kappa
    return n_photons * HBAR * omega_r * kappa / 4.0


@dataclass
class DriveCalibration:
    exponent: float
    prefactor: float
    photons_per_v2: float
    watts_per_v2: float
    cal: StarkCalibration = field(repr=False)

    def photons(self, v):
        return self.photons_per_v2 * np.asarray(v, dtype=float) ** 2

    def power_dbm(self, v):
        return watts_to_dbm(self.watts_per_v2 * np.asarray(v, dtype=float) ** 2)


def drive_power_calibration(points: Sequence[Tuple[float, float]], cal: StarkCalibration) -> DriveCalibration:
    """Fit ``n = a V^p`` in log-log space; ``p`` must be near 2.

    The quadratic scale used for the dBm mapping is the geometric mean of
    ``n / V^2`` over the points.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 5:
        raise ValueError("need at least 5 (voltage, photons) points")
    v, n = np.abs(pts[:, 0]), pts[:, 1]
    if np.any(n <= 0) or np.any(v <= 0):
        raise ValueError("voltages and photon numbers must be > 0")
    p, log_a = np.polyfit(np.log(v), np.log(n), 1)
    if not 1.8 <= p <= 2.2:
        raise BadFit(float(p))
    per_v2 = float(np.exp(np.mean(np.log(n) - 2 * np.log(v))))
    return DriveCalibration(
        exponent=float(p),
        prefactor=float(np.exp(log_a)),
        photons_per_v2=per_v2,
        watts_per_v2=resonator_input_power(cal, per_v2),
        cal=cal,
    )
