"""Static physics of an rf-SQUID array resonator.

The array has ``n_squids`` identical loops, each a geometric shunt inductance
``l_shunt`` in parallel with a junction of inductance ``l_junction``. The
array is resonated by ``c_main`` and damped by a frequency independent
environment resistance ``r_env``.

Phases follow the node-flux convention: ``phi`` is the total phase across the
array in radians, so each loop sees ``phi / n_squids``. The external bias is
given per loop (``phi_e``) and converted to the array total internally.
"""

import math
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import BetaHysteretic, NegativeStiffness

__all__ = [
    "CircuitParams",
    "FluxBias",
    "TaylorCoefficients",
    "solve_dc_phase",
    "resonant_frequency",
    "array_inductance",
    "quality_factor",
    "taylor_coefficients",
    "max_c3_bias",
    "max_c3_bias_numeric",
    "tunability_curve",
    "effective_environment",
    "parallel_to_series",
]


@dataclass(frozen=True)
class CircuitParams:
    """Lumped parameters of the amplifier, SI units throughout.

    Derived rates are properties so they can never go stale.
    """

    n_squids: int
    l_shunt: float
    l_junction: float
    c_main: float
    r_env: float
    c_coupling: Optional[float] = None

    def __post_init__(self):
        if int(self.n_squids) != self.n_squids or self.n_squids < 1:
            raise ValueError(f"n_squids must be a positive integer, got {self.n_squids}")
        for name in ("l_shunt", "l_junction", "c_main", "r_env"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")
        if self.c_coupling is not None and not (
            math.isfinite(self.c_coupling) and self.c_coupling > 0
        ):
            raise ValueError(f"c_coupling must be > 0 when given, got {self.c_coupling}")
        if self.beta >= 1.0:
            raise BetaHysteretic(self.beta)

    @property
    def beta(self) -> float:
        return self.l_shunt / self.l_junction

    @property
    def gamma(self) -> float:
        """External decay rate 1/(C r_env) in rad/s."""
        return 1.0 / (self.c_main * self.r_env)

    @property
    def omega_l_sq(self) -> float:
        return 1.0 / (self.c_main * self.l_shunt * self.n_squids)

    @property
    def omega_j_sq(self) -> float:
        return 1.0 / (self.c_main * self.l_junction)


@dataclass(frozen=True)
class FluxBias:
    """Solved DC operating point.

    Attributes
    ----------
    phi_e : float
        External phase per loop, ``2 pi Phi_ext / Phi_0``.
    phi_ext_total : float
        ``n_squids * phi_e``.
    phi_dc : float
        Total DC phase across the array.
    delta_phi : float
        ``phi_dc + phi_ext_total``; each junction sits at ``delta_phi / N``.
    omega0 : float
        Small-signal resonant angular frequency at this bias.
    """

    phi_e: float
    phi_ext_total: float
    phi_dc: float
    delta_phi: float
    omega0: float
    n_squids: int

    @property
    def junction_phase(self) -> float:
        """Per-loop junction phase ``delta_phi / N``."""
        return self.delta_phi / self.n_squids

    @property
    def f0(self) -> float:
        return self.omega0 / (2.0 * math.pi)


@dataclass(frozen=True)
class TaylorCoefficients:
    """Expansion of ``omega_J^2 sin((phi + delta_phi)/N)`` about ``phi = 0``.

    ``c2`` multiplies ``phi``, ``c3`` multiplies ``phi**2`` and ``c4``
    multiplies ``phi**3``.
    """

    c2: float
    c3: float
    c4: float


def _junction_phase(phi_e: float, beta: float) -> float:
    # unique root of y + beta*sin(y) = phi_e for beta < 1; solved for |phi_e|
    # and mirrored so the result is exactly odd
    target = abs(phi_e)
    lo, hi = target - beta, target + beta
    y = target
    for _ in range(200):
        g = y + beta * math.sin(y) - target
        if g > 0:
            hi = y
        else:
            lo = y
        step = g / (1.0 + beta * math.cos(y))
        y_new = y - step
        if not lo <= y_new <= hi:
            y_new = 0.5 * (lo + hi)
        if y_new == y or hi - lo < 1e-300:
            break
        y = y_new
        if abs(step) < 1e-17 * max(1.0, abs(y)):
            break
    return math.copysign(y, phi_e) if phi_e != 0 else 0.0


def solve_dc_phase(params: CircuitParams, phi_e: float) -> FluxBias:
    """Solve the DC current relation for a per-loop external phase ``phi_e``.

    Each loop satisfies ``y = phi_e - beta sin(y)`` with ``y = delta_phi/N``;
    the total DC phase is ``N (y - phi_e)``. For ``beta < 1`` the root is
    unique and continuous through the origin.
    """
    beta = params.beta
    if beta >= 1.0:
        raise BetaHysteretic(beta)
    if not math.isfinite(phi_e):
        raise ValueError(f"phi_e must be finite, got {phi_e}")
    n = params.n_squids
    y = _junction_phase(phi_e, beta)
    phi_dc = n * (y - phi_e)
    stiffness = 1.0 / params.l_shunt + math.cos(y) / params.l_junction
    if stiffness <= 0:
        raise NegativeStiffness(f"1/L_s + cos(y)/L_J = {stiffness:.6g} <= 0")
    omega0 = math.sqrt(stiffness / (n * params.c_main))
    return FluxBias(
        phi_e=phi_e,
        phi_ext_total=n * phi_e,
        phi_dc=phi_dc,
        delta_phi=n * y,
        omega0=omega0,
        n_squids=n,
    )


def dc_residual(params: CircuitParams, bias: FluxBias) -> float:
    """Residual of the DC current relation in per-loop phase units."""
    y = bias.junction_phase
    return bias.phi_dc / params.n_squids + params.beta * math.sin(y)


def array_inductance(params: CircuitParams, bias: FluxBias) -> float:
    """Linearized inductance of the whole array at ``bias`` (henries)."""
    stiffness = 1.0 / params.l_shunt + math.cos(bias.junction_phase) / params.l_junction
    if stiffness <= 0:
        raise NegativeStiffness(f"1/L_s + cos(y)/L_J = {stiffness:.6g} <= 0")
    return params.n_squids / stiffness


def resonant_frequency(params: CircuitParams, bias: FluxBias) -> float:
    """Angular resonant frequency ``1/sqrt(L_arr C)`` at ``bias``."""
    return 1.0 / math.sqrt(array_inductance(params, bias) * params.c_main)


def quality_factor(params: CircuitParams, bias: FluxBias) -> float:
    """``Q = r_env sqrt(C / L_arr)`` evaluated at the bias point."""
    return params.r_env * math.sqrt(params.c_main / array_inductance(params, bias))


def taylor_coefficients(params: CircuitParams, bias: FluxBias) -> TaylorCoefficients:
    n = params.n_squids
    wj2 = params.omega_j_sq
    y = bias.junction_phase
    return TaylorCoefficients(
        c2=wj2 / n * math.cos(y),
        c3=-wj2 / (2.0 * n**2) * math.sin(y),
        c4=-wj2 / (6.0 * n**3) * math.cos(y),
    )


def max_c3_bias(params: CircuitParams) -> FluxBias:
    """Bias maximizing the quadratic (three-wave) nonlinearity.

    ``|c3|`` is proportional to ``sin(y)`` and ``y`` increases monotonically
    with ``phi_e``, so the optimum on ``[0, pi]`` is ``y = pi/2``, reached at
    ``phi_e = pi/2 + beta``.
    """
    if params.beta >= 1.0:
        raise BetaHysteretic(params.beta)
    return solve_dc_phase(params, 0.5 * math.pi + params.beta)


def max_c3_bias_numeric(params: CircuitParams, xtol: float = 1e-14) -> float:
    """Locate the ``|c3|`` maximum by root-finding its flux derivative.

    Independent of the closed form in :func:`max_c3_bias`; returns ``phi_e``.
    """
    from scipy.optimize import brentq

    def slope(phi_e):
        # d sin(y)/d phi_e = cos(y) y'(phi_e), y' > 0
        return math.cos(solve_dc_phase(params, phi_e).junction_phase)

    return brentq(slope, 0.0, math.pi, xtol=xtol, rtol=4 * sys.float_info.epsilon)


def tunability_curve(params: CircuitParams, phi_e_grid: Sequence[float]):
    """Return ``[(phi_e, f0_hz, l_arr_h), ...]`` over the bias grid."""
    rows = []
    for phi_e in phi_e_grid:
        bias = solve_dc_phase(params, float(phi_e))
        l_arr = array_inductance(params, bias)
        rows.append((float(phi_e), bias.omega0 / (2.0 * math.pi), l_arr))
    return rows


def effective_environment(z0: float, c_coupling: float, omega: float):
    """Series (z0, C_c) seen as a parallel (R, C) pair at ``omega``.

    Returns ``(r_parallel, c_parallel)``. ``c_coupling = inf`` gives ``(z0, inf)``.
    """
    if omega <= 0:
        raise ValueError("omega must be > 0")
    if c_coupling <= 0:
        raise ValueError("c_coupling must be > 0")
    if math.isinf(c_coupling):
        return z0, math.inf
    x_c = 1.0 / (omega * c_coupling)
    r_par = z0 * (1.0 + (x_c / z0) ** 2)
    c_par = c_coupling / (1.0 + (z0 / x_c) ** 2)
    return r_par, c_par


def parallel_to_series(r_parallel: float, c_parallel: float, omega: float):
    """Inverse of :func:`effective_environment`; returns ``(r_series, c_series)``."""
    b = omega * c_parallel * r_parallel
    r_ser = r_parallel / (1.0 + b**2)
    c_ser = c_parallel * (1.0 + b**2) / b**2
    return r_ser, c_ser
