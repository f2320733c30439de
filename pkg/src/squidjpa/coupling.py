"""Pump phase-coupling efficiency through a reactive coupler.

A source of impedance ``Z0`` drives the array node through a series coupler
of reactance ``X``; the node itself looks like a reactance ``X_L``. The phase
coupling efficiency compares the power that would produce a given node phase
with a direct connection against the power needed through the coupler::

    eta_PCE = (X_L / (X + X_L))**2

It diverges where ``X + X_L = 0``; such poles are excluded with a guard band.

Note that the far-above-resonance limit of this expression for a capacitive
coupler is ``(C_c / (C + C_c))**2``, not ``(1 / (1 + C_c/C))**2``.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NearPole
from .units import REDUCED_FLUX_QUANTUM

DEFAULT_GUARD = 1e-3


@dataclass(frozen=True)
class ReactiveNetwork:
    """Series coupler and shunt load, both lossless.

    ``load_susceptance`` is ``-1/X_L``; using it keeps the parallel
    resonance (``X_L`` infinite) regular.
    """

    coupler_reactance: Callable[[float], float]
    load_susceptance: Callable[[float], float]
    r_source: float
    poles: Sequence[float] = ()

    @property
    def alpha(self) -> float:
        """``Phi0^2 / (2 Z0 (2 pi)^2)``, watts per (rad/s)^2 per rad^2."""
        return REDUCED_FLUX_QUANTUM**2 / (2.0 * self.r_source)

    def load_reactance(self, omega: float) -> float:
        b = self.load_susceptance(omega)
        return math.inf if b == 0 else -1.0 / b

    def denominator(self, omega: float) -> float:
        """``1 + X/X_L``; zero at a pole."""
        return 1.0 - self.coupler_reactance(omega) * self.load_susceptance(omega)


def capacitive_network(c_coupling: float, c_main: float, l_array: float, r_source: float = 50.0):
    """Coupling capacitor into a parallel LC (the array at its DC bias)."""
    pole = 1.0 / math.sqrt(l_array * (c_main + c_coupling))
    return ReactiveNetwork(
        coupler_reactance=lambda w: -1.0 / (w * c_coupling),
        load_susceptance=lambda w: w * c_main - 1.0 / (w * l_array),
        r_source=r_source,
        poles=(pole,),
    )


def near_pole(network: ReactiveNetwork, omega: float, guard: float = DEFAULT_GUARD) -> bool:
    for p in network.poles:
        if abs(omega - p) <= guard * omega:
            return True
    return network.denominator(omega) == 0.0


def pce(network: ReactiveNetwork, omega: float, guard: float = DEFAULT_GUARD):
    """Phase coupling efficiency as ``(linear, dB)``; raises :class:`NearPole`."""
    if omega <= 0:
        raise ValueError("omega must be > 0")
    if near_pole(network, omega, guard):
        raise NearPole(omega)
    eta = 1.0 / network.denominator(omega) ** 2
    return eta, 10.0 * math.log10(eta)


def pce_from_power(network: ReactiveNetwork, omega: float, phi_p: complex = 1.0) -> float:
    """Same quantity from the source-power expression.

    ``P_a = |phi_p Phi0/2pi * i omega (1 + Z/Z_L)|^2 / (2 Z0)`` with
    ``Z = iX`` and ``Z_L = iX_L``; the ratio to ``alpha omega^2 |phi_p|^2``
    is independent of ``phi_p``.
    """
    z = 1j * network.coupler_reactance(omega)
    y_l = 1.0 / (1j * network.load_reactance(omega))
    v_a = phi_p * REDUCED_FLUX_QUANTUM * 1j * omega * (1.0 + z * y_l)
    p_a = abs(v_a) ** 2 / (2.0 * network.r_source)
    return network.alpha * omega**2 * abs(phi_p) ** 2 / p_a


def pce_spectrum(network: ReactiveNetwork, omega_grid: Sequence[float], guard: float = DEFAULT_GUARD):
    """``[(omega, eta or None), ...]``; ``None`` marks a point inside a guard band."""
    rows = []
    for w in omega_grid:
        w = float(w)
        try:
            rows.append((w, pce(network, w, guard)[0]))
        except NearPole:
            rows.append((w, None))
    return rows


def high_frequency_limit(c_coupling: float, c_main: float) -> float:
    """Limit of :func:`pce` for a capacitive coupler as ``omega -> inf``."""
    return (c_coupling / (c_main + c_coupling)) ** 2


def total_efficiency(eta_pce: float, eta_pae: float):
    """``eta_PCE * eta_PAE`` as ``(linear, dB)``."""
    for name, v in (("eta_pce", eta_pce), ("eta_pae", eta_pae)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    eta = eta_pce * eta_pae
    return eta, 10.0 * math.log10(eta) if eta > 0 else -math.inf
