"""Physical constants and unit conversions.

Everything inside the package is SI (H, F, ohm, rad, s, W). Config files and
CSV outputs use pH, pF, GHz, MHz and dBm; the helpers below are the only place
those scalings live.
"""

import math

import numpy as np

#: Magnetic flux quantum h/2e in webers.
FLUX_QUANTUM = 2.067833848e-15
#: Reduced flux quantum, converts phase (rad) to flux (Wb).
REDUCED_FLUX_QUANTUM = FLUX_QUANTUM / (2.0 * math.pi)
#: Reduced Planck constant in J s.
HBAR = 1.054571817e-34

PICO = 1e-12
GIGA = 1e9
MEGA = 1e6


def dbm_to_watts(p_dbm):
    """Convert dBm to watts; ``-inf`` maps to 0."""
    return 1e-3 * np.power(10.0, np.asarray(p_dbm, dtype=float) / 10.0)


def watts_to_dbm(p_w):
    """Convert watts to dBm; 0 W maps to ``-inf``."""
    p_w = np.asarray(p_w, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p_w / 1e-3)


def db_to_linear(x_db):
    return np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def flux_quanta_to_phase(phi_over_phi0):
    """Loop flux in units of the flux quantum to phase in radians."""
    return 2.0 * math.pi * phi_over_phi0


def phase_to_flux_quanta(phase):
    return phase / (2.0 * math.pi)
