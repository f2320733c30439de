"""Periodic steady-state simulation of rf-SQUID array parametric amplifiers."""

__version__ = "0.1.0"

from .circuit import (
    CircuitParams,
    FluxBias,
    array_inductance,
    max_c3_bias,
    quality_factor,
    resonant_frequency,
    solve_dc_phase,
    taylor_coefficients,
)
from .dynamics import DriveSpec, SolverOptions, SteadyStateSolution, integrate_to_steady_state, make_two_tone
from .metrics import find_p1db, gain_curve, measure_gain, pump_added_efficiency, tune_pump
from .design_space import bias_pump_map, build_family, design_map, efficiency_maps
from .coupling import capacitive_network, pce, total_efficiency
from .analysis import fit_reflection, flux_modulation_spectrum, drive_power_calibration
from .kernel import BACKEND
