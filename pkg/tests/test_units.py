import math

import numpy as np
from hypothesis import given, strategies as st

from squidjpa import units


def test_dbm_reference_points():
    assert units.dbm_to_watts(0.0) == 1e-3
    assert math.isclose(units.dbm_to_watts(-30.0), 1e-6, rel_tol=1e-12)
    assert units.dbm_to_watts(-math.inf) == 0.0
    assert units.watts_to_dbm(0.0) == -math.inf


@given(st.floats(-200, 50))
def test_dbm_round_trip(p):
    assert math.isclose(float(units.watts_to_dbm(units.dbm_to_watts(p))), p, abs_tol=1e-9)


def test_flux_phase_conversion():
    assert math.isclose(units.flux_quanta_to_phase(0.5), math.pi)
    assert math.isclose(units.phase_to_flux_quanta(2 * math.pi), 1.0)
    assert math.isclose(units.REDUCED_FLUX_QUANTUM * 2 * math.pi, units.FLUX_QUANTUM)


def test_db_linear():
    assert np.allclose(units.db_to_linear([0, 10, 20]), [1, 10, 100])
    assert units.linear_to_db(0.0) == -math.inf
