import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from squidjpa.coupling import (
    capacitive_network,
    high_frequency_limit,
    near_pole,
    pce,
    pce_from_power,
    pce_spectrum,
    total_efficiency,
)
from squidjpa.errors import NearPole

C, CC, L = 2e-12, 0.26e-12, 375e-12


@pytest.fixture
def net():
    return capacitive_network(CC, C, L)


def test_pole_location(net):
    assert math.isclose(net.poles[0], 1 / math.sqrt(L * (C + CC)))
    assert abs(net.denominator(net.poles[0])) < 1e-12
    with pytest.raises(NearPole):
        pce(net, net.poles[0] * (1 + 5e-4))
    assert near_pole(net, net.poles[0] * (1 + 5e-4))


@settings(max_examples=200)
@given(st.floats(2 * math.pi * 1e9, 2 * math.pi * 5e10))
def test_two_routes_agree(w):
    net = capacitive_network(CC, C, L)
    if near_pole(net, w):
        return
    assert math.isclose(pce(net, w)[0], pce_from_power(net, w, 0.3 + 0.1j), rel_tol=1e-9)


def test_closed_form_value(net):
    w = 2 * 2 * math.pi * 5.81e9
    x = -1 / (w * CC)
    x_l = -1 / (w * C - 1 / (w * L))
    assert math.isclose(pce(net, w)[0], (x_l / (x + x_l)) ** 2, rel_tol=1e-12)


def test_high_frequency_limit(net):
    lim = high_frequency_limit(CC, C)
    assert math.isclose(lim, (0.26 / 2.26) ** 2)
    assert math.isclose(pce(net, 1e16)[0], lim, rel_tol=1e-6)


def test_spectrum_decreases_towards_limit(net):
    w0 = 1 / math.sqrt(L * C)
    ws = np.linspace(1.2 * w0, 4 * w0, 200)
    rows = pce_spectrum(net, ws)
    eta = [e for _, e in rows]
    assert all(e is not None for e in eta)
    assert all(b < a for a, b in zip(eta, eta[1:]))
    assert all(e > high_frequency_limit(CC, C) for e in eta)
    far = pce(net, 1000 * w0)[0]
    assert abs(far / high_frequency_limit(CC, C) - 1) < 0.01


def test_spectrum_marks_pole(net):
    rows = pce_spectrum(net, [net.poles[0]])
    assert rows[0][1] is None


def test_total_efficiency():
    eta, db = total_efficiency(0.02, 0.01)
    assert math.isclose(eta, 2e-4)
    assert math.isclose(db, 10 * math.log10(2e-4))
    with pytest.raises(ValueError):
        total_efficiency(1.5, 0.1)
