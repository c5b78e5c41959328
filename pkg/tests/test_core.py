import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from twotls.core import (GridError, SystemParams, TimeGrid, default_grid, from_spectrum, make_pulse,
                         pulse_from_samples, rates, to_spectrum, trapezoid)


# -- oracle values ----------------------------------------------------------

def test_square_pulse_normalised():
    # [TRIVIAL] normalisation by construction
    pulse = make_pulse("square", 1.0, default_grid(1.0, 1.0))
    assert abs(pulse.norm2() - 1.0) < 1e-10


def test_square_pulse_height():
    # [TRIVIAL] f = 1/sqrt(T) on [0, T]
    grid = default_grid(2.0, 1.0)
    pulse = make_pulse("square", 2.0, grid)
    i0, i1 = grid.index_of(0.0), grid.index_of(2.0)
    assert np.allclose(pulse.values[i0:i1 + 1], 1 / math.sqrt(2.0), atol=1e-15)
    assert np.all(pulse.values[:i0] == 0) and np.all(pulse.values[i1 + 1:] == 0)
    # one-sided limits at the edges
    assert pulse.lo[i0] == 0 and pulse.hi[i1] == 0


def test_gaussian_pulse_norm_and_peak():
    # [DERIVED] direct quadrature of exp(-4 t^2 / T^2) centred mid-grid
    grid = default_grid(1.0, 1.0, shape="gaussian")
    pulse = make_pulse("gaussian", 1.0, grid)
    assert abs(pulse.norm2() - 1.0) < 1e-10
    centre = 0.5 * (grid.t_start + grid.t_end)
    assert abs(grid.t[np.argmax(np.abs(pulse.values))] - centre) <= grid.dt


def test_pulse_rejects_short_grid():
    grid = TimeGrid(0.0, 1.0, 101)
    with pytest.raises(GridError, match="grid"):
        make_pulse("square", 2.0, grid)
    with pytest.raises(GridError, match="too short"):
        make_pulse("gaussian", 1.0, grid)


def test_pulse_rejects_bad_duration():
    with pytest.raises(GridError):
        make_pulse("square", -1.0, default_grid(1.0, 1.0))


def test_zero_envelope_zero_spectrum():
    # [TRIVIAL]
    grid = TimeGrid(-5, 5, 256)
    spec = to_spectrum(np.zeros(grid.n), grid)
    assert np.all(spec.values == 0)


def test_spectrum_round_trip():
    # [TRIVIAL] unitarity of the transform
    grid = default_grid(1.0, 1.0, 1024)
    pulse = make_pulse("square", 1.0, grid)
    back = from_spectrum(to_spectrum(pulse.values, grid))
    assert np.max(np.abs(back - pulse.values)) < 1e-8


def test_square_spectrum_first_zero():
    # [DERIVED] |f~(w)| of a rectangle of length T is |sinc(w T / 2)|, first zero at 2 pi / T
    T = 1.0
    n, dt = 2 ** 14, T / 256
    grid = TimeGrid(-2.0, -2.0 + (n - 1) * dt, n)
    pulse = make_pulse("square", T, grid)
    spec = to_spectrum(pulse)
    w = spec.omega
    band = (w > 0.5 * 2 * math.pi / T) & (w < 1.5 * 2 * math.pi / T)
    w_min = w[band][np.argmin(np.abs(spec.values[band]))]
    assert abs(w_min - 2 * math.pi / T) <= 1.01 * spec.domega
    k = np.argmin(np.abs(w - 0.5))
    expected = math.sqrt(T / (2 * math.pi)) * abs(np.sinc(w[k] * T / (2 * math.pi)))
    assert abs(abs(spec.values[k]) - expected) < 1e-4


def test_parseval():
    grid = default_grid(1.0, 1.0, 1024, shape="gaussian")
    pulse = make_pulse("gaussian", 1.0, grid)
    spec = to_spectrum(pulse.values, grid)
    assert abs(spec.norm2() - np.sum(np.abs(pulse.values) ** 2) * grid.dt) < 1e-8


def test_non_uniform_grid_rejected():
    with pytest.raises(GridError):
        to_spectrum(np.ones(4), np.array([0.0, 1.0, 3.0, 4.0]))


def test_rates_flat_window():
    # [PAPER] Gamma+ = Gamma- = Gamma_c = Gamma_s = g^2 at phi = 3 pi/2, Delta = g^2
    r = rates(SystemParams(g2=1.7, Delta=1.7, phi=1.5 * math.pi))
    for value in (r.Gamma_plus, r.Gamma_minus, r.gamma_c, r.gamma_s):
        assert abs(value - 1.7) < 1e-12


def test_rates_phi_zero():
    # [TRIVIAL] cos 0 = 1
    p = SystemParams(g2=1.0, delta=0.3, Delta=0.2, phi=0.0)
    r = rates(p)
    assert abs(r.Gamma_plus - (2 - 1j * p.delta_plus)) < 1e-15
    assert abs(r.Gamma_minus - (-1j * p.delta_minus)) < 1e-15
    assert r.gamma_s == 0


def test_rates_phi_pi():
    # [TRIVIAL] cos pi = -1
    r = rates(SystemParams(g2=1.0, phi=math.pi))
    assert abs(r.gamma_c) < 1e-15 and abs(r.gamma_s - 2.0) < 1e-15


def test_params_invariants():
    with pytest.raises(ValueError):
        SystemParams(g2=-1.0)
    with pytest.raises(ValueError):
        SystemParams(delay=-0.1)
    p = SystemParams(delta=0.5, Delta=0.2, beta=0.1)
    assert p.delta_plus == pytest.approx(0.3) and p.delta_minus == pytest.approx(0.7)
    assert p.delta_plus_prime == pytest.approx(0.6) and p.delta_minus_prime == pytest.approx(0.2)


def test_default_grid_places_edges_on_nodes():
    for T in (0.3, 0.91, 1.0, 7.0):
        grid = default_grid(T, 1.0)
        assert grid.index_of(0.0) is not None and grid.index_of(T) is not None
        assert grid.t_end >= T + 12.0 - 1e-9


def test_custom_pulse_normalised():
    grid = TimeGrid(-5, 5, 501)
    pulse = pulse_from_samples(grid, np.exp(-grid.t ** 2) * (1 + 0.5j))
    assert abs(pulse.norm2() - 1.0) < 1e-10


def test_trapezoid_exact_for_linear():
    lo = np.array([0.0, 1.0, 2.0])
    assert trapezoid(lo, lo, 0.5) == pytest.approx(1.0)


# -- properties -------------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(g2=st.floats(0, 10), phi=st.floats(-20, 20), delta=st.floats(-5, 5), Delta=st.floats(-5, 5),
       beta=st.floats(-5, 5))
def test_rate_sum_rule(g2, phi, delta, Delta, beta):
    r = rates(SystemParams(g2=g2, phi=phi, delta=delta, Delta=Delta, beta=beta))
    assert abs(r.Gamma_plus.real + r.Gamma_minus.real - 2 * g2) <= 1e-12 * max(1.0, g2)
    assert r.gamma_c >= 0 and r.gamma_s >= 0


@settings(max_examples=40, deadline=None)
@given(T=st.floats(0.05, 20), g2=st.floats(0.05, 10), shape=st.sampled_from(["square", "gaussian"]))
def test_pulse_normalisation_property(T, g2, shape):
    # the default grid resolves a Gaussian at 1024 nodes once g2 T >= 0.25
    assume(shape == "square" or g2 * T >= 0.25)
    pulse = make_pulse(shape, T, default_grid(T, g2, 1024, shape))
    assert abs(pulse.norm2() - 1.0) < 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_parseval_property(seed):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(-3.0, 4.0, 300)
    f = rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)
    spec = to_spectrum(f, grid)
    assert abs(spec.norm2() - np.sum(np.abs(f) ** 2) * grid.dt) < 1e-8 * np.sum(np.abs(f) ** 2)
    assert np.max(np.abs(from_spectrum(spec) - f)) < 1e-8
