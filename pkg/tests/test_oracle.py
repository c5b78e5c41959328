import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from twotls.core import GridError, SystemParams, TimeGrid, default_grid, from_spectrum, make_pulse, to_spectrum
from twotls.linear import standing_wave_transfer
from twotls.nonlinear import channel_probabilities, standing_wave_channels
from twotls.oracle import (MAX_STEP, NotAsymptoticWarning, default_drift_tol, evolve, extract_two_photon,
                           single_photon_output, step_rate)
from twotls.validate import ORACLE_CONFIGS, compare_with_oracle

FLAT = SystemParams(g2=1.0, Delta=1.0, phi=1.5 * math.pi)


def square(T, g2=1.0, n=512):
    return make_pulse("square", T, default_grid(T, g2, n))


def test_no_coupling_is_identity():
    # [TRIVIAL] nothing scatters
    pulse = square(1.0, n=256)
    p = SystemParams(g2=0.0, phi=1.0)
    state = evolve(p, pulse, "cc")
    out = extract_two_photon(state, "standing")
    assert np.max(np.abs(out["cc"].values - np.outer(pulse.values, pulse.values))) < 1e-12
    assert out["dd"].norm2() < 1e-24
    assert np.max(np.abs(single_photon_output(p, pulse, "c") - pulse.values)) < 1e-12


def test_coarse_step_rejected():
    assert MAX_STEP == 0.05
    with pytest.raises(GridError, match="step too coarse"):
        evolve(FLAT, square(0.91, n=128))


def test_drift_tolerance_scales_with_step():
    p = SystemParams(g2=1.0, phi=1.0)
    assert default_drift_tol(p, 1e-6) == 1e-4
    dt = 0.04 / step_rate(p)
    assert default_drift_tol(p, dt) == pytest.approx(10 * 0.04 ** 2)


def test_truncated_window_warns():
    # excitation left at the end of the window is reported, not hidden
    p = SystemParams(g2=0.2, phi=1.0)
    pulse = make_pulse("square", 1.0, TimeGrid(-0.5, 2.0, 201))
    with pytest.warns(NotAsymptoticWarning):
        extract_two_photon(evolve(p, pulse, "cc"), "standing")


def test_unknown_input():
    with pytest.raises(ValueError):
        evolve(FLAT, square(1.0), "sideways")


def test_second_order_convergence_standing():
    # [DERIVED] both routes are second order: halving dt cuts the discrepancy ~4x
    p, T = ORACLE_CONFIGS["standing"]
    coarse = compare_with_oracle(p, T, "standing", 512)
    fine = compare_with_oracle(p, T, "standing", 1024)
    for name in coarse.relative_l2:
        assert fine.relative_l2[name] < 1e-3
        assert 3.0 < coarse.relative_l2[name] / fine.relative_l2[name] < 5.0
    # doubly excited amplitude and one-photon output, independently of the channel builders
    assert fine.psi_e_error < 1e-4
    assert fine.single_photon_error < 1e-4
    assert coarse.norm_drift < default_drift_tol(p, coarse.dt)


def test_sorter_probability_matches_oracle():
    # [DERIVED] P_dd at g2 T = 0.91 from both routes
    pulse = square(0.91, n=1024)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotAsymptoticWarning)
        oracle = extract_two_photon(evolve(FLAT, pulse, "cc"), "standing")
    closed = channel_probabilities(standing_wave_channels(FLAT, pulse)).probabilities["dd"]
    assert oracle["dd"].norm2() == pytest.approx(closed, abs=1e-3)
    assert closed == pytest.approx(0.3048, abs=1e-3)


def test_gaussian_single_photon_spectrum():
    # [DERIVED] frequency-domain transfer against time stepping for a smooth pulse
    p = SystemParams(g2=1.0, delta=0.2, Delta=0.3, phi=2.0)
    grid = TimeGrid(-20.0, 20.0, 1024)
    pulse = make_pulse("gaussian", 2.0, grid)
    spec = to_spectrum(pulse)
    expected = from_spectrum(replace(spec, values=standing_wave_transfer(p, "c")(spec.omega) * spec.values))
    got = single_photon_output(p, pulse, "c")
    assert np.linalg.norm(got - expected) / np.linalg.norm(expected) < 1e-3
