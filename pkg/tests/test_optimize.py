import math
import warnings

import pytest

from twotls.core import SystemParams
from twotls.optimize import (OBJECTIVES, Axis, NonConvergenceWarning, build_pulse, objective_value,
                             optimize_operating_point, scan_and_refine)


def bowl(point):
    return (point["delta"] - 0.3) ** 2 + 2 * (point["Delta"] + 0.2) ** 2


def test_scan_and_refine_finds_minimum():
    axes = [Axis("delta", -1, 1, 5), Axis("Delta", -1, 1, 5)]
    res = scan_and_refine(bowl, axes, budget=200)
    assert res.converged
    assert res.x["delta"] == pytest.approx(0.3, abs=1e-3)
    assert res.x["Delta"] == pytest.approx(-0.2, abs=1e-3)
    assert res.value <= res.scan_value
    assert res.n_evaluations == len(res.trace) <= 200


def test_maximise_flips_sign():
    axes = [Axis("phi", 0, 2 * math.pi, 9)]
    res = scan_and_refine(lambda q: math.sin(q["phi"]), axes, maximize=True)
    assert res.x["phi"] == pytest.approx(math.pi / 2, abs=1e-3)
    assert res.value == pytest.approx(1.0, abs=1e-6)


def test_refinement_respects_bounds():
    axes = [Axis("T", 0.5, 1.5, 5)]
    res = scan_and_refine(lambda q: q["T"], axes, maximize=True)
    assert res.x["T"] == pytest.approx(1.5)


def test_budget_exhaustion_warns():
    axes = [Axis("delta", -1, 1, 3), Axis("Delta", -1, 1, 3)]
    with pytest.warns(NonConvergenceWarning):
        res = scan_and_refine(bowl, axes, budget=12)
    assert not res.converged and res.n_evaluations <= 12


def test_scan_larger_than_budget():
    with pytest.raises(ValueError, match="budget"):
        scan_and_refine(bowl, [Axis("delta", 0, 1, 20), Axis("Delta", 0, 1, 20)], budget=100)


def test_axis_validation():
    with pytest.raises(ValueError):
        Axis("speed", 0, 1)
    with pytest.raises(ValueError):
        Axis("phi", 1, 0)
    with pytest.raises(ValueError):
        scan_and_refine(bowl, [])
    with pytest.raises(ValueError, match="duplicate"):
        scan_and_refine(bowl, [Axis("delta", 0, 1), Axis("delta", 0, 1)])


def test_no_coupling_objectives():
    # [TRIVIAL] nothing reaches the dark mode, and nothing scatters
    p = SystemParams(g2=0.0, phi=1.5 * math.pi)
    pulse = build_pulse(SystemParams(g2=1.0), 1.0, n=512)
    assert objective_value("sorter", p, pulse) == 0.0
    assert objective_value("linearity", p, pulse) == 0.0
    assert objective_value("leakage", p, pulse) == pytest.approx(0.0, abs=1e-6)


def test_leakage_needs_counterpropagating():
    pulse = build_pulse(SystemParams(g2=1.0), 1.0, n=256)
    with pytest.raises(ValueError):
        objective_value("leakage", SystemParams(), pulse, geometry="standing")
    with pytest.raises(ValueError):
        optimize_operating_point("speed", SystemParams(), 1.0, [Axis("phi", 0, 1, 3)])


def test_linearity_finds_cancellation():
    # [PAPER] at phi = 0 the nonlinearity cancels for beta = 2 delta and delta = Delta;
    # the scan grid does not contain that point
    base = SystemParams(g2=1.0, delta=0.5, phi=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NonConvergenceWarning)
        res = optimize_operating_point("linearity", base, 20.0,
                                       [Axis("Delta", 0.0, 1.0, 4), Axis("beta", 0.0, 2.0, 4)],
                                       n=1024, budget=150)
    assert res.x["Delta"] == pytest.approx(0.5, abs=0.02)
    assert res.x["beta"] == pytest.approx(1.0, abs=0.04)
    assert res.value < res.scan_value


def test_objective_table():
    assert OBJECTIVES["sorter"].maximize and OBJECTIVES["sorter"].geometry == "standing"
    assert not OBJECTIVES["leakage"].maximize
