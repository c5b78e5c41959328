"""Operating-point search: coarse grid scan followed by Nelder-Mead.

Objectives act on a two-photon configuration built from ``SystemParams``
fields plus the pulse duration ``T``:

    sorter      maximise P_dd for the standing-wave input
    linearity   minimise the nonlinear norm relative to its single-atom
                (G^2) part, i.e. how far the two-atom term fails to cancel it
    leakage     minimise P_same for the counterpropagating input
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.optimize import minimize

from .core import PulseEnvelope, SystemParams, default_grid, make_pulse
from .nonlinear import (channel_probabilities, copropagating_channels, counterpropagating_channels,
                        standing_wave_channels)

__all__ = [
    "Axis",
    "Objective",
    "OBJECTIVES",
    "OptimizeResult",
    "NonConvergenceWarning",
    "PARAMETERS",
    "build_pulse",
    "objective_value",
    "scan_and_refine",
    "optimize_operating_point",
]

PARAMETERS = tuple(f.name for f in fields(SystemParams)) + ("T",)

GEOMETRIES = {
    "standing": standing_wave_channels,
    "copropagating": copropagating_channels,
    "counterpropagating": counterpropagating_channels,
}


class NonConvergenceWarning(UserWarning):
    """The local refinement hit its evaluation budget before converging."""


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    n: int = 11

    def __post_init__(self):
        if self.name not in PARAMETERS:
            raise ValueError(f"unknown parameter {self.name!r}; choose from {', '.join(PARAMETERS)}")
        if not self.hi > self.lo:
            raise ValueError(f"axis {self.name}: need lo < hi, got [{self.lo}, {self.hi}]")
        if self.n < 1:
            raise ValueError(f"axis {self.name}: need at least one point, got {self.n}")

    def points(self) -> np.ndarray:
        if self.n == 1:
            return np.array([0.5 * (self.lo + self.hi)])
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class Objective:
    name: str
    geometry: str
    maximize: bool
    description: str


OBJECTIVES = {
    "sorter": Objective("sorter", "standing", True, "P_dd, both photons in the antisymmetric mode"),
    "linearity": Objective("linearity", "standing", False, "||G2 + E||^2 / ||G2||^2 summed over channels"),
    "leakage": Objective("leakage", "counterpropagating", False, "P_same, both photons leave together"),
}


@dataclass
class OptimizeResult:
    objective: str
    x: dict[str, float]
    value: float
    converged: bool
    n_evaluations: int
    scan_best: dict[str, float]
    scan_value: float
    trace: list[dict] = field(default_factory=list)
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "objective": self.objective,
            "x": self.x,
            "value": self.value,
            "converged": self.converged,
            "n_evaluations": self.n_evaluations,
            "scan_best": self.scan_best,
            "scan_value": self.scan_value,
            "message": self.message,
            "trace": self.trace,
        }


def build_pulse(p: SystemParams, T: float, shape: str = "square", n: int = 2048) -> PulseEnvelope:
    return make_pulse(shape, T, default_grid(T, p.g2, n, shape))


def objective_value(name: str, p: SystemParams, pulse: PulseEnvelope, geometry: str | None = None) -> float:
    """Raw (unsigned) value of objective ``name`` at one configuration."""
    obj = OBJECTIVES[name]
    geometry = geometry or obj.geometry
    if geometry not in GEOMETRIES:
        raise ValueError(f"unknown geometry {geometry!r}")
    if name == "sorter":
        # only the dd channel is needed
        return standing_wave_channels(p, pulse)["dd"].norm2()
    channels = GEOMETRIES[geometry](p, pulse)
    if name == "linearity":
        # normalised so that detuning away from resonance is not a way out
        full = sum(wf.norm2(["G2", "E"]) for wf in channels.values())
        single = sum(wf.norm2(["G2"]) for wf in channels.values())
        return float(full / single) if single > 0 else 0.0
    if geometry != "counterpropagating":
        raise ValueError("the leakage objective needs the counterpropagating input")
    return channel_probabilities(channels, geometry).probabilities["same_direction"]


def scan_and_refine(func, axes: list[Axis], maximize: bool = False, budget: int = 200,
                    xatol: float = 1e-4, fatol: float = 1e-7) -> OptimizeResult:
    """Grid-scan ``func(dict) -> float`` over ``axes`` then refine with Nelder-Mead.

    The scan points count against ``budget``.  When the refinement runs out
    of evaluations the best point found is returned with a warning.
    """
    if not axes:
        raise ValueError("need at least one axis")
    names = [a.name for a in axes]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate axes in {names}")
    sign = -1.0 if maximize else 1.0
    trace: list[dict] = []
    count = 0

    def f(x) -> float:
        nonlocal count
        count += 1
        point = dict(zip(names, (float(v) for v in x)))
        value = float(func(point))
        trace.append({"evaluation": count, **point, "value": value})
        return sign * value

    scan = list(itertools.product(*(a.points() for a in axes)))
    if len(scan) >= budget:
        raise ValueError(f"scan of {len(scan)} points exceeds the budget of {budget} evaluations")
    scores = [f(x) for x in scan]
    i_best = int(np.argmin(scores))
    x0 = np.array(scan[i_best], dtype=float)
    scan_best, scan_value = dict(zip(names, map(float, x0))), sign * scores[i_best]

    # initial simplex: one scan step along each axis, pointing inwards
    simplex = [x0]
    for k, a in enumerate(axes):
        step = (a.hi - a.lo) / max(a.n - 1, 1)
        v = x0.copy()
        v[k] = v[k] + step if v[k] + step <= a.hi else v[k] - step
        simplex.append(v)
    res = minimize(f, x0, method="Nelder-Mead", bounds=[(a.lo, a.hi) for a in axes],
                   options={"maxfev": budget - count, "xatol": xatol, "fatol": fatol,
                            "initial_simplex": np.array(simplex)})
    best_x, best_f = (res.x, res.fun) if res.fun <= scores[i_best] else (x0, scores[i_best])
    if not res.success:
        warnings.warn(f"Nelder-Mead did not converge within {budget} evaluations "
                      f"({res.message}); returning best point found", NonConvergenceWarning, stacklevel=2)
    return OptimizeResult(
        objective="", x=dict(zip(names, map(float, best_x))), value=float(sign * best_f),
        converged=bool(res.success), n_evaluations=count, scan_best=scan_best,
        scan_value=float(scan_value), trace=trace, message=str(res.message))


def optimize_operating_point(objective: str, base: SystemParams, T: float, axes: list[Axis],
                             shape: str = "square", n: int = 2048, geometry: str | None = None,
                             budget: int = 200, xatol: float = 1e-4, fatol: float = 1e-7) -> OptimizeResult:
    """Optimise ``objective`` over ``axes``; other parameters stay at ``base`` and ``T``."""
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; choose from {', '.join(OBJECTIVES)}")
    obj = OBJECTIVES[objective]

    def func(point: dict) -> float:
        changes = {k: v for k, v in point.items() if k != "T"}
        p = base.replace(**changes)
        return objective_value(objective, p, build_pulse(p, point.get("T", T), shape, n), geometry)

    res = scan_and_refine(func, axes, obj.maximize, budget, xatol, fatol)
    res.objective = objective
    return res
