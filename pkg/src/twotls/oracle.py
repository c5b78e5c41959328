"""Brute-force reference integrator for the two-emitter scattering problem.

The pair of emitters is reduced to its symmetric (bright, ``+``) and
antisymmetric (dark, ``-``) single-excitation states plus the doubly excited
state ``ee``.  In the Markov limit the c and d standing-wave modes act as two
chiral channels that meet the emitters at a single point, so a photon's time
label s is the time at which it passes.  Channel c couples gg <-> + <-> ee
with amplitude v_c = 2 g cos(phi/2); channel d couples gg <-> - <-> ee with
v_d = -2 i g sin(phi/2) and a relative sign -1 on the upper transition.

The state is stored through its amplitude sectors:

* q[X, j](t):    emitter in X, the other photon still incoming in channel j
  (product form q(t) f(s) since incoming photons are untouched);
* E(t):          both photons absorbed;
* Q[X, j](s; t): emitter in X, one photon already emitted at s in channel j;
* Phi[j1, j2](s1, s2): both photons out.

All sectors are advanced together with the explicit midpoint rule.  Nothing
here uses the excitation kernels or closed forms of the nonlinear module.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import GridError, PulseEnvelope, SystemParams, TimeGrid

__all__ = [
    "NotAsymptoticWarning",
    "INPUTS",
    "WavefunctionState",
    "OracleWavefunction",
    "evolve",
    "extract_two_photon",
    "single_photon_output",
    "default_drift_tol",
    "step_rate",
    "MAX_STEP",
]

SQ2 = math.sqrt(2.0)
MAX_STEP = 0.05

# two-photon input amplitude per (c, d) channel pair; each has unit norm
INPUTS = {
    "cc": np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex),
    "copropagating": 0.5 * np.ones((2, 2), dtype=complex),
    "counterpropagating": np.diag([1.0, -1.0]).astype(complex) / SQ2,
}

# c/d -> a/b (transmitted/reflected, or left/right incoming) channel basis
_U = np.array([[1.0, 1.0], [1.0, -1.0]]) / SQ2


class NotAsymptoticWarning(UserWarning):
    """Excitation remains at the end of the integration window."""


def _couplings(p: SystemParams):
    g = math.sqrt(p.g2)
    v = np.array([2 * g * math.cos(p.phi / 2), -2j * g * math.sin(p.phi / 2)])
    J = p.g2 * math.sin(p.phi)
    energy = np.array([-p.delta + p.Delta + J, -p.delta - p.Delta - J])
    Gamma = np.abs(v) ** 2 / 2 + 1j * energy
    Gamma_ee = 2 * p.g2 + 1j * (-2 * p.delta + p.beta)
    sigma = np.array([1.0, -1.0])
    return v, Gamma, Gamma_ee, sigma


@dataclass(eq=False)
class WavefunctionState:
    """Amplitude sectors after evolution up to grid node ``index``.

    ``R_a``, ``R_b``, ``R_c`` hold the output two-photon amplitude for s1 <= s2
    in the form Phi = A f(s1) f(s2) + f(s1) R_a + f(s2) R_b(s1) + R_c, which
    keeps the one-sided limits of f at pulse edges available exactly.
    """

    params: SystemParams
    pulse: PulseEnvelope
    initial: str
    A: np.ndarray
    index: int
    q: np.ndarray
    psi_e: complex
    Qa: np.ndarray
    Qb: np.ndarray
    R_a: np.ndarray
    R_b: np.ndarray
    R_c: np.ndarray
    psi_e_history: np.ndarray
    norm_drift: float = 0.0
    residual_excitation: float = 0.0

    @property
    def grid(self) -> TimeGrid:
        return self.pulse.grid

    @property
    def t(self) -> float:
        return float(self.grid.t[self.index])

    def one_photon(self, side: str = "val") -> np.ndarray:
        """Amplitudes of (emitted photon at s in channel j, emitter X), shape (N, X, j)."""
        return _f_side(self.pulse, side)[:, None, None] * self.Qa + self.Qb

    @property
    def psi_plus(self) -> np.ndarray:
        return self.one_photon()[:, 0, :]

    @property
    def psi_minus(self) -> np.ndarray:
        return self.one_photon()[:, 1, :]

    def two_photon(self, side1: str = "val", side2: str = "val") -> np.ndarray:
        """Phi[j1, j2](s1, s2) on the full grid in the c/d basis, shape (2, 2, N, N)."""
        f1, f2 = _f_side(self.pulse, side1), _f_side(self.pulse, side2)
        upper = self._upper(f1, f2)
        # s1 > s2: Phi_{j1 j2}(s1, s2) = Phi_{j2 j1}(s2, s1) with sides swapped
        lower = np.swapaxes(self._upper(f2, f1), 0, 1).transpose(0, 1, 3, 2)
        iu = np.triu(np.ones((self.grid.n, self.grid.n), dtype=bool))
        return np.where(iu, upper, lower)

    def two_photon_diagonal(self, side1: str, side2: str, sgn: int) -> np.ndarray:
        """Phi on s1 = s2 approached from s1 < s2 (sgn=-1) or s1 > s2 (+1)."""
        f1, f2 = _f_side(self.pulse, side1), _f_side(self.pulse, side2)
        if sgn < 0:
            return self._upper_diag(f1, f2)
        return np.swapaxes(self._upper_diag(f2, f1), 0, 1)

    def _upper(self, f1, f2) -> np.ndarray:
        A = self.A[:, :, None, None]
        out = A * np.multiply.outer(f1, f2)
        out = out + f1[None, None, :, None] * self.R_a
        out = out + f2[None, None, None, :] * self.R_b[:, :, :, None]
        return out + self.R_c

    def _upper_diag(self, f1, f2) -> np.ndarray:
        n = self.grid.n
        idx = np.arange(n)
        return (self.A[:, :, None] * f1 * f2 + f1 * self.R_a[:, :, idx, idx]
                + f2 * self.R_b + self.R_c[:, :, idx, idx])


def _f_side(pulse: PulseEnvelope, side: str) -> np.ndarray:
    return {"val": pulse.values, "lo": pulse.lo, "hi": pulse.hi}[side]


def evolve(p: SystemParams, pulse: PulseEnvelope, initial: str = "cc",
           drift_tol: float | None = None, residual_tol: float = 1e-6) -> WavefunctionState:
    """Integrate the coupled amplitude equations over the pulse grid.

    ``initial`` selects the two-photon input: "cc" (both in the c standing
    wave), "copropagating" or "counterpropagating".  Raises GridError when
    the step is too coarse (dt * rate > ``MAX_STEP``) or the final norm
    differs from 1 by more than ``drift_tol``.  The default tolerance is
    max(1e-4, 10 (dt * rate)^2), following the second-order error of both the
    stepping and the norm quadrature.
    """
    if p.delay != 0:
        raise ValueError("the reference integrator covers the Markov limit only (delay = 0)")
    if initial not in INPUTS:
        raise ValueError(f"initial must be one of {sorted(INPUTS)}, got {initial!r}")
    A = INPUTS[initial]
    grid = pulse.grid
    n, dt = grid.n, grid.dt
    x = dt * step_rate(p)
    if x > MAX_STEP:
        raise GridError(f"step too coarse for the reference integrator: dt*rate = {x:.3g} > {MAX_STEP}; "
                        "increase the number of grid points")
    if drift_tol is None:
        drift_tol = default_drift_tol(p, dt)
    v, Gamma, Gamma_ee, sigma = _couplings(p)
    vc = np.conj(v)

    f_start = pulse.hi
    # f at cell midpoints; exact for piecewise-constant pulses
    f_mid = 0.5 * (pulse.hi[:-1] + pulse.lo[1:])

    q = np.zeros((2, 2), dtype=complex)          # [X, j]
    E = 0j
    Qa = np.zeros((n, 2, 2), dtype=complex)      # [s, X, j1]
    Qb = np.zeros((n, 2, 2), dtype=complex)
    q_hist = np.zeros((n, 2, 2), dtype=complex)
    R_a = np.zeros((2, 2, n, n), dtype=complex)  # [j1, j2, s1, s2]
    R_b = np.zeros((2, 2, n), dtype=complex)
    R_c = np.zeros((2, 2, n, n), dtype=complex)
    E_hist = np.zeros(n, dtype=complex)

    # forcing coefficients
    absorb_q = -1j * SQ2 * v[:, None] * A          # dq[X, j] source / f, with X = channel index
    absorb_Qa = -1j * SQ2 * v[None, :] * A         # dQa[., X, j1] source / f = absorb_Qa[j1, X]
    absorb_Qa = absorb_Qa.T                        # -> [X, j1]
    coupling_ee = -1j * v * sigma                  # dE source / f per q[X, X]

    def rhs(q, E, Qa_m, Qb_m, Qb_src, f):
        dq = -Gamma[:, None] * q + absorb_q * f
        dE = -Gamma_ee * E + f * (coupling_ee[0] * q[0, 0] + coupling_ee[1] * q[1, 1])
        dQa = -Gamma[None, :, None] * Qa_m + absorb_Qa[None] * f
        dQb = -Gamma[None, :, None] * Qb_m + Qb_src * f
        return dq, dE, dQa, dQb

    for k in range(n):
        # a photon passing at s_k: create its emitted-photon columns
        q_hist[k] = q
        Qa[k] = q                                     # emitter X, photon j1 passing
        Qb[k] = np.diag(-1j * vc * sigma * E)         # X = j1 only
        E_hist[k] = E
        m = k + 1
        # record output amplitudes for s1 <= s2 = s_k
        for j2 in range(2):
            scale = -1j / SQ2 * vc[j2]
            R_a[:, j2, :m, k] = scale * Qa[:m, j2, :].T
            R_c[:, j2, :m, k] = scale * Qb[:m, j2, :].T
        R_b[:, :, k] = (-1j / SQ2 * vc)[:, None] * q   # [j1, j2] uses q[X(j1), j2]
        if k == n - 1:
            break
        # source of Qb: -v_X conj(v_j1) q_{j1, X}(s_i)
        Qb_src = -v[None, :, None] * vc[None, None, :] * np.transpose(q_hist[:m], (0, 2, 1))
        dq, dE, dQa, dQb = rhs(q, E, Qa[:m], Qb[:m], Qb_src, f_start[k])
        h = 0.5 * dt
        q_h, E_h = q + h * dq, E + h * dE
        Qa_h, Qb_h = Qa[:m] + h * dQa, Qb[:m] + h * dQb
        dq, dE, dQa, dQb = rhs(q_h, E_h, Qa_h, Qb_h, Qb_src, f_mid[k])
        q = q + dt * dq
        E = E + dt * dE
        Qa[:m] += dt * dQa
        Qb[:m] += dt * dQb

    state = WavefunctionState(p, pulse, initial, A, n - 1, q, complex(E), Qa, Qb, R_a, R_b, R_c, E_hist)
    _finalize(state, drift_tol, residual_tol)
    return state


def step_rate(p: SystemParams) -> float:
    """Largest rate the time step has to resolve."""
    return max(p.g2, abs(p.delta_plus), abs(p.delta_minus),
               abs(p.delta_plus_prime), abs(p.delta_minus_prime))


def default_drift_tol(p: SystemParams, dt: float) -> float:
    x = dt * step_rate(p)
    return max(1e-4, 10.0 * x * x)


def _one_photon_norm(state: WavefunctionState) -> float:
    from .core import trapezoid

    total = 0.0
    for X in range(2):
        for j in range(2):
            lo = pulse_side(state, "lo")[:, X, j]
            hi = pulse_side(state, "hi")[:, X, j]
            total += trapezoid(np.abs(lo) ** 2, np.abs(hi) ** 2, state.grid.dt)
    return total


def pulse_side(state: WavefunctionState, side: str) -> np.ndarray:
    return _f_side(state.pulse, side)[:, None, None] * state.Qa + state.Qb


def _finalize(state: WavefunctionState, drift_tol: float, residual_tol: float) -> None:
    from .nonlinear import grid_norm2

    two = 0.0
    for j1 in range(2):
        for j2 in range(2):
            two += grid_norm2(lambda s1, s2: state.two_photon(s1, s2)[j1, j2],
                              lambda s1, s2, sg: state.two_photon_diagonal(s1, s2, sg)[j1, j2],
                              state.grid)
    one = _one_photon_norm(state)
    total = two + one + abs(state.psi_e) ** 2
    state.norm_drift = abs(total - 1.0)
    amp = max(float(np.max(np.abs(pulse_side(state, "val")))), abs(state.psi_e))
    state.residual_excitation = amp
    if state.norm_drift > drift_tol:
        raise GridError(f"norm drift {state.norm_drift:.3g} exceeds {drift_tol:g}; reduce the step size")
    if amp > residual_tol:
        warnings.warn(f"not asymptotic: residual excitation amplitude {amp:.3g} at t_end",
                      NotAsymptoticWarning, stacklevel=3)


@dataclass(eq=False)
class OracleWavefunction:
    """One output channel sampled on the grid with one-sided limits."""

    channel: str
    grid: TimeGrid
    _eval: object = field(repr=False)
    _diag: object = field(repr=False)

    def evaluate(self, side1: str = "val", side2: str = "val") -> np.ndarray:
        return self._eval(side1, side2)

    @property
    def values(self) -> np.ndarray:
        return self.evaluate()

    def diagonal(self, side1: str, side2: str, sgn: int) -> np.ndarray:
        return self._diag(side1, side2, sgn)

    def norm2(self) -> float:
        from .nonlinear import grid_norm2

        return grid_norm2(self.evaluate, self.diagonal, self.grid)


def extract_two_photon(state: WavefunctionState, geometry: str | None = None,
                       residual_tol: float = 1e-6) -> dict[str, OracleWavefunction]:
    """Output channels in the convention of the closed-form channel builders.

    Standing-wave input gives "cc" and "dd"; traveling inputs give "aa", "bb"
    and "ab" in the transmitted/reflected (or left/right) basis, scaled so
    that the channel weights of ``nonlinear.CHANNEL_WEIGHTS`` apply.
    """
    if state.residual_excitation > residual_tol:
        warnings.warn(f"not asymptotic: residual excitation amplitude "
                      f"{state.residual_excitation:.3g}", NotAsymptoticWarning, stacklevel=2)
    if geometry is None:
        geometry = "standing" if state.initial == "cc" else state.initial

    def basis(arr):
        if geometry == "standing":
            return arr
        # P^{ab} = U P^{cd} U^T on the channel indices
        return np.einsum("ai,bj,ij...->ab...", _U, _U, arr)

    names = {"standing": {"cc": (0, 0), "dd": (1, 1)},
             "copropagating": {"aa": (0, 0), "bb": (1, 1), "ab": (0, 1)},
             "counterpropagating": {"aa": (0, 0), "bb": (1, 1), "ab": (0, 1)}}[geometry]
    scale = {"standing": {}, "copropagating": {},
             "counterpropagating": {"ab": SQ2}}[geometry]
    out = {}
    for name, (a, b) in names.items():
        c = scale.get(name, 1.0)
        out[name] = OracleWavefunction(
            name, state.grid,
            lambda s1, s2, a=a, b=b, c=c: c * basis(state.two_photon(s1, s2))[a, b],
            lambda s1, s2, sg, a=a, b=b, c=c: c * basis(state.two_photon_diagonal(s1, s2, sg))[a, b])
    return out


def single_photon_output(p: SystemParams, pulse: PulseEnvelope, channel: str = "c") -> np.ndarray:
    """Scattered one-photon amplitude in the input channel (c or d).

    Returns the output wavefunction sampled at the grid nodes (node values of
    f are used for the direct part).
    """
    v, Gamma, _, _ = _couplings(p)
    j = {"c": 0, "d": 1}[channel]
    n, dt = pulse.grid.n, pulse.grid.dt
    f_mid = 0.5 * (pulse.hi[:-1] + pulse.lo[1:])
    psi = 0j
    hist = np.zeros(n, dtype=complex)
    for k in range(n):
        hist[k] = psi
        if k == n - 1:
            break
        d1 = -Gamma[j] * psi - 1j * v[j] * pulse.hi[k]
        mid = psi + 0.5 * dt * d1
        psi = psi + dt * (-Gamma[j] * mid - 1j * v[j] * f_mid[k])
    return pulse.values - 1j * np.conj(v[j]) * hist
