"""Single-photon transport through the two-emitter system.

Exact spectral maps for the standing-wave modes, their traveling-wave
combinations, the equivalent two-mirror "cavity" built from single-emitter
beamsplitter coefficients, intensity transmission landscapes, operating
point searches and pulse transmission by spectral quadrature.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import integrate, optimize

from .core import PulseEnvelope, SystemParams, rates

__all__ = [
    "TransferFunction",
    "BeamsplitterCoeffs",
    "OperatingPoints",
    "standing_wave_transfer",
    "traveling_transfer",
    "transmission_closed_form",
    "reflection_closed_form",
    "beamsplitter_coeffs",
    "cavity_compose",
    "intensity_transmission",
    "transmission_landscape",
    "find_operating_points",
    "pulse_transmission",
    "square_pulse_transmission",
    "SpectralResolutionWarning",
]


class SpectralResolutionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TransferFunction:
    """Complex amplitude ratio out/in as a function of shifted frequency."""

    mode: Literal["c", "d", "transmit", "reflect"]
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, omega):
        return self.func(np.asarray(omega, dtype=float))


def _phase(p: SystemParams, omega, markov: bool):
    if markov or p.delay == 0:
        return np.full(np.shape(omega), p.phi, dtype=float)
    return p.phi + omega * p.delay


def _standing_ratio(g2, phase, detuning, sign):
    """-(g2 + s g2 e^{-i phase} + i x) / (g2 + s g2 e^{i phase} - i x)."""
    e = np.exp(1j * phase)
    den = g2 + sign * g2 * e - 1j * detuning
    num = g2 + sign * g2 * np.conj(e) + 1j * detuning
    # den == 0 only when the mode is decoupled and on resonance (0/0); limit is 1
    tiny = np.abs(den) <= 1e-300
    with np.errstate(invalid="ignore", divide="ignore"):
        out = -num / np.where(tiny, 1.0, den)
    return np.where(tiny, 1.0 + 0j, out)


def standing_wave_transfer(p: SystemParams, mode: str = "c", markov: bool = True) -> TransferFunction:
    """Output/input spectral ratio for a photon in the c or d standing-wave mode.

    With ``markov=False`` the separation phase is frequency dependent,
    phi(w) = phi + w * delay.
    """
    if mode not in ("c", "d"):
        raise ValueError(f"mode must be 'c' or 'd', got {mode!r}")
    sign = 1.0 if mode == "c" else -1.0
    shift = p.delta_plus if mode == "c" else p.delta_minus

    def ratio(omega):
        return _standing_ratio(p.g2, _phase(p, omega, markov), omega + shift, sign)

    return TransferFunction(mode, ratio)


def traveling_transfer(p: SystemParams, markov: bool = True) -> tuple[TransferFunction, TransferFunction]:
    """Transmission and reflection amplitudes for a photon incident from one side."""
    rc = standing_wave_transfer(p, "c", markov)
    rd = standing_wave_transfer(p, "d", markov)
    transmit = TransferFunction("transmit", lambda w: 0.5 * (rc(w) + rd(w)))
    reflect = TransferFunction("reflect", lambda w: 0.5 * (rc(w) - rd(w)))
    return transmit, reflect


def transmission_closed_form(p: SystemParams, omega, markov: bool = False):
    """Transmitted amplitude ratio for non-interacting emitters (Delta = 0)."""
    omega = np.asarray(omega, dtype=float)
    x = omega + p.delta
    e2 = np.exp(2j * _phase(p, omega, markov))
    den = (p.g2 - 1j * x) ** 2 - p.g2 ** 2 * e2
    if p.g2 == 0:
        return np.ones(np.shape(omega), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -x ** 2 / den
    # w + delta = 0 with exp(2i phi) = 1 is a perfect reflector
    return np.where(den == 0, 0j, t)


def reflection_closed_form(p: SystemParams, omega, markov: bool = False):
    """Reflected amplitude ratio for non-interacting emitters (Delta = 0).

    The overall sign is the one produced both by the c/d mode difference
    and by summing multiple reflections between the emitters.
    """
    omega = np.asarray(omega, dtype=float)
    x = omega + p.delta
    ph = _phase(p, omega, markov)
    e2 = np.exp(2j * ph)
    D = p.g2 - 1j * x
    den = D ** 2 - p.g2 ** 2 * e2
    if p.g2 == 0:
        return np.zeros(np.shape(omega), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = -p.g2 * np.exp(-1j * ph) * ((1 + e2) * D - 2 * p.g2 * e2) / den
    # perfect reflector, limit taken along w at fixed phase
    return np.where(den == 0, -np.exp(-1j * ph), r)


@dataclass(frozen=True)
class BeamsplitterCoeffs:
    r_R: np.ndarray
    r_L: np.ndarray
    t: np.ndarray


def beamsplitter_coeffs(p: SystemParams, z0: float, omega, markov: bool = True) -> BeamsplitterCoeffs:
    """Reflection/transmission of a single emitter at position ``z0``.

    ``z0`` is measured in units of the emitter separation a, so the emitters
    of the pair sit at z0 = -1/2 and z0 = +1/2.
    """
    if p.Delta != 0:
        raise ValueError("beamsplitter picture holds only for non-interacting emitters (Delta = 0)")
    omega = np.asarray(omega, dtype=float)
    x = omega + p.delta
    ph = 2.0 * z0 * _phase(p, omega, markov)
    den = p.g2 - 1j * x
    if p.g2 == 0:
        zeros = np.zeros(np.shape(omega), dtype=complex)
        return BeamsplitterCoeffs(zeros, zeros.copy(), np.ones(np.shape(omega), dtype=complex))
    return BeamsplitterCoeffs(
        r_R=-p.g2 * np.exp(1j * ph) / den,
        r_L=-p.g2 * np.exp(-1j * ph) / den,
        t=-1j * x / den,
    )


def cavity_compose(p: SystemParams, omega, markov: bool = True, terms: int | None = None):
    """Sum the multiple reflections between the two emitters.

    Returns (transmit, reflect) for a wave incident from the left.  With
    ``terms=None`` the geometric series is summed in closed form; an integer
    truncates the series after that many round trips.
    """
    b = beamsplitter_coeffs(p, -0.5, omega, markov)
    r, rp, t = b.r_R, b.r_L, b.t
    if terms is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = 1.0 / (1.0 - rp ** 2)
    else:
        geo = sum(rp ** (2 * k) for k in range(terms))
    with np.errstate(invalid="ignore"):
        transmit, reflect = t * t * geo, r + t * t * rp * geo
    stuck = ~np.isfinite(geo)
    if np.any(stuck):
        # |r'| = 1: the series diverges but the closed form has a finite limit
        transmit = np.where(stuck, transmission_closed_form(p, omega, markov), transmit)
        reflect = np.where(stuck, reflection_closed_form(p, omega, markov), reflect)
    return transmit, reflect


def intensity_transmission(p: SystemParams, omega):
    """Markov intensity transmission T(w, phi), including exchange coupling.

    Points where numerator and denominator vanish together fall back to the
    amplitude route, which is finite everywhere.
    """
    omega = np.asarray(omega, dtype=float)
    x = omega + p.delta
    s, c = math.sin(p.phi), math.cos(p.phi)
    num = 4 * p.g2 ** 2 * (p.Delta + x * c + p.g2 * s) ** 2
    den = (-p.Delta ** 2 - 2 * p.Delta * p.g2 * s + x ** 2) ** 2
    scale = (abs(p.Delta) + abs(p.g2) + np.abs(x)) ** 4 + 1e-300
    singular = (den <= 1e-24 * scale) & (num <= 1e-24 * scale * max(p.g2, 1e-300) ** 2 + 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = den / (den + num)
    if np.any(singular):
        transmit, _ = traveling_transfer(p, markov=True)
        T = np.where(singular, np.abs(transmit(omega)) ** 2, T)
    return T


def transmission_landscape(p: SystemParams, omega, phi):
    """T(w, phi) on a grid; rows follow ``phi``, columns ``omega``."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    return np.stack([intensity_transmission(p.replace(phi=float(ph)), omega) for ph in phi])


@dataclass
class OperatingPoints:
    unit_transmission: list[float]
    high_reflection: list[float]
    degenerate: list[float]
    diagnostics: list[str]


def _trig_roots(A: float, B: float, C: float, n_scan: int = 720, tol: float = 1e-12) -> tuple[list[float], bool]:
    """Roots on [0, 2 pi) of A + B cos x + C sin x.

    Scan plus bisection for sign changes; tangential (double) roots are
    caught as near-zero local minima of |h| and refined by minimisation.
    Returns (roots, identically_zero).
    """
    scale = abs(A) + abs(B) + abs(C)
    if scale == 0:
        return [], True

    def h(x):
        return A + B * math.cos(x) + C * math.sin(x)

    xs = np.linspace(0.0, 2 * np.pi, n_scan + 1)
    hs = A + B * np.cos(xs) + C * np.sin(xs)
    roots: list[float] = []
    for k in range(n_scan):
        a, b = xs[k], xs[k + 1]
        ha, hb = hs[k], hs[k + 1]
        if ha == 0.0:
            roots.append(float(a))
        elif ha * hb < 0:
            roots.append(optimize.bisect(h, a, b, xtol=tol, maxiter=200))
    # tangential roots: |h| has a local minimum that touches zero
    ah = np.abs(hs[:-1])
    for k in range(n_scan):
        left, right = ah[k - 1], ah[(k + 1) % n_scan]
        if ah[k] <= left and ah[k] <= right and ah[k] < 1e-2 * scale:
            res = optimize.minimize_scalar(lambda x: h(x) ** 2,
                                           bounds=(xs[k] - xs[1], xs[k] + xs[1]),
                                           method="bounded", options={"xatol": tol})
            if abs(h(res.x)) <= 1e-7 * scale:
                roots.append(float(res.x % (2 * np.pi)))
    roots = sorted(r % (2 * np.pi) for r in roots)
    merged: list[float] = []
    for r in roots:
        if not merged or min(abs(r - merged[-1]), 2 * np.pi - abs(r - merged[-1])) > 1e-6:
            merged.append(r)
    if len(merged) > 1 and 2 * np.pi - merged[-1] + merged[0] <= 1e-6:
        merged.pop()
    return merged, False


def find_operating_points(delta: float, Delta: float, g2: float) -> OperatingPoints:
    """Separation phases giving unit transmission or high reflection at w = 0.

    Unit transmission: Delta + delta cos phi + g^2 sin phi = 0.
    High reflection:   Delta^2 + 2 Delta g^2 sin phi = delta^2.
    A phase satisfying both is reported as degenerate (T is 0/0 there).
    """
    diags: list[str] = []
    unit, ident_u = _trig_roots(Delta, delta, g2)
    refl, ident_r = _trig_roots(Delta ** 2 - delta ** 2, 0.0, 2 * Delta * g2)
    if ident_u:
        diags.append("unit-transmission condition holds identically (Delta = delta = g2 = 0)")
    if ident_r:
        diags.append("high-reflection condition holds for every phase")
    if not unit and not ident_u:
        diags.append("no real phase gives unit transmission at w=0")
    if not refl and not ident_r:
        diags.append("no real phase gives the high-reflection condition")
    scale = abs(Delta) + abs(delta) + abs(g2)
    degenerate = [r for r in unit
                  if abs(Delta ** 2 + 2 * Delta * g2 * math.sin(r) - delta ** 2) <= 1e-9 * max(scale, 1e-300) ** 2]
    if degenerate:
        diags.append("transmission is 0/0 at degenerate roots; value depends on the approach direction")
    clean = [r for r in unit if r not in degenerate]
    refl = [r for r in refl if all(abs(math.remainder(r - d, 2 * math.pi)) > 1e-6 for d in degenerate)]
    return OperatingPoints(clean, refl, degenerate, diags)


def _breakpoints(p: SystemParams) -> list[float]:
    """Resonance centres and edges of the reflection spectrum."""
    r = rates(p)
    pts = {0.0}
    for G in (r.Gamma_plus, r.Gamma_minus):
        c, w = G.imag, G.real
        pts.add(c)
        for k in (1.0, 4.0):
            if w > 0:
                pts.update((c - k * w, c + k * w))
    return sorted(pts)


def _quad(func, a, b, **kw):
    val, err = integrate.quad(func, a, b, limit=kw.pop("limit", 500), **kw)
    return val, err


def _square_reflected(reflect2, T: float, pts: list[float], epsabs: float):
    """integral R(w) |f~(w)|^2 dw for a square pulse of duration T.

    |f~|^2 = (1 - cos wT) / (pi T w^2); away from w = 0 the cosine part is
    handled by oscillatory-weight quadrature so that long pulses do not
    require resolving every sinc lobe.
    """
    w0 = 1.0 / T

    def full(w):
        x = w * T
        s = 0.25 * T / np.pi if abs(x) < 1e-4 else (1.0 - math.cos(x)) / (np.pi * T * w * w)
        return reflect2(w) * s

    inner = [x for x in pts if -w0 < x < w0]
    total, err = _quad(full, -w0, w0, points=inner or None, epsabs=epsabs)
    for sign in (1.0, -1.0):
        def smooth(u, sign=sign):
            return reflect2(sign * u) / (np.pi * T * u * u)
        cuts = sorted({w0} | {sign * x for x in pts if sign * x > w0})
        edges = cuts + [np.inf]
        for a, b in zip(edges[:-1], edges[1:]):
            v1, e1 = _quad(smooth, a, b, epsabs=epsabs)
            if np.isinf(b):
                v2, e2 = integrate.quad(smooth, a, b, weight="cos", wvar=T, limlst=100)
            else:
                v2, e2 = integrate.quad(smooth, a, b, weight="cos", wvar=T, limit=500, epsabs=epsabs)
            total += v1 - v2
            err += e1 + e2
    return total, err


def pulse_transmission(p: SystemParams, pulse: PulseEnvelope, markov: bool = True,
                       epsabs: float = 1e-11, method: str = "spectral") -> float:
    """Transmitted energy fraction of a normalized pulse.

    Evaluates 1 - integral |reflect(w)|^2 |f~(w)|^2 dw by adaptive
    quadrature with breakpoints at the resonances.  Lossless unitarity,
    |t|^2 + |r|^2 = 1, makes this equal to integral |transmit(w) f~(w)|^2 dw
    while avoiding the cancellation near full transmission.

    ``method="time"`` uses :func:`square_pulse_transmission` instead (square
    pulses, Markov limit only); it is much faster and is used for maps.
    """
    if p.g2 == 0:
        return 1.0
    if method == "time":
        if pulse.shape != "square" or not markov:
            raise ValueError("the time-domain route needs a square pulse in the Markov limit")
        return square_pulse_transmission(p, pulse.T)
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    _, reflect = traveling_transfer(p, markov)

    def reflect2(w):
        return float(np.abs(reflect(np.array(w))) ** 2)

    pts = _breakpoints(p)
    probe = np.concatenate([pts, np.geomspace(1e-3, 1e3, 61) * max(p.g2, 1.0 / (pulse.T or 1.0)),
                            -np.geomspace(1e-3, 1e3, 61) * max(p.g2, 1.0 / (pulse.T or 1.0))])
    if float(np.max(np.abs(reflect(probe)) ** 2)) < 1e-24:
        return 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if pulse.shape == "square":
                total, err = _square_reflected(reflect2, pulse.T, pts, epsabs)
            else:
                if pulse.shape == "gaussian":
                    W = 12.0 / pulse.T
                else:
                    W = np.pi / pulse.grid.dt

                def integrand(w):
                    return reflect2(w) * float(np.abs(pulse.spectrum_at(np.array(w))) ** 2)

                inner = [x for x in pts if -W < x < W]
                total, err = _quad(integrand, -W, W, points=inner or None, epsabs=epsabs, limit=2000)
        except integrate.IntegrationWarning as exc:
            warnings.warn(f"spectral quadrature did not resolve the transfer-function features: {exc}",
                          SpectralResolutionWarning, stacklevel=2)
            return float("nan")
    if err > 1e-6:
        warnings.warn(f"spectral quadrature error estimate {err:.2e}", SpectralResolutionWarning, stacklevel=2)
    return float(1.0 - total)


def _phi1(z):
    """(1 - exp(-z)) / z, stable near z = 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z / 2 + z * z / 6, -np.expm1(-zs) / zs)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def square_pulse_transmission(p: SystemParams, T: float) -> float:
    """Markov transmission of a square pulse from the time-domain reflected field.

    The reflected amplitude is rho(t) = -Gamma_c G+(t) + Gamma_s G-(t) with
    G(t) = t (1 - e^{-Gamma t}) / (Gamma t) / sqrt(T) inside the pulse and a
    pure exponential afterwards.  The inside integral uses composite
    Gauss-Legendre panels, the tail is integrated analytically.
    """
    if p.g2 == 0:
        return 1.0
    r = rates(p)
    terms = [(c, G) for c, G in ((-r.gamma_c, r.Gamma_plus), (r.gamma_s, r.Gamma_minus)) if c != 0]
    if not terms:
        return 1.0
    h = 1.0 / math.sqrt(T)
    scale = max(abs(G) for _, G in terms) * T
    panels = int(math.ceil(scale / 2.0)) + 1
    edges = np.linspace(0.0, T, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    rho = sum(c * h * t * _phi1(G * t) for c, G in terms)
    inside = float(np.sum(w * np.abs(rho) ** 2))
    amps = [(c * h * T * complex(_phi1(G * T)), G) for c, G in terms]
    tail = 0.0
    for a1, G1 in amps:
        for a2, G2 in amps:
            tail += (np.conj(a1) * a2 / (np.conj(G1) + G2)).real
    return float(1.0 - inside - tail)
