"""Shared numeric substrate: parameters, time grids, pulse envelopes, spectra
and the complex collective decay rates.

Frequencies are always *shifted* frequencies, measured from the carrier, so
every spectrum is centred on zero.  Transforms use the unitary convention

    f~(w) = (2 pi)^(-1/2) \\int f(t) exp(+i w t) dt

which matches the time-bin creation operator phi^dagger(t) of the photon
field.  Square pulses have jump discontinuities; every envelope therefore
carries its left (``lo``) and right (``hi``) limits at each grid node so
that cell-wise trapezoid quadrature stays exact across the jumps.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

__all__ = [
    "SystemParams",
    "TimeGrid",
    "PulseEnvelope",
    "SpectralAmplitude",
    "DecayRates",
    "GridError",
    "default_grid",
    "make_pulse",
    "pulse_from_samples",
    "to_spectrum",
    "from_spectrum",
    "rates",
    "trapezoid",
]

Shape = Literal["square", "gaussian", "custom"]


class GridError(ValueError):
    """Raised when a time or frequency grid cannot represent the request."""


@dataclass(frozen=True)
class SystemParams:
    """Physical configuration of the two emitters.

    All rates are in inverse time.  ``g2`` is the waveguide coupling g^2,
    ``delta`` the carrier-atom detuning, ``Delta`` the exchange interaction,
    ``beta`` the shift of the doubly excited state, ``phi`` the separation
    phase k_F a and ``delay`` the propagation time a/c between the emitters.
    """

    g2: float = 1.0
    delta: float = 0.0
    Delta: float = 0.0
    beta: float = 0.0
    phi: float = 0.0
    delay: float = 0.0

    def __post_init__(self):
        if not self.g2 >= 0:
            raise ValueError(f"g2 must be >= 0, got {self.g2}")
        if not self.delay >= 0:
            raise ValueError(f"delay must be >= 0, got {self.delay}")

    @property
    def delta_plus(self) -> float:
        return self.delta - self.Delta

    @property
    def delta_minus(self) -> float:
        return self.delta + self.Delta

    @property
    def delta_plus_prime(self) -> float:
        return self.delta + self.Delta - self.beta

    @property
    def delta_minus_prime(self) -> float:
        return self.delta - self.Delta - self.beta

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise GridError(f"a time grid needs n >= 2 samples, got {self.n}")
        if not self.t_end > self.t_start:
            raise GridError(f"empty time grid [{self.t_start}, {self.t_end}]")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n - 1)

    @property
    def t(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n)

    def index_of(self, time: float, tol: float = 1e-9) -> int | None:
        """Index of the node sitting exactly on ``time`` or None."""
        x = (time - self.t_start) / self.dt
        k = int(round(x))
        if abs(x - k) <= tol and 0 <= k < self.n:
            return k
        return None


def default_grid(T: float, g2: float, n: int = 2048, shape: Shape = "square") -> TimeGrid:
    """Grid over [-2T, T + 12/g^2] with nodes on t=0 and t=T.

    The spacing is rounded so that T is an integer number of steps; the
    span only ever grows.  Gaussian pulses get a symmetric grid because
    they are centred mid-grid.
    """
    if T <= 0:
        raise GridError(f"pulse duration must be positive, got {T}")
    tail = 12.0 / g2 if g2 > 0 else 12.0 * T
    if shape == "gaussian":
        half = 2.0 * T + tail
        return TimeGrid(-half, half, n)
    span = 3.0 * T + tail
    steps_in_pulse = max(int(math.floor(T * (n - 1) / span)), 1)
    dt = T / steps_in_pulse
    k0 = int(math.ceil(2.0 * T / dt))
    start = -k0 * dt
    return TimeGrid(start, start + (n - 1) * dt, n)


@dataclass(frozen=True, eq=False)
class PulseEnvelope:
    """Normalized slowly-varying envelope on a uniform grid.

    ``values`` are the pointwise samples; ``lo``/``hi`` are the left/right
    limits at each node (identical to ``values`` for continuous pulses).
    """

    grid: TimeGrid
    values: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    shape: Shape = "custom"
    T: float | None = None
    center: float = 0.0

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    @property
    def has_jumps(self) -> bool:
        return not (np.array_equal(self.lo, self.values) and np.array_equal(self.hi, self.values))

    @property
    def support(self) -> tuple[float, float]:
        if self.shape == "square":
            return self.center, self.center + self.T
        if self.shape == "gaussian":
            return self.center - 2.0 * self.T, self.center + 2.0 * self.T
        nz = np.flatnonzero(np.abs(self.values) > 1e-12 * np.abs(self.values).max(initial=0.0))
        if nz.size == 0:
            return self.grid.t_start, self.grid.t_start
        t = self.t
        return float(t[nz[0]]), float(t[nz[-1]])

    @property
    def midpoint_samples(self) -> np.ndarray:
        """Samples with jump nodes replaced by the mean of both limits."""
        return 0.5 * (self.lo + self.hi)

    def norm2(self) -> float:
        return trapezoid(np.abs(self.lo) ** 2, np.abs(self.hi) ** 2, self.grid.dt)

    def spectrum_at(self, omega) -> np.ndarray:
        """Fourier amplitude at arbitrary frequencies (analytic when possible)."""
        w = np.asarray(omega, dtype=float)
        if self.shape == "square":
            T = self.T
            x = w * T
            small = np.abs(x) < 1e-8
            xs = np.where(small, 1.0, x)
            core = np.where(small, 1.0 + 0.5j * x, np.expm1(1j * xs) / (1j * xs))
            return np.sqrt(T / (2 * np.pi)) * core * np.exp(1j * w * self.center)
        if self.shape == "gaussian":
            T = self.T
            amp = (8.0 / np.pi) ** 0.25 / np.sqrt(T)
            return (amp * T * np.sqrt(np.pi) / 2.0 / np.sqrt(2 * np.pi)
                    * np.exp(-(w * T) ** 2 / 16.0 + 1j * w * self.center))
        t = self.t
        weights = np.full(t.size, self.grid.dt)
        weights[[0, -1]] *= 0.5
        f = self.midpoint_samples * weights
        out = np.exp(1j * np.multiply.outer(w, t)) @ f
        return out / np.sqrt(2 * np.pi)


def trapezoid(lo: np.ndarray, hi: np.ndarray, dt: float) -> float:
    """Cell-wise trapezoid using right limits at left nodes and left limits
    at right nodes."""
    return float(0.5 * dt * (np.sum(hi[:-1]) + np.sum(lo[1:])).real)


def make_pulse(shape: Shape, T: float, grid: TimeGrid) -> PulseEnvelope:
    """Build a normalized square or Gaussian envelope on ``grid``.

    Square pulses occupy [0, T] with height 1/sqrt(T); both edges must be
    grid nodes.  Gaussian pulses are proportional to exp(-4 (t-c)^2 / T^2)
    with c the grid midpoint.
    """
    if not T > 0:
        raise GridError(f"pulse duration must be positive, got {T}")
    t = grid.t
    if shape == "square":
        i0, i1 = grid.index_of(0.0), grid.index_of(T)
        if i0 is None or i1 is None:
            raise GridError(
                f"square pulse edges t=0 and t={T} must be grid nodes of "
                f"[{grid.t_start}, {grid.t_end}] with dt={grid.dt}; "
                "use default_grid() or align the grid")
        if i1 - i0 < 1:
            raise GridError(f"square pulse of duration {T} is not resolved by dt={grid.dt}")
        h = 1.0 / math.sqrt(T)
        values = np.zeros(grid.n, dtype=complex)
        values[i0:i1 + 1] = h
        lo = values.copy()
        hi = values.copy()
        lo[i0] = 0.0
        hi[i1] = 0.0
        return PulseEnvelope(grid, values, lo, hi, "square", float(T), 0.0)
    if shape == "gaussian":
        c = 0.5 * (grid.t_start + grid.t_end)
        if c - 2.0 * T < grid.t_start or c + 2.0 * T > grid.t_end:
            raise GridError(f"grid [{grid.t_start}, {grid.t_end}] too short for a Gaussian of duration {T}")
        if grid.dt > T / 8:
            raise GridError(f"Gaussian of duration {T} is not resolved by dt={grid.dt}")
        values = np.exp(-4.0 * ((t - c) / T) ** 2).astype(complex)
        values /= math.sqrt(trapezoid(np.abs(values) ** 2, np.abs(values) ** 2, grid.dt))
        return PulseEnvelope(grid, values, values, values, "gaussian", float(T), c)
    raise GridError(f"unknown pulse shape {shape!r}; use pulse_from_samples for custom envelopes")


def pulse_from_samples(grid: TimeGrid, samples) -> PulseEnvelope:
    """Wrap arbitrary (continuous) samples as a normalized custom envelope."""
    values = np.asarray(samples, dtype=complex)
    if values.shape != (grid.n,):
        raise GridError(f"expected {grid.n} samples, got shape {values.shape}")
    nrm = trapezoid(np.abs(values) ** 2, np.abs(values) ** 2, grid.dt)
    if nrm <= 0:
        raise GridError("custom envelope has zero norm")
    values = values / math.sqrt(nrm)
    return PulseEnvelope(grid, values, values, values, "custom", None, 0.0)


@dataclass(frozen=True, eq=False)
class SpectralAmplitude:
    omega: np.ndarray
    values: np.ndarray
    t_start: float = 0.0

    @property
    def domega(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.domega)


def _check_uniform(t: np.ndarray) -> float:
    d = np.diff(t)
    if d.size == 0 or np.any(np.abs(d - d[0]) > 1e-9 * abs(d[0])):
        raise GridError("transforms require a uniform grid")
    return float(d[0])


def to_spectrum(samples, grid: TimeGrid | np.ndarray | None = None) -> SpectralAmplitude:
    """Discrete unitary transform of time samples.

    Accepts a PulseEnvelope (its jump-averaged samples are used) or an
    explicit sample array plus grid / time array.  The discrete norms
    sum |f|^2 dt and sum |f~|^2 dw agree to rounding.
    """
    if isinstance(samples, PulseEnvelope):
        t = samples.t
        f = samples.midpoint_samples
    else:
        f = np.asarray(samples, dtype=complex)
        t = grid.t if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    dt = _check_uniform(t)
    n = f.size
    omega = 2 * np.pi * np.fft.fftfreq(n, dt)
    spec = np.fft.ifft(f) * n * dt / np.sqrt(2 * np.pi) * np.exp(1j * omega * t[0])
    order = np.argsort(omega, kind="stable")
    return SpectralAmplitude(omega[order], spec[order], float(t[0]))


def from_spectrum(spec: SpectralAmplitude) -> np.ndarray:
    """Inverse of :func:`to_spectrum`; returns the time samples."""
    omega = spec.omega
    _check_uniform(omega)
    n = omega.size
    dw = spec.domega
    dt = 2 * np.pi / (n * dw)
    # back to FFT ordering
    k = np.rint(omega / dw).astype(int) % n
    raw = np.empty(n, dtype=complex)
    raw[k] = spec.values * np.exp(-1j * omega * spec.t_start)
    return np.fft.fft(raw) * np.sqrt(2 * np.pi) / (n * dt)


@dataclass(frozen=True)
class DecayRates:
    Gamma_plus: complex
    Gamma_minus: complex
    gamma_c: float
    gamma_s: float
    Gamma_ee: complex


def rates(p: SystemParams) -> DecayRates:
    """Complex collective rates Gamma_pm = g^2 (1 +- e^{i phi}) - i (delta -+ Delta)."""
    e = complex(math.cos(p.phi), math.sin(p.phi))
    gp = p.g2 * (1 + e) - 1j * p.delta_plus
    gm = p.g2 * (1 - e) - 1j * p.delta_minus
    return DecayRates(
        Gamma_plus=gp,
        Gamma_minus=gm,
        gamma_c=p.g2 * (1 + math.cos(p.phi)),
        gamma_s=p.g2 * (1 - math.cos(p.phi)),
        Gamma_ee=complex(2 * p.g2, -(2 * p.delta - p.beta)),
    )
