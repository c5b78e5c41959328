"""Two-photon scattering in the Markov limit.

Excitation kernels

    G(t) = int_{-inf}^t exp(-Gamma (t - t')) f(t') dt'
    E(t) = int_{-inf}^t exp(-Gamma_ee (t - t')) f(t') G(t') dt'

with Gamma_ee = 2 g^2 - i (2 delta - beta), and the output two-photon
wavefunctions for three input geometries: both photons in the symmetric
standing-wave mode c, both incident from the left (copropagating), or one
from each side (counterpropagating).

Each output channel is stored as a sum of separable products u(t1) v(t2)
(the "linear" part, uncorrelated single-photon scattering) and kernel terms
exp(-lambda |t1 - t2|) h(t_<) [a + b sgn(t1 - t2)] carrying the photon-photon
correlations.  Norms use cell-wise trapezoid quadrature with one-sided limits
at pulse discontinuities; cells cut by the diagonal t1 = t2 are split into
two triangles because terms with sgn(t1 - t2) jump across it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import GridError, PulseEnvelope, SystemParams, TimeGrid, rates

__all__ = [
    "ExcitationKernels",
    "Samples",
    "SeparableTerm",
    "KernelTerm",
    "TwoPhotonWavefunction",
    "ChannelReport",
    "excitation_kernels",
    "adiabatic_E",
    "standing_wave_channels",
    "copropagating_channels",
    "counterpropagating_channels",
    "channel_probabilities",
    "double_excitation_amplitude",
    "exp_recurrence",
    "norm2",
    "inner_l2",
    "part_gram",
    "grid_inner",
    "grid_norm2",
    "MAX_STEP_RATE",
]

MAX_STEP_RATE = 0.5


# --------------------------------------------------------------------------
# kernels

def _weights(z: complex) -> tuple[complex, complex, complex]:
    """exp(-z), A(z), B(z) for one cell of the exponential recurrence.

    A = int_0^1 e^{-z v} v dv weights the left endpoint, B = int_0^1
    e^{-z v} (1 - v) dv the right one.
    """
    if abs(z) < 0.5:
        A = B = 0j
        term = 1.0 + 0j
        for n in range(25):
            A += term / (n + 2)
            B += term / ((n + 1) * (n + 2))
            term *= -z / (n + 1)
        return complex(np.exp(-z)), A, B
    e = complex(np.exp(-z))
    A = (1.0 - (1.0 + z) * e) / (z * z)
    B = (z - 1.0 + e) / (z * z)
    return e, A, B


def exp_recurrence(rate: complex, lo: np.ndarray, hi: np.ndarray, dt: float) -> np.ndarray:
    """Solve y' = -rate y + s(t), y(t_0) = 0, on a uniform grid.

    ``s`` is taken piecewise linear on every cell, running from its right
    limit ``hi[k]`` at the left node to its left limit ``lo[k+1]`` at the right
    node; for such sources the recurrence is exact.
    """
    e, A, B = _weights(rate * dt)
    n = lo.shape[0]
    y = np.empty(n, dtype=complex)
    y[0] = 0.0
    src = dt * (A * hi[:-1] + B * lo[1:])
    acc = 0j
    for k in range(n - 1):
        acc = e * acc + src[k]
        y[k + 1] = acc
    return y


@dataclass(frozen=True, eq=False)
class ExcitationKernels:
    grid: TimeGrid
    G_plus: np.ndarray
    G_minus: np.ndarray
    E_plus: np.ndarray
    E_minus: np.ndarray
    Gamma_plus: complex
    Gamma_minus: complex
    Gamma_ee: complex


def excitation_kernels(p: SystemParams, pulse: PulseEnvelope) -> ExcitationKernels:
    """G+-, E+- on the pulse grid by the exact exponential recurrence."""
    r = rates(p)
    dt = pulse.grid.dt
    for name, G in (("Gamma_+", r.Gamma_plus), ("Gamma_-", r.Gamma_minus), ("Gamma_ee", r.Gamma_ee)):
        if dt * abs(G) > MAX_STEP_RATE:
            raise GridError(
                f"kernel under-resolved: dt*|{name}| = {dt * abs(G):.3g} > {MAX_STEP_RATE}; "
                "increase the number of grid points")
    Gp = exp_recurrence(r.Gamma_plus, pulse.lo, pulse.hi, dt)
    Gm = exp_recurrence(r.Gamma_minus, pulse.lo, pulse.hi, dt)
    Ep = exp_recurrence(r.Gamma_ee, pulse.lo * Gp, pulse.hi * Gp, dt)
    Em = exp_recurrence(r.Gamma_ee, pulse.lo * Gm, pulse.hi * Gm, dt)
    return ExcitationKernels(pulse.grid, Gp, Gm, Ep, Em, r.Gamma_plus, r.Gamma_minus, r.Gamma_ee)


def adiabatic_E(p: SystemParams, pulse: PulseEnvelope, tol: float = 1e-12):
    """Long-pulse approximation E+- ~ f^2 / (Gamma_ee Gamma+-).

    Returns the pair (E_plus, E_minus) sampled on the pulse grid.
    """
    r = rates(p)
    scale = max(p.g2, abs(p.delta), abs(p.Delta), abs(p.beta), 1e-300) ** 2
    out = []
    for G in (r.Gamma_plus, r.Gamma_minus):
        den = r.Gamma_ee * G
        if abs(den) <= tol * scale:
            raise ValueError("two-photon resonance singularity: Gamma_ee * Gamma_pm vanishes")
        out.append(pulse.values ** 2 / den)
    return tuple(out)


def double_excitation_amplitude(p: SystemParams, pulse: PulseEnvelope, mode: str = "cc",
                                kernels: ExcitationKernels | None = None) -> np.ndarray:
    """Amplitude of the doubly excited state for both photons in mode c (or d).

    psi_e(t) = -exp(-i (2 delta + beta) t) 2 sqrt(2) Gamma_c E+(t), and the d
    analogue with Gamma_s and E-.  Only the modulus is frame independent.
    """
    k = kernels or excitation_kernels(p, pulse)
    r = rates(p)
    t = pulse.grid.t
    if mode == "cc":
        amp, E = r.gamma_c, k.E_plus
    elif mode == "dd":
        amp, E = r.gamma_s, k.E_minus
    else:
        raise ValueError(f"mode must be 'cc' or 'dd', got {mode!r}")
    return -np.exp(-1j * (2 * p.delta + p.beta) * t) * 2.0 * math.sqrt(2.0) * amp * E


# --------------------------------------------------------------------------
# wavefunction representation

def _tail_product(a: dict, b: dict) -> dict:
    out: dict = {}
    for ra, ca in a.items():
        for rb, cb in b.items():
            r = ra + rb
            out[r] = out.get(r, 0j) + ca * cb
    return {r: c for r, c in out.items() if c != 0}


@dataclass(frozen=True, eq=False)
class Samples:
    """1-D function on grid nodes with left/right limits.

    ``tail`` maps a rate mu to a coefficient c such that the function equals
    sum c exp(-mu (t - t_end)) beyond the last node; an empty tail means the
    function vanishes there.
    """

    val: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    tail: dict = field(default_factory=dict)

    @classmethod
    def smooth(cls, x: np.ndarray, tail: dict | None = None) -> "Samples":
        return cls(x, x, x, dict(tail or {}))

    @property
    def has_jumps(self) -> bool:
        return not (np.array_equal(self.lo, self.val) and np.array_equal(self.hi, self.val))

    def side(self, which: str) -> np.ndarray:
        return {"val": self.val, "lo": self.lo, "hi": self.hi}[which]

    def __add__(self, other: "Samples") -> "Samples":
        tail = dict(self.tail)
        for r, c in other.tail.items():
            tail[r] = tail.get(r, 0j) + c
        return Samples(self.val + other.val, self.lo + other.lo, self.hi + other.hi,
                       {r: c for r, c in tail.items() if c != 0})

    def __mul__(self, other) -> "Samples":
        if isinstance(other, Samples):
            return Samples(self.val * other.val, self.lo * other.lo, self.hi * other.hi,
                           _tail_product(self.tail, other.tail))
        return Samples(other * self.val, other * self.lo, other * self.hi,
                       {r: other * c for r, c in self.tail.items() if other * c != 0})

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SeparableTerm:
    coef: complex
    u: Samples
    v: Samples


@dataclass(frozen=True, eq=False)
class KernelTerm:
    """coef * exp(-rate |t1 - t2|) h(t_<) * (a + b sgn(t1 - t2)), sgn(0) = 0.

    ``h`` must be continuous (no one-sided limits).
    """

    coef: complex
    rate: complex
    h: Samples
    a: float = 1.0
    b: float = 0.0


_INDEX_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _index_arrays(n: int):
    if n not in _INDEX_CACHE:
        i = np.arange(n, dtype=np.int32)
        absdiff = np.abs(i[:, None] - i[None, :])
        minij = np.minimum(i[:, None], i[None, :])
        sgn = np.sign(i[:, None] - i[None, :]).astype(np.int8)
        _INDEX_CACHE.clear()
        _INDEX_CACHE[n] = (absdiff, minij, sgn)
    return _INDEX_CACHE[n]


def _kernel_groups(terms):
    """Merge kernel terms sharing a rate: rate -> [h_even, h_odd] arrays."""
    groups: dict[complex, list] = {}
    for t in terms:
        if isinstance(t, KernelTerm):
            g = groups.setdefault(complex(t.rate), [0j, 0j])
            g[0] = g[0] + t.coef * t.a * t.h.val
            g[1] = g[1] + t.coef * t.b * t.h.val
    return groups


def _kernel_matrix(terms, n, dt):
    groups = _kernel_groups(terms)
    if not groups:
        return None
    absdiff, minij, sgn = _index_arrays(n)
    K = np.zeros((n, n), dtype=complex)
    ones = np.ones(n)
    for rate, (h0, h1) in groups.items():
        M = (np.asarray(h0) * ones)[minij]
        if np.any(h1):
            M += (np.asarray(h1) * ones)[minij] * sgn
        M *= np.exp(-rate * dt * np.arange(n))[absdiff]
        K += M
    return K


def _separable(terms):
    return [t for t in terms if isinstance(t, SeparableTerm)]


def _evaluate(terms, n, dt, side1="val", side2="val") -> np.ndarray:
    K = _kernel_matrix(terms, n, dt)
    F = np.zeros((n, n), dtype=complex) if K is None else K
    for t in _separable(terms):
        F += t.coef * np.multiply.outer(t.u.side(side1), t.v.side(side2))
    return F


def _diagonal(terms, n, side1="val", side2=None, sgn=0) -> np.ndarray:
    side2 = side1 if side2 is None else side2
    d = np.zeros(n, dtype=complex)
    for t in _separable(terms):
        d += t.coef * t.u.side(side1) * t.v.side(side2)
    for h0, h1 in _kernel_groups(terms).values():
        d += (h0 + sgn * h1) * np.ones(n)
    return d


@dataclass(eq=False)
class TwoPhotonWavefunction:
    """Output amplitude f(t1, t2) of one channel, split into named parts.

    ``parts`` maps a label ("linear", "G2", "E") to its list of terms.  The
    amplitude lives on the square grid x grid and continues analytically
    beyond the last node.
    """

    channel: str
    grid: TimeGrid
    parts: dict[str, list] = field(default_factory=dict)
    _gram: dict | None = field(default=None, repr=False)

    def terms(self, include=None) -> list:
        names = self.parts if include is None else include
        return [t for name in names for t in self.parts.get(name, [])]

    def evaluate(self, include=None, side1: str = "val", side2: str = "val") -> np.ndarray:
        """Values on the N x N grid; rows are t1, columns t2."""
        return _evaluate(self.terms(include), self.grid.n, self.grid.dt, side1, side2)

    @property
    def values(self) -> np.ndarray:
        return self.evaluate()

    def diagonal(self, include=None, side1: str = "val", side2: str | None = None,
                 sgn: int = 0) -> np.ndarray:
        """Values on t1 = t2, approached from t1 > t2 (sgn=+1) or t1 < t2 (-1)."""
        return _diagonal(self.terms(include), self.grid.n, side1, side2, sgn)

    def gram(self) -> dict:
        """Inner products <part_i, part_j> between all named parts."""
        if self._gram is None:
            self._gram = part_gram(self.parts, self.grid)
        return self._gram

    def norm2(self, include=None) -> float:
        names = list(self.parts) if include is None else [n for n in include if n in self.parts]
        G = self.gram()
        return float(sum(G[a, b] for a in names for b in names).real)


# --------------------------------------------------------------------------
# quadrature
#
# The (t1, t2) plane splits into the grid window W = [t0, tw]^2 and the
# region beyond tw.  Inside W the cell-wise trapezoid is used, with cells on
# the diagonal replaced by two triangles.  Beyond tw every function is a
# finite sum of exponentials and the integrals are done analytically.

def _side_weights(n: int, dt: float):
    w_lo = np.full(n, 0.5 * dt)
    w_hi = np.full(n, 0.5 * dt)
    w_lo[0] = 0.0
    w_hi[-1] = 0.0
    return w_lo, w_hi


def _dot1(x: Samples, y: Samples, w_lo, w_hi) -> complex:
    """1-D cell trapezoid of conj(x) y using one-sided limits."""
    return complex(np.sum(w_lo * np.conj(x.lo) * y.lo) + np.sum(w_hi * np.conj(x.hi) * y.hi))


def _weighted_conj(x: Samples, w_lo, w_hi) -> np.ndarray:
    return w_lo * np.conj(x.lo) + w_hi * np.conj(x.hi)


def _near_diagonal(terms, n, dt) -> dict:
    """Values next to the diagonal needed by the triangle correction."""
    m = n - 1
    out = {k: np.zeros(m, dtype=complex) for k in
           ("a0", "a_dn", "a_up", "d0", "d_dn", "d_up", "b", "c")}
    # diagonal corners of the off-diagonal neighbour cells, nodes 1..n-2
    inner = slice(1, n - 1)
    for k in ("x0", "x_dn", "y0", "y_up"):
        out[k] = np.zeros(max(n - 2, 0), dtype=complex)
    for t in _separable(terms):
        uh, ul, vh, vl = t.u.hi, t.u.lo, t.v.hi, t.v.lo
        a = t.coef * uh[:-1] * vh[:-1]
        d = t.coef * ul[1:] * vl[1:]
        for s in ("0", "_dn", "_up"):
            out["a" + s] += a
            out["d" + s] += d
        out["b"] += t.coef * ul[1:] * vh[:-1]
        out["c"] += t.coef * uh[:-1] * vl[1:]
        x = t.coef * uh[inner] * vl[inner]
        y = t.coef * ul[inner] * vh[inner]
        out["x0"] += x
        out["x_dn"] += x
        out["y0"] += y
        out["y_up"] += y
    ones = np.ones(n)
    for rate, (h0, h1) in _kernel_groups(terms).items():
        h0, h1 = (np.asarray(h) * ones for h in (h0, h1))
        for key, sl in (("a", slice(0, m)), ("d", slice(1, n))):
            out[key + "0"] += h0[sl]
            out[key + "_dn"] += (h0 + h1)[sl]
            out[key + "_up"] += (h0 - h1)[sl]
        e = np.exp(-rate * dt)
        out["b"] += e * (h0 + h1)[:-1]
        out["c"] += e * (h0 - h1)[:-1]
        out["x0"] += h0[inner]
        out["x_dn"] += (h0 + h1)[inner]
        out["y0"] += h0[inner]
        out["y_up"] += (h0 - h1)[inner]
    return out


def _diag_correction(na: dict, nb: dict, dt: float) -> complex:
    P = {k: np.conj(na[k]) * nb[k] for k in na}
    tri = (P["a_dn"] + P["b"] + P["d_dn"] + P["a_up"] + P["c"] + P["d_up"]) / 6.0
    cell = (P["a0"] + P["b"] + P["c"] + P["d0"]) / 4.0
    # neighbour cells see the diagonal node from one side only
    side = (P["x_dn"] - P["x0"] + P["y_up"] - P["y0"]) / 4.0
    return complex(dt * dt * (np.sum(tri - cell) + np.sum(side)))


def _edge_terms(terms, grid: TimeGrid, axis: int) -> list:
    """Strip t_other > tw, t_axis in the window: list of (A(t_axis), mu)."""
    t = grid.t
    tw = grid.t_end
    out = []
    for term in _separable(terms):
        inner, outer = (term.u, term.v) if axis == 0 else (term.v, term.u)
        for mu, c in outer.tail.items():
            out.append((term.coef * c * inner, mu))
    for term in terms:
        if isinstance(term, KernelTerm):
            # t_axis < t_other: sgn = -1 when axis is t1, +1 when it is t2
            s = -1 if axis == 0 else 1
            w = term.coef * (term.a + s * term.b)
            if w != 0:
                out.append((w * term.h * Samples.smooth(np.exp(-term.rate * (tw - t))), term.rate))
    return out


def _corner_terms(terms, lower: bool) -> list:
    """Quadrant beyond tw, half x1 < x2 (or x1 > x2 if ``lower``):
    list of (coef, p, q) for coef exp(-p x1 - q x2)."""
    out = []
    for term in _separable(terms):
        for p, cu in term.u.tail.items():
            for q, cv in term.v.tail.items():
                out.append((term.coef * cu * cv, p, q))
    for term in terms:
        if isinstance(term, KernelTerm):
            s = 1 if lower else -1
            w = term.coef * (term.a + s * term.b)
            for kappa, ck in term.h.tail.items():
                if lower:
                    out.append((w * ck, term.rate, kappa - term.rate))
                else:
                    out.append((w * ck, kappa - term.rate, term.rate))
    return out


def _check_decay(rate: complex) -> complex:
    if not rate.real > 0:
        raise ValueError(f"non-decaying tail (rate {rate}); amplitude is not square integrable")
    return rate


def _tail_inner(terms_a, terms_b, grid: TimeGrid, w_lo, w_hi) -> complex:
    terms_a = [t for t in terms_a if t.coef != 0]
    terms_b = [t for t in terms_b if t.coef != 0]
    total = 0j
    for axis in (0, 1):
        ea, eb = _edge_terms(terms_a, grid, axis), _edge_terms(terms_b, grid, axis)
        for A, mu in ea:
            for B, nu in eb:
                total += _dot1(A, B, w_lo, w_hi) / _check_decay(np.conj(mu) + nu)
    for lower in (False, True):
        ca, cb = _corner_terms(terms_a, lower), _corner_terms(terms_b, lower)
        for c1, p1, q1 in ca:
            for c2, p2, q2 in cb:
                P, Q = np.conj(p1) + p2, np.conj(q1) + q2
                S = _check_decay(P + Q)
                total += np.conj(c1) * c2 / ((_check_decay(P) if lower else _check_decay(Q)) * S)
    return total


def part_gram(parts: dict, grid: TimeGrid) -> dict:
    """<F_a, F_b> over the whole (t1, t2) plane for every pair of parts."""
    n, dt = grid.n, grid.dt
    w_lo, w_hi = _side_weights(n, dt)
    W = w_lo + w_hi
    names = list(parts)
    K = {a: _kernel_matrix(parts[a], n, dt) for a in names}
    near = {a: _near_diagonal(parts[a], n, dt) for a in names}
    G: dict = {}
    for i, a in enumerate(names):
        for b in names[i:]:
            ta, tb = parts[a], parts[b]
            s = 0j
            for x in _separable(ta):
                for y in _separable(tb):
                    s += (np.conj(x.coef) * y.coef * _dot1(x.u, y.u, w_lo, w_hi)
                          * _dot1(x.v, y.v, w_lo, w_hi))
            if K[b] is not None:
                for x in _separable(ta):
                    s += np.conj(x.coef) * (_weighted_conj(x.u, w_lo, w_hi) @ K[b]
                                            @ _weighted_conj(x.v, w_lo, w_hi))
            if K[a] is not None:
                for y in _separable(tb):
                    s += np.conj(y.coef * (_weighted_conj(y.u, w_lo, w_hi) @ K[a]
                                           @ _weighted_conj(y.v, w_lo, w_hi)))
            if K[a] is not None and K[b] is not None:
                s += np.einsum("i,ij,j->", W, np.conj(K[a]) * K[b], W)
            s += _diag_correction(near[a], near[b], dt)
            s += _tail_inner(ta, tb, grid, w_lo, w_hi)
            G[a, b] = s
            G[b, a] = np.conj(s)
    return G


def inner_l2(terms_a, terms_b, grid: TimeGrid) -> complex:
    """<a, b> over the (t1, t2) plane for two term lists."""
    return part_gram({"a": list(terms_a), "b": list(terms_b)}, grid)["a", "b"]


def norm2(wf: TwoPhotonWavefunction, include=None) -> float:
    return wf.norm2(include)


def grid_norm2(evaluate, diagonal, grid: TimeGrid) -> float:
    """Cell/triangle quadrature of |F|^2 over the grid window for sampled F.

    ``evaluate(s1, s2)`` returns the N x N values using one-sided limits
    ``s1``/``s2`` in {"lo", "hi"} for t1/t2; ``diagonal(s1, s2, sgn)``
    returns F on the diagonal approached from t1 > t2 (sgn=+1) or t1 < t2
    (sgn=-1).  Values the arrays hold on the diagonal itself are never used.
    """
    n, dt = grid.n, grid.dt
    total = 0.0
    near = {}
    for s1, s2 in (("hi", "hi"), ("lo", "hi"), ("hi", "lo"), ("lo", "lo")):
        V = np.abs(evaluate(s1, s2)) ** 2
        r1 = slice(0, n - 1) if s1 == "hi" else slice(1, n)
        r2 = slice(0, n - 1) if s2 == "hi" else slice(1, n)
        total += V[r1, r2].sum()
        if (s1, s2) == ("hi", "hi"):
            near["a0"] = np.diagonal(V)[:-1].copy()
        elif (s1, s2) == ("lo", "lo"):
            near["d0"] = np.diagonal(V)[1:].copy()
        elif (s1, s2) == ("lo", "hi"):
            near["b"] = np.diagonal(V, -1).copy()
            near["y0"] = np.diagonal(V)[1:-1].copy()
        else:
            near["c"] = np.diagonal(V, 1).copy()
            near["x0"] = np.diagonal(V)[1:-1].copy()
        del V

    def d(s1, s2, sg):
        return np.abs(diagonal(s1, s2, sg)) ** 2

    tri = (d("hi", "hi", 1)[:-1] + near["b"] + d("lo", "lo", 1)[1:]
           + d("hi", "hi", -1)[:-1] + near["c"] + d("lo", "lo", -1)[1:]) / 6.0
    cell = (near["a0"] + near["b"] + near["c"] + near["d0"]) / 4.0
    # off-diagonal neighbour cells see the diagonal node from one side
    side = (d("hi", "lo", 1)[1:-1] - near["x0"] + d("lo", "hi", -1)[1:-1] - near["y0"]) / 4.0
    return float(0.25 * dt * dt * total + dt * dt * (np.sum(tri - cell) + np.sum(side)))


def grid_inner(A: np.ndarray, B: np.ndarray, grid: TimeGrid) -> complex:
    """Plain 2-D trapezoid of conj(A) B over the grid window."""
    w = np.full(grid.n, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    return complex(np.einsum("i,ij,j->", w, np.conj(A) * B, w))

# --------------------------------------------------------------------------
# channel assembly

def _kernel_samples(k: ExcitationKernels):
    """G+-, E+- as Samples whose tails continue the free decay after the grid."""
    def mk(x, rate):
        return Samples.smooth(x, {complex(rate): complex(x[-1])} if x[-1] != 0 else {})
    return (mk(k.G_plus, k.Gamma_plus), mk(k.G_minus, k.Gamma_minus),
            mk(k.E_plus, k.Gamma_ee), mk(k.E_minus, k.Gamma_ee))


def _single_photon(pulse, k, gc, gs):
    f = Samples(pulse.values, pulse.lo, pulse.hi)
    Gp, Gm, _, _ = _kernel_samples(k)
    tau = f + (-gc) * Gp + (-gs) * Gm
    rho = (-gc) * Gp + gs * Gm
    return f, tau, rho


def standing_wave_channels(p: SystemParams, pulse: PulseEnvelope,
                           kernels: ExcitationKernels | None = None) -> dict[str, TwoPhotonWavefunction]:
    """Both photons in the c standing-wave mode; outputs cc and dd."""
    k = kernels or excitation_kernels(p, pulse)
    r = rates(p)
    gc, gs = r.gamma_c, r.gamma_s
    Gp, _, Ep, _ = _kernel_samples(k)
    u = Samples(pulse.values, pulse.lo, pulse.hi) + (-2 * gc) * Gp
    cc = TwoPhotonWavefunction("cc", pulse.grid, {
        "linear": [SeparableTerm(1.0, u, u)],
        "G2": [KernelTerm(-4 * gc ** 2, r.Gamma_plus, Gp * Gp)],
        "E": [KernelTerm(4 * gc ** 2, r.Gamma_plus, Ep)],
    })
    dd = TwoPhotonWavefunction("dd", pulse.grid, {
        "E": [KernelTerm(4 * gc * gs, r.Gamma_minus, Ep)],
    })
    return {"cc": cc, "dd": dd}


def _aa_parts(r, k, sign: int):
    """Kernel terms of f^{sign}_{G^2,aa} and f^{sign}_{E,aa}."""
    gc, gs = r.gamma_c, r.gamma_s
    Gp, Gm, Ep, Em = _kernel_samples(k)
    mix = gc * Gp + (sign * gs) * Gm
    Emix = gc * Ep + gs * Em
    g2 = [KernelTerm(-gc, r.Gamma_plus, Gp * mix), KernelTerm(-sign * gs, r.Gamma_minus, Gm * mix)]
    e = [KernelTerm(gc, r.Gamma_plus, Emix), KernelTerm(sign * gs, r.Gamma_minus, Emix)]
    return g2, e


def copropagating_channels(p: SystemParams, pulse: PulseEnvelope,
                           kernels: ExcitationKernels | None = None) -> dict[str, TwoPhotonWavefunction]:
    """Both photons incident from the left; outputs aa (both transmitted),
    bb (both reflected) and ab (t1 transmitted, t2 reflected)."""
    k = kernels or excitation_kernels(p, pulse)
    r = rates(p)
    gc, gs = r.gamma_c, r.gamma_s
    _, tau, rho = _single_photon(pulse, k, gc, gs)
    g2_plus, e_plus = _aa_parts(r, k, +1)
    _, e_minus = _aa_parts(r, k, -1)
    Gp, Gm, _, _ = _kernel_samples(k)
    # f_{G^2,ab} = -(Gc G+ - s Gs G-)(Gc e+ G+ + s Gs e- G-), s = sgn(t1 - t2);
    # s^2 = 1, so on the diagonal the value is the mean of both one-sided limits
    g2_ab = [
        KernelTerm(-gc ** 2, r.Gamma_plus, Gp * Gp),
        KernelTerm(gc * gs, r.Gamma_plus, Gp * Gm, a=0.0, b=1.0),
        KernelTerm(-gc * gs, r.Gamma_minus, Gp * Gm, a=0.0, b=1.0),
        KernelTerm(gs ** 2, r.Gamma_minus, Gm * Gm),
    ]
    g2_minus, _ = _aa_parts(r, k, -1)
    return {
        "aa": TwoPhotonWavefunction("aa", pulse.grid, {
            "linear": [SeparableTerm(1.0, tau, tau)], "G2": g2_plus, "E": e_plus}),
        "bb": TwoPhotonWavefunction("bb", pulse.grid, {
            "linear": [SeparableTerm(1.0, rho, rho)], "G2": g2_minus, "E": e_plus}),
        "ab": TwoPhotonWavefunction("ab", pulse.grid, {
            "linear": [SeparableTerm(1.0, tau, rho)], "G2": g2_ab, "E": e_minus}),
    }


def _ent_parts(r, k, sign: int, scale: float):
    """scale * f^{sign}_{ent,ab} split into G^2 and E parts."""
    gc, gs = r.gamma_c, r.gamma_s
    Gp, Gm, Ep, Em = _kernel_samples(k)
    Ediff = gc * Ep + (-gs) * Em
    g2 = [KernelTerm(-scale * gc ** 2, r.Gamma_plus, Gp * Gp),
          KernelTerm(scale * sign * gs ** 2, r.Gamma_minus, Gm * Gm)]
    e = [KernelTerm(scale * gc, r.Gamma_plus, Ediff),
         KernelTerm(scale * sign * gs, r.Gamma_minus, Ediff)]
    return g2, e


def counterpropagating_channels(p: SystemParams, pulse: PulseEnvelope,
                                kernels: ExcitationKernels | None = None) -> dict[str, TwoPhotonWavefunction]:
    """One photon from each side; outputs aa (= bb, same direction) and ab
    (opposite directions)."""
    k = kernels or excitation_kernels(p, pulse)
    r = rates(p)
    _, tau, rho = _single_photon(pulse, k, r.gamma_c, r.gamma_s)
    s2 = math.sqrt(2.0)
    g2_p, e_p = _ent_parts(r, k, +1, s2)
    g2_m, e_m = _ent_parts(r, k, -1, 2.0)
    same = {"linear": [SeparableTerm(1 / s2, tau, rho), SeparableTerm(1 / s2, rho, tau)],
            "G2": g2_p, "E": e_p}
    return {
        "aa": TwoPhotonWavefunction("aa", pulse.grid, dict(same)),
        "bb": TwoPhotonWavefunction("bb", pulse.grid, dict(same)),
        "ab": TwoPhotonWavefunction("ab", pulse.grid, {
            "linear": [SeparableTerm(1.0, tau, tau), SeparableTerm(1.0, rho, rho)],
            "G2": g2_m, "E": e_m}),
    }


# --------------------------------------------------------------------------
# probabilities

# Weight of each channel norm in the outcome probability.  An amplitude
# F(t1, t2) over distinguishable modes (a at t1, b at t2) enters the state
# as int int F a^dag b^dag; identical modes carry the 1/sqrt(2) bosonic
# prefactor.  With the channel normalisations used above this gives:
CHANNEL_WEIGHTS = {
    "standing": {"cc": 1.0, "dd": 1.0},
    "copropagating": {"aa": 1.0, "bb": 1.0, "ab": 2.0},
    "counterpropagating": {"aa": 1.0, "bb": 1.0, "ab": 1.0},
}

OUTCOMES = {
    "standing": {"cc": ("cc",), "dd": ("dd",)},
    "copropagating": {"transmit_both": ("aa",), "reflect_both": ("bb",), "split": ("ab",)},
    "counterpropagating": {"same_direction": ("aa", "bb"), "opposite": ("ab",)},
}


@dataclass
class ChannelReport:
    geometry: str
    probabilities: dict[str, float]
    linear_probabilities: dict[str, float]
    channel_norms: dict[str, float]
    nonlinear_norms: dict[str, dict[str, float]]
    conservation_residual: float
    tolerance: float
    consistent: bool

    def as_dict(self) -> dict:
        return {
            "geometry": self.geometry,
            "probabilities": self.probabilities,
            "linear_probabilities": self.linear_probabilities,
            "channel_norms": self.channel_norms,
            "nonlinear_norms": self.nonlinear_norms,
            "conservation_residual": self.conservation_residual,
            "tolerance": self.tolerance,
            "consistent": self.consistent,
        }


def _geometry_of(channels: dict) -> str:
    keys = set(channels)
    if keys == {"cc", "dd"}:
        return "standing"
    if keys == {"aa", "bb", "ab"}:
        first = channels["aa"]
        return "counterpropagating" if len(first.parts.get("linear", [])) == 2 else "copropagating"
    raise ValueError(f"unrecognised channel set {sorted(keys)}")


def channel_probabilities(channels: dict[str, TwoPhotonWavefunction], geometry: str | None = None,
                          tolerance: float = 5e-4) -> ChannelReport:
    """Outcome probabilities, linear-only probabilities and conservation check.

    ``tolerance`` is the expected quadrature error of the norms; the report
    is flagged inconsistent when the residual exceeds ten times that.
    """
    geometry = geometry or _geometry_of(channels)
    weights = CHANNEL_WEIGHTS[geometry]
    norms = {name: wf.norm2() for name, wf in channels.items()}
    lin = {name: wf.norm2(["linear"]) for name, wf in channels.items()}
    nl = {name: {part: wf.norm2([part]) for part in wf.parts if part != "linear"}
          for name, wf in channels.items()}
    probs = {o: sum(weights[c] * norms[c] for c in cs) for o, cs in OUTCOMES[geometry].items()}
    lprobs = {o: sum(weights[c] * lin[c] for c in cs) for o, cs in OUTCOMES[geometry].items()}
    residual = abs(sum(probs.values()) - 1.0)
    # inconsistent only well beyond the expected quadrature error
    return ChannelReport(geometry, probs, lprobs, norms, nl, residual, tolerance,
                         residual <= 10 * tolerance)
