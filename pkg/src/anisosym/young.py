"""Young functions: tabulated one-dimensional functions, N-dimensional catalog
specs, conjugation and the Klimov symmetrization pipeline.

A one-dimensional Young function is stored as samples on a log-spaced grid
with power-law head and power-log tail models, so that conjugation and
rearrangement stay exact on pure power laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TAIL_C = math.e
GRID_LO, GRID_HI, GRID_M = 1e-6, 1e6, 2048

# internal grid for the symmetrization pipeline: wide enough that tail
# extrapolation never matters for outputs on the default grid
_WIDE = np.concatenate([[0.0], np.geomspace(1e-40, 1e40, 6401)])
_BIG = 1e280


class YoungError(ValueError):
    """Invalid Young function or a construction that leaves the Young class."""


class BarrierUndefined(ValueError):
    """Argument outside the range of Psi, so the radial barrier does not exist."""


def omega(N: int) -> float:
    """Lebesgue measure of the unit ball in R^N."""
    return math.pi ** (N / 2) / math.gamma(1 + N / 2)


def log_grid(lo: float = GRID_LO, hi: float = GRID_HI, m: int = GRID_M) -> np.ndarray:
    """Default sample grid: 0 followed by m log-spaced points."""
    return np.concatenate([[0.0], np.geomspace(lo, hi, m)])


def _bisect_log(pred, shape, lo=1e-300, hi=1e300, iters=72):
    """Smallest x in [lo, hi] with pred(x) true, for pred monotone false -> true.

    Works on log x, vectorized over `shape`.
    """
    a = np.full(shape, math.log(lo))
    b = np.full(shape, math.log(hi))
    for _ in range(iters):
        m = 0.5 * (a + b)
        with np.errstate(all="ignore"):
            ok = pred(np.exp(m))
        b = np.where(ok, m, b)
        a = np.where(ok, a, m)
    return np.exp(b)


def _legendre(func, deriv, y):
    """Values sup_s (s*y - func(s)) for y >= 0, func convex even with func(0)=0.

    The maximizer is the smallest s with deriv(s) >= y, found by bisection.
    """
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    if not np.any(pos):
        return out
    yp = y[pos]

    def pred(s):
        d = deriv(s)
        return ~(d < yp)  # nan/inf count as reached

    s_star = _bisect_log(pred, yp.shape)
    with np.errstate(all="ignore"):
        val = s_star * yp - func(s_star)
    out[pos] = np.maximum(val, 0.0)
    return out


# ---------------------------------------------------------------------------
# one-dimensional functions


@dataclass(frozen=True, eq=False)
class OneDimYoung:
    """Even convex function on R given by samples on [0, s_M] plus tail models.

    Between positive samples the function is interpolated as a local power law
    (exact for powers); pieces touching a zero sample are linear. Below the
    first positive abscissa a power head with exponent `head_q` is used when
    there is no plateau. Beyond s_M:
        Phi(s) = Phi(s_M) (s/s_M)^q (log(e+s)/log(e+s_M))^gamma.
    `power=(coeff, exponent)` marks a closed form coeff*s^exponent, which is
    then used for every evaluation. `asymptotic=(q, gamma)` is a descriptive
    tag of the behaviour near infinity.
    """

    s: np.ndarray
    values: np.ndarray
    tail_q: float
    tail_gamma: float = 0.0
    head_q: float | None = None
    power: tuple | None = None
    asymptotic: tuple | None = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "values", v)
        if s.ndim != 1 or s.shape != v.shape or len(s) < 3:
            raise YoungError("samples must be matching 1-D arrays with at least 3 points")
        if s[0] != 0.0 or v[0] != 0.0:
            raise YoungError("a Young function needs the sample (0, 0)")
        if np.any(np.diff(s) <= 0):
            raise YoungError("abscissae must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise YoungError("values must be finite and non-negative")
        if self.check and self.power is None:
            slopes = np.diff(v) / np.diff(s)
            scale = np.maximum(np.abs(slopes[1:]), np.abs(slopes[:-1])) + 1e-300
            if np.any(np.diff(v) < -1e-12 * (v[1:] + 1e-300)):
                raise YoungError("values must be non-decreasing")
            if np.any(np.diff(slopes) < -1e-6 * scale):
                k = int(np.argmin(np.diff(slopes) / scale))
                raise YoungError(f"samples are not convex near s={s[k + 1]:.4g}")
        if v[-1] > 0 and v[-2] > 0 and self.tail_q < 1:
            raise YoungError("tail exponent below 1 is not convex")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_power(cls, coeff: float, exponent: float, grid=None) -> "OneDimYoung":
        """Closed form coeff*|s|^exponent, sampled on the default grid."""
        if coeff <= 0 or exponent < 1:
            raise YoungError("power Young function needs coeff > 0 and exponent >= 1")
        s = log_grid() if grid is None else np.asarray(grid, dtype=float)
        return cls(s, coeff * s**exponent, tail_q=exponent, head_q=exponent,
                   power=(float(coeff), float(exponent)), asymptotic=(float(exponent), 0.0))

    @classmethod
    def from_function(cls, func, grid=None, knots: Sequence[float] = (), *, tail=None,
                      head_q=None, asymptotic=None, check=True) -> "OneDimYoung":
        """Sample a vectorized callable; tail and head exponents are fitted if absent."""
        s = log_grid() if grid is None else np.asarray(grid, dtype=float)
        if len(knots):
            s = np.union1d(s, np.asarray(knots, dtype=float))
        with np.errstate(all="ignore"):
            v = np.asarray(func(s), dtype=float)
        v[0] = 0.0
        return cls.from_samples(s, v, tail=tail, head_q=head_q, asymptotic=asymptotic, check=check)

    @classmethod
    def from_samples(cls, s, values, *, tail=None, head_q=None, asymptotic=None,
                     check=True) -> "OneDimYoung":
        s = np.asarray(s, dtype=float)
        v = np.asarray(values, dtype=float)
        if s[0] > 0:
            s = np.concatenate([[0.0], s])
            v = np.concatenate([[0.0], v])
        if tail is None:
            if v[-2] > 0:
                q = math.log(v[-1] / v[-2]) / math.log(s[-1] / s[-2])
            else:
                q = 1.0
            if abs(q - 1.0) < 1e-5:
                q = 1.0  # local slope of s - O(log s) at the last sample
            tail = (max(q, 1.0), 0.0)
        if head_q is None and v[1] > 0 and v[2] > 0:
            head_q = max(math.log(v[2] / v[1]) / math.log(s[2] / s[1]), 1.0)
        return cls(s, v, tail_q=float(tail[0]), tail_gamma=float(tail[1]), head_q=head_q,
                   asymptotic=asymptotic, check=check)

    @classmethod
    def load(cls, path, **kw) -> "OneDimYoung":
        """Two-column text file (s, Phi(s)) with strictly increasing s."""
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] != 2:
            raise YoungError(f"{path}: expected two columns")
        return cls.from_samples(data[:, 0], data[:, 1], **kw)

    def save(self, path):
        np.savetxt(path, np.column_stack([self.s, self.values]), fmt="%.17g")

    def tabulated(self) -> "OneDimYoung":
        """Same samples with the closed form dropped (forces the numeric path)."""
        if self.power is None:
            return self
        c, e = self.power
        return OneDimYoung(self.s, self.values, tail_q=e, head_q=e, asymptotic=self.asymptotic)

    # -- evaluation -------------------------------------------------------

    @property
    def s0(self) -> float:
        """Largest s with Phi(s) = 0."""
        if self.power is not None:
            return 0.0
        k = int(np.argmax(self.values > 0)) if np.any(self.values > 0) else len(self.s) - 1
        return float(self.s[max(k - 1, 0)])

    def _pieces(self, x):
        s, v = self.s, self.values
        k = np.clip(np.searchsorted(s, x, side="right") - 1, 0, len(s) - 2)
        return k, s[k], s[k + 1], v[k], v[k + 1]

    def __call__(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        if self.power is not None:
            c, e = self.power
            return c * x**e
        k, s0, s1, v0, v1 = self._pieces(x)
        with np.errstate(all="ignore"):
            ll = (v0 > 0) & (v1 > 0) & (s0 > 0)
            e = np.log(v1 / v0) / np.log(s1 / s0)
            y = np.where(ll, v0 * (x / s0) ** e, v0 + (v1 - v0) * (x - s0) / (s1 - s0))
            if self.head_q is not None:
                y = np.where((k == 0) & (v1 > 0), v1 * (x / s1) ** self.head_q, y)
            sM, vM = self.s[-1], self.values[-1]
            tail = vM * (x / sM) ** self.tail_q * (np.log(TAIL_C + x) / math.log(TAIL_C + sM)) ** self.tail_gamma
            y = np.where(x > sM, tail, y)
        return np.where(x == 0, 0.0, y)

    def deriv(self, x):
        """Right derivative for x >= 0."""
        x = np.abs(np.asarray(x, dtype=float))
        if self.power is not None:
            c, e = self.power
            with np.errstate(all="ignore"):
                return np.where(x > 0, c * e * x ** (e - 1), c if e == 1 else 0.0)
        k, s0, s1, v0, v1 = self._pieces(x)
        y = self(x)
        with np.errstate(all="ignore"):
            ll = (v0 > 0) & (v1 > 0) & (s0 > 0)
            e = np.log(v1 / v0) / np.log(s1 / s0)
            d = np.where(ll, e * y / x, (v1 - v0) / (s1 - s0))
            if self.head_q is not None:
                hd = np.where(x > 0, self.head_q * y / x, v1 / s1 if self.head_q == 1 else 0.0)
                d = np.where((k == 0) & (v1 > 0), hd, d)
            sM = self.s[-1]
            L = np.log(TAIL_C + x)
            td = y * (self.tail_q / x + self.tail_gamma / ((TAIL_C + x) * L))
            d = np.where(x > sM, td, d)
        return d

    def inverse(self, r):
        """Left inverse inf{s >= 0 : Phi(s) >= r}; 0 for r <= 0."""
        r = np.asarray(r, dtype=float)
        if self.power is not None:
            c, e = self.power
            return np.where(r > 0, (np.maximum(r, 0) / c) ** (1 / e), 0.0)
        out = np.zeros_like(r)
        pos = r > 0
        if np.any(pos):
            rp = r[pos]
            out[pos] = _bisect_log(lambda s: ~(self(s) < rp), rp.shape)
        return out

    def beyond_table(self, r):
        """Flags queries of the inverse that fall in the extrapolated tail."""
        return np.asarray(r, dtype=float) > self.values[-1]

    @property
    def superlinear(self) -> bool:
        q = self.power[1] if self.power is not None else self.tail_q
        g = 0.0 if self.power is not None else self.tail_gamma
        return q > 1 or (q == 1 and g > 0)

    def conjugate(self, grid=None) -> "OneDimYoung":
        """Young conjugate sup_s (s y - Phi(s)), tabulated on `grid`."""
        if self.power is not None:
            c, e = self.power
            if e <= 1:
                raise YoungError("conjugate not a Young function: linear growth")
            ep = e / (e - 1)
            cp = 1.0 / (ep * (c * e) ** (ep / e))
            return OneDimYoung.from_power(cp, ep, grid)
        if not self.superlinear:
            raise YoungError("conjugate not a Young function: growth is not superlinear")
        y = log_grid() if grid is None else np.asarray(grid, dtype=float)
        vals = _legendre(self, self.deriv, y)
        keep = np.isfinite(vals) & (vals < _BIG)
        keep[:3] = True
        y, vals = y[keep], vals[keep]
        q, g = self.tail_q, self.tail_gamma
        if q > 1:
            tail = (q / (q - 1), -g / (q - 1))
        else:
            tail = None  # log-superlinear: fit from samples
        if self.s0 > 0:
            head = 1.0
        elif self.head_q is not None and self.head_q > 1:
            head = self.head_q / (self.head_q - 1)
        else:
            head = None
        asym = None
        if self.asymptotic is not None and self.asymptotic[0] > 1:
            aq, ag = self.asymptotic
            asym = (aq / (aq - 1), -ag / (aq - 1))
        return OneDimYoung.from_samples(y, vals, tail=tail, head_q=head, asymptotic=asym, check=False)


def normalize_near_zero(A: OneDimYoung, knot: float = 1.0) -> OneDimYoung:
    """Replace A on [0, knot] by its chord from the origin (keeps convexity)."""
    slope = float(A(knot)) / knot
    s = A.s
    v = np.where(s < knot, slope * s, A(s))
    s = np.union1d(s, [knot])
    v = np.where(s < knot, slope * s, A(s))
    return OneDimYoung(s, v, tail_q=A.tail_q if A.power is None else A.power[1],
                       tail_gamma=A.tail_gamma if A.power is None else 0.0,
                       head_q=1.0, asymptotic=A.asymptotic, check=False)


@dataclass(frozen=True)
class PsiMap:
    """Psi(s) = Phi(s)/s and its left inverse restricted to [s0, inf)."""

    phi: OneDimYoung

    def __post_init__(self):
        ph = self.phi
        if ph.power is not None:
            if ph.power[1] <= 1:
                raise YoungError("Phi(s)/s does not vanish at 0")
            return
        if ph.s0 == 0.0 and (ph.head_q is None or ph.head_q <= 1):
            lim = ph.values[1] / ph.s[1]
            if lim > 1e-6 * (ph.values[-1] / ph.s[-1]):
                raise YoungError("Phi(s)/s does not tend to 0 as s -> 0")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(all="ignore"):
            return np.where(s > 0, self.phi(s) / s, 0.0)

    @property
    def sup(self) -> float:
        ph = self.phi
        if ph.superlinear:
            return math.inf
        return float(ph.values[-1] / ph.s[-1])

    def inverse(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r >= self.sup):
            bad = float(np.max(r))
            raise BarrierUndefined(f"barrier undefined: Psi argument {bad:.6g} reaches sup Psi = {self.sup:.6g}")
        ph = self.phi
        if ph.power is not None:
            c, e = ph.power
            return (np.maximum(r, 0) / c) ** (1 / (e - 1))
        s0 = ph.s0
        out = np.full(r.shape, s0)
        pos = r > 0
        if np.any(pos):
            rp = r[pos]
            out[pos] = _bisect_log(lambda s: ~(self(s) < rp), rp.shape, lo=max(s0, 1e-300))
        return out


def psi(phi: OneDimYoung):
    """Return (Psi, Psi_inverse) for a one-dimensional Young function."""
    m = PsiMap(phi)
    return m, m.inverse


@dataclass(frozen=True)
class ConjugateInverse:
    """r -> inverse of the Young conjugate of Phi, as a monotone left inverse."""

    phi: OneDimYoung
    conj: OneDimYoung

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.phi.power is not None:
            c, e = self.phi.power
            ep = e / (e - 1)
            return (ep * np.maximum(r, 0)) ** (1 / ep) * (e * c) ** (1 / e)
        return self.conj.inverse(r)

    def extrapolated(self, r):
        return self.conj.beyond_table(r)


def conjugate_inverse(phi: OneDimYoung) -> ConjugateInverse:
    return ConjugateInverse(phi, phi.conjugate())


# ---------------------------------------------------------------------------
# analytic one-dimensional factors and N-dimensional specs


@dataclass(frozen=True)
class PowerLog:
    """Factor coeff * |s|^p * log(c + |s|)^alpha."""

    coeff: float = 1.0
    p: float = 2.0
    alpha: float = 0.0
    c: float = math.e

    def __call__(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        with np.errstate(all="ignore"):
            return self.coeff * s**self.p * np.log(self.c + s) ** self.alpha

    def deriv(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        L = np.log(self.c + s)
        with np.errstate(all="ignore"):
            d = self.coeff * (self.p * s ** (self.p - 1) * L**self.alpha
                              + self.alpha * s**self.p * L ** (self.alpha - 1) / (self.c + s))
        return np.where(s > 0, d, self.coeff * math.log(self.c) ** self.alpha if self.p == 1 else 0.0)

    @property
    def superlinear(self) -> bool:
        return self.p > 1 or (self.p == 1 and self.alpha > 0)

    def is_convex(self) -> bool:
        s = np.concatenate([np.linspace(0, 1, 201), np.geomspace(1, 1e8, 400)[1:]])
        d = self.deriv(s)
        return bool(np.all(np.diff(d) >= -1e-9 * (np.abs(d[1:]) + 1e-12)))

    def conjugate_table(self, grid=None) -> OneDimYoung:
        y = _WIDE if grid is None else grid
        vals = _legendre(self, self.deriv, y)
        keep = np.isfinite(vals) & (vals < _BIG)
        keep[:3] = True
        if self.p > 1:
            tail = (self.p / (self.p - 1), -self.alpha / (self.p - 1))
            head = self.p / (self.p - 1)
        else:
            tail, head = None, 1.0
        return OneDimYoung.from_samples(y[keep], vals[keep], tail=tail, head_q=head, check=False)

    def table(self, grid=None) -> OneDimYoung:
        s = _WIDE if grid is None else grid
        return OneDimYoung.from_samples(s, self(s), tail=(self.p, self.alpha), head_q=self.p, check=False)


class YoungSpec:
    """N-dimensional Young function."""

    dim: int

    def __call__(self, xi) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def factors(self):
        """One-dimensional factors if the function is a sum of them, else None."""
        return None

    def asymptotic(self):
        return None


def _as_tuple(x):
    return tuple(float(v) for v in np.atleast_1d(x))


@dataclass(frozen=True)
class PowerSum(YoungSpec):
    """Sum of lam_i |xi_i|^{p_i}."""

    p: tuple
    lam: tuple

    def __post_init__(self):
        object.__setattr__(self, "p", _as_tuple(self.p))
        object.__setattr__(self, "lam", _as_tuple(self.lam))
        if len(self.p) < 2:
            raise YoungError("need N >= 2 exponents")
        if len(self.lam) != len(self.p):
            raise YoungError(f"exponent list has {len(self.p)} entries but weight list has {len(self.lam)}")
        if any(pi < 1 for pi in self.p):
            raise YoungError("exponents must be >= 1")
        if any(l <= 0 for l in self.lam):
            raise YoungError("weights must be positive")
        if harmonic_mean(self.p) <= 1:
            raise YoungError("harmonic mean of the exponents must exceed 1")

    @property
    def dim(self):
        return len(self.p)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return sum(l * np.abs(xi[..., i]) ** q for i, (q, l) in enumerate(zip(self.p, self.lam)))

    def factors(self):
        return [PowerLog(l, q) for q, l in zip(self.p, self.lam)]

    def asymptotic(self):
        return (harmonic_mean(self.p), 0.0)


@dataclass(frozen=True)
class LogPerturbedSum(YoungSpec):
    """Sum of |xi_i|^{p_i} log(c + |xi_i|)^{alpha_i}."""

    p: tuple
    alpha: tuple
    c: float = math.e

    def __post_init__(self):
        object.__setattr__(self, "p", _as_tuple(self.p))
        object.__setattr__(self, "alpha", _as_tuple(self.alpha))
        if len(self.p) < 2 or len(self.alpha) != len(self.p):
            raise YoungError("p and alpha must have the same length N >= 2")
        if self.c < math.e:
            raise YoungError("shift constant c must be >= e")
        for q, a in zip(self.p, self.alpha):
            if not (q > 1 or (q == 1 and a >= 0)):
                raise YoungError(f"factor (p={q}, alpha={a}) needs p > 1, or p = 1 with alpha >= 0")
        if all(q == 1 and a == 0 for q, a in zip(self.p, self.alpha)):
            raise YoungError("all factors linear (p=1, alpha=0): not a Young function")
        for f in self.factors():
            if not f.is_convex():
                raise YoungError(f"factor p={f.p}, alpha={f.alpha} is not convex for c={self.c}; increase c")

    @property
    def dim(self):
        return len(self.p)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return sum(f(xi[..., i]) for i, f in enumerate(self.factors()))

    def factors(self):
        return [PowerLog(1.0, q, a, self.c) for q, a in zip(self.p, self.alpha)]

    def asymptotic(self):
        N = self.dim
        pb = harmonic_mean(self.p)
        return (pb, pb / N * sum(a / q for q, a in zip(self.p, self.alpha)))


@dataclass(frozen=True)
class TwoDimCoupled(YoungSpec):
    """|xi_1 - xi_2|^alpha + |xi_1|^beta log(c + |xi_1|)^delta on R^2."""

    alpha: float
    beta: float
    delta: float = 0.0
    c: float = math.e

    def __post_init__(self):
        if self.alpha <= 1 or self.beta <= 1:
            raise YoungError("alpha and beta must exceed 1")
        if self.c < math.e:
            raise YoungError("shift constant c must be >= e")
        if not PowerLog(1.0, self.beta, self.delta, self.c).is_convex():
            raise YoungError("log factor not convex; increase c")

    dim = 2

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        a, b = xi[..., 0], xi[..., 1]
        return np.abs(a - b) ** self.alpha + PowerLog(1.0, self.beta, self.delta, self.c)(a)

    def linear_image(self) -> "LinearImage":
        """Same function written as a separable sum composed with a unimodular map."""
        base = Separable((PowerLog(1.0, self.beta, self.delta, self.c), PowerLog(1.0, self.alpha)))
        return LinearImage(base, ((1.0, 0.0), (1.0, -1.0)))

    def asymptotic(self):
        a, b = self.alpha, self.beta
        return (2 * a * b / (a + b), a * self.delta / (a + b))


@dataclass(frozen=True)
class RadialOneDim(YoungSpec):
    """A(|xi|) on R^dim."""

    A: OneDimYoung
    dim: int = 2

    def __call__(self, xi):
        return self.A(np.linalg.norm(np.asarray(xi, dtype=float), axis=-1))


@dataclass(frozen=True)
class Separable(YoungSpec):
    """Sum of one-dimensional factors, one per coordinate (tabulated or analytic)."""

    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if len(self.parts) < 1:
            raise YoungError("need at least one factor")

    @property
    def dim(self):
        return len(self.parts)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return sum(f(xi[..., i]) for i, f in enumerate(self.parts))

    def factors(self):
        return list(self.parts)


def Tabulated(tables: Sequence[OneDimYoung]) -> Separable:
    """Separable spec built from one tabulated function per coordinate."""
    if len(tables) < 2:
        raise YoungError("need N >= 2 tabulated factors")
    return Separable(tuple(tables))


@dataclass(frozen=True)
class LinearImage(YoungSpec):
    """Phi(xi) = base(M xi) for an invertible matrix M."""

    base: YoungSpec
    matrix: tuple

    @property
    def dim(self):
        return self.base.dim

    @property
    def M(self):
        return np.asarray(self.matrix, dtype=float)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.base(xi @ self.M.T)


def harmonic_mean(p) -> float:
    p = np.asarray(p, dtype=float)
    return len(p) / float(np.sum(1.0 / p))


def eval(spec: YoungSpec, xi) -> np.ndarray:  # noqa: A001 - mirrors the operation name
    """Evaluate an N-dimensional Young function at xi (shape (..., N))."""
    xi = np.asarray(xi, dtype=float)
    if not np.all(np.isfinite(xi)):
        raise YoungError("non-finite argument")
    if xi.shape[-1] != spec.dim:
        raise YoungError(f"argument has {xi.shape[-1]} components, spec has dimension {spec.dim}")
    return spec(xi)


def conjugate(f):
    """Young conjugate of a one-dimensional function or an N-dimensional spec."""
    if isinstance(f, OneDimYoung):
        return f.conjugate()
    if isinstance(f, PowerSum):
        if any(q <= 1 for q in f.p):
            raise YoungError("conjugate not a Young function: a linear direction")
        pp = tuple(q / (q - 1) for q in f.p)
        mu = tuple(1.0 / (qq * (l * q) ** (qq / q)) for q, qq, l in zip(f.p, pp, f.lam))
        return PowerSum(pp, mu)
    if isinstance(f, RadialOneDim):
        return RadialOneDim(f.A.conjugate(), f.dim)
    if isinstance(f, TwoDimCoupled):
        return conjugate(f.linear_image())
    if isinstance(f, LinearImage):
        return LinearImage(conjugate(f.base), tuple(map(tuple, np.linalg.inv(f.M).T)))
    facs = f.factors()
    if facs is not None:
        tabs = [g.conjugate() if isinstance(g, OneDimYoung) else g.conjugate_table(log_grid()) for g in facs]
        return Separable(tuple(tabs))
    raise YoungError("general non-separable conjugation is only supported in two dimensions (grid2d_conjugate)")


# ---------------------------------------------------------------------------
# Klimov symmetrization


def power_sum_klimov(p, lam, N: int | None = None):
    """Harmonic mean pbar and the constant Lambda with Phi_diamond(s) = Lambda s^pbar."""
    p = np.asarray(p, dtype=float)
    lam = np.asarray(lam, dtype=float)
    N = len(p) if N is None else N
    if len(p) != N or len(lam) != N:
        raise YoungError("exponent and weight lists must have N entries")
    if np.any(p < 1) or np.any(lam <= 0):
        raise YoungError("need p_i >= 1 and lambda_i > 0")
    pb = harmonic_mean(p)
    if pb <= 1:
        raise YoungError("harmonic mean <= 1: Psi is degenerate")
    pbp = pb / (pb - 1)
    log_prod = 0.0
    for q in p:
        if q == 1:
            continue  # p^{1/p} (p')^{1/p'} Gamma(1+1/p') -> 1 as p -> 1
        qq = q / (q - 1)
        log_prod += math.log(q) / q + math.log(qq) / qq + math.lgamma(1 + 1 / qq)
    log_inner = log_prod - math.log(omega(N)) - math.lgamma(1 + N / pbp)
    log_lam = (pb / N) * (log_inner + float(np.sum(np.log(lam) / p)))
    log_pre = pb * math.log(2) + (pb - 1) * math.log(pb - 1) - pb * math.log(pb)
    return pb, math.exp(log_pre + log_lam)


def _interp_power(x, xs, ys):
    """Log-log interpolation of a positive increasing table with power extrapolation."""
    x = np.asarray(x, dtype=float)
    lx, ly = np.log(xs), np.log(ys)
    with np.errstate(all="ignore"):
        lq = np.log(np.where(x > 0, x, 1.0))
        k = np.clip(np.searchsorted(lx, lq) - 1, 0, len(lx) - 2)
        e = (ly[k + 1] - ly[k]) / (lx[k + 1] - lx[k])
        y = np.exp(ly[k] + e * (lq - lx[k]))
    return np.where(x > 0, y, 0.0)


_GL_Z, _GL_W = np.polynomial.legendre.leggauss(96)
_GL_Z = 0.5 * (_GL_Z + 1)
_GL_W = 0.5 * _GL_W
_X = 1 - (1 - _GL_Z) ** 4
_DX = _GL_W * 4 * (1 - _GL_Z) ** 3


def sublevel_measure(tables: Sequence[OneDimYoung], t):
    """|{y in R^N : sum_k A_k(y_k) < t}| for even one-dimensional A_k.

    Built one coordinate at a time: V_k(t) = 2 int_0^{Y_k(t)} V_{k-1}(t - A_k(y)) dy,
    with Y_k the inverse of A_k, on a log grid of levels t.
    """
    t = np.asarray(t, dtype=float)
    V = 2 * tables[0].inverse(t)
    for A in tables[1:]:
        Y = A.inverse(t)
        y = Y[:, None] * _X[None, :]
        tau = t[:, None] - A(y)
        prev = _interp_power(np.maximum(tau, 0), t, V)
        V = 2 * Y * (prev @ _DX)
    return V


def _radial_rearrangement(tables, N, t=None):
    """Symmetric increasing rearrangement of sum_k A_k as a table (r, value)."""
    if t is None:
        lo = max(float(A.values[min(2, len(A.values) - 1)]) for A in tables)
        hi = min(float(A.values[-1]) for A in tables)
        lo = max(lo, 1e-250)
        t = np.geomspace(lo, hi, 6401)
    V = sublevel_measure(tables, t)
    ok = np.isfinite(V) & (V > 0)
    t, V = t[ok], V[ok]
    r = (V / omega(N)) ** (1.0 / N)
    keep = np.concatenate([[True], np.diff(r) > 0])
    return r[keep], t[keep]


def _conj_tables(spec):
    facs = spec.factors()
    if facs is None:
        return None
    out = []
    for f in facs:
        if not f.superlinear:
            raise YoungError("conjugate not a Young function: a factor grows linearly")
        out.append(f.conjugate(_WIDE) if isinstance(f, OneDimYoung) else f.conjugate_table())
    return out


def klimov_symmetrize(spec: YoungSpec, *, numeric: bool = False, grid=None) -> OneDimYoung:
    """Klimov symmetrization: conjugate, rearrange symmetrically, conjugate again.

    PowerSum uses the closed form unless `numeric` is set. TwoDimCoupled is
    reduced to a separable sum through a unimodular linear map, which leaves
    sublevel-set measures unchanged.
    """
    if isinstance(spec, PowerSum) and not numeric:
        pb, lam = power_sum_klimov(spec.p, spec.lam, spec.dim)
        return OneDimYoung.from_power(lam, pb, grid)
    if isinstance(spec, RadialOneDim):
        return spec.A
    asym = spec.asymptotic()
    scale = 1.0
    if isinstance(spec, TwoDimCoupled):
        spec = spec.linear_image()
    if isinstance(spec, LinearImage):
        scale = abs(float(np.linalg.det(spec.M))) ** (1.0 / spec.dim)
        spec = spec.base
    tables = _conj_tables(spec)
    if tables is None:
        raise YoungError("numeric symmetrization needs a separable spec (use grid2d_klimov in 2-D)")
    r, t = _radial_rearrangement(tables, spec.dim)
    star = OneDimYoung.from_samples(r, t, check=False)
    g = log_grid() if grid is None else np.asarray(grid, dtype=float)
    out = star.conjugate(g * scale)
    tail = (asym[0], asym[1]) if asym is not None else (out.tail_q, out.tail_gamma)
    return OneDimYoung.from_samples(g, out.values, tail=tail, head_q=out.head_q, asymptotic=asym, check=False)


def increasing_rearrangement(spec: YoungSpec, grid=None) -> OneDimYoung:
    """Symmetric increasing rearrangement Phi_star of a separable Phi itself."""
    facs = spec.factors()
    if facs is None:
        raise YoungError("needs a separable spec")
    tables = [f if isinstance(f, OneDimYoung) else f.table() for f in facs]
    r, t = _radial_rearrangement(tables, spec.dim)
    star = OneDimYoung.from_samples(r, t, check=False)
    g = log_grid() if grid is None else np.asarray(grid, dtype=float)
    return OneDimYoung.from_samples(g, star(g), tail=(star.tail_q, 0.0), head_q=star.head_q, check=False)


def equivalence_constants(spec: YoungSpec, s=None):
    """Measured K1 <= K2 with Phi_star(K1 s) <= Phi_diamond(s) <= Phi_star(K2 s)."""
    if s is None:
        s = np.geomspace(1e-3, 1e3, 121)
    dia = klimov_symmetrize(spec)
    star = increasing_rearrangement(spec)
    k = star.inverse(dia(s)) / s
    return float(np.min(k)), float(np.max(k))


def grid2d_conjugate(func, L: float, n: int = 257, Y: float | None = None, m: int = 401):
    """Discrete Legendre transform of a 2-D function sampled on [-L, L]^2.

    Computed as two nested one-dimensional maximizations and returned on the
    slope grid [-Y, Y]^2 with m points per axis. Y should be small enough that
    maximizers stay inside the sample box.
    """
    x = np.linspace(-L, L, n)
    Y = L / 4 if Y is None else Y
    y = np.linspace(-Y, Y, m)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    F = func(np.stack([X1, X2], -1))
    # inner: G[i1, j2] = max_i2 x_i2 y_j2 - F[i1, i2]
    G = np.empty((n, m))
    for a in range(0, n, 32):
        G[a:a + 32] = np.max(x[None, :, None] * y[None, None, :] - F[a:a + 32, :, None], axis=1)
    # outer: H[j1, j2] = max_i1 x_i1 y_j1 + G[i1, j2]
    H = np.empty((m, m))
    for a in range(0, m, 32):
        H[a:a + 32] = np.max(x[:, None, None] * y[None, a:a + 32, None] + G[:, None, :], axis=0)
    return y, H


def grid2d_klimov(func, L: float = 4.0, n: int = 513, Y: float | None = None, m: int = 401,
                  grid=None) -> OneDimYoung:
    """Klimov symmetrization of a general 2-D Young function on a truncated grid.

    Sublevel sets of the conjugate are measured by cell counting inside the
    slope box; only levels whose sublevel set stays inside the box are used,
    so the output is trustworthy only where the maximizing radius is below
    the largest such sublevel radius.
    """
    y, H = grid2d_conjugate(func, L, n, Y, m)
    dy = y[1] - y[0]
    edge = min(H[0, :].min(), H[-1, :].min(), H[:, 0].min(), H[:, -1].min())
    vals = np.sort(H.ravel())
    levels = np.unique(vals[(vals > 0) & (vals < edge)])
    # midpoint of strict and non-strict counts removes the lattice bias at node levels
    meas = 0.5 * (np.searchsorted(vals, levels, side="left") + np.searchsorted(vals, levels, side="right")) * dy * dy
    ok = meas > 0
    r = np.sqrt(meas[ok] / math.pi)
    t = levels[ok]
    keep = np.concatenate([[True], np.diff(r) > 0])
    r, t = r[keep], t[keep]
    g = np.geomspace(1e-2, 1e2, 401) if grid is None else np.asarray(grid, dtype=float)
    out = np.maximum(np.max(g[:, None] * r[None, :] - t[None, :], axis=1), 0.0)
    return OneDimYoung.from_samples(np.concatenate([[0.0], g]), np.concatenate([[0.0], out]), check=False)


# ---------------------------------------------------------------------------
# Sobolev regime


@dataclass(frozen=True)
class SobolevReport:
    regime: str  # "bounded" or "divergent"
    cond1: bool
    H_r: np.ndarray | None = None
    H_values: np.ndarray | None = None
    phi_N: OneDimYoung | None = None
    normalized: bool = False

    def H(self, r):
        return np.interp(r, self.H_r, self.H_values)


def _growth(phi: OneDimYoung):
    if phi.power is not None:
        return phi.power[1], 0.0, phi.power[1]
    head = phi.head_q if phi.head_q is not None else 1.0
    return phi.tail_q, phi.tail_gamma, head


def sobolev_classifier(phi: OneDimYoung, N: int, knot: float | None = None) -> SobolevReport:
    """Classify by convergence of int^inf (s/Phi(s))^{1/(N-1)} ds.

    In the divergent regime returns H(r) = (int_0^r (s/Phi)^{1/(N-1)} ds)^{1/N'}
    and Phi_N = Phi o H^{-1}. If the integral at 0 diverges, `knot` replaces Phi
    near 0 by its chord; without a knot that case is an error.
    """
    if N < 2:
        raise YoungError("N >= 2 required")
    q, g, q0 = _growth(phi)
    tol = 1e-9
    if q > N + tol or (abs(q - N) <= tol and g > N - 1):
        regime = "bounded"
    else:
        regime = "divergent"
    has_plateau = phi.power is None and phi.s0 > 0
    cond1 = has_plateau or q0 < N - tol
    if regime == "bounded":
        return SobolevReport(regime, cond1)
    normalized = False
    if not cond1:
        if knot is None:
            raise YoungError("integral at 0 diverges: renormalize Phi_diamond near 0 required")
        phi = normalize_near_zero(phi, knot)
        normalized = True
    Np = N / (N - 1)
    if phi.power is not None:
        c, e = phi.power
        kap = (1 - e) / (N - 1)
        s = log_grid()
        I = c ** (-1 / (N - 1)) * s ** (kap + 1) / (kap + 1)
    else:
        s = phi.s
        with np.errstate(all="ignore"):
            w = np.where(s > 0, (s / phi(s)) ** (1 / (N - 1)), 0.0)
        # piecewise power integration between samples, analytic head
        w1, s1 = w[1], s[1]
        head = phi.head_q if phi.head_q is not None else 1.0
        if phi.s0 > 0:
            first = 0.0
            w = np.where(s <= phi.s0, 0.0, w)
        else:
            kap = (1 - head) / (N - 1)
            first = w1 * s1 / (kap + 1)
        seg = _power_segments(s[1:], w[1:])
        I = np.concatenate([[0.0], first + np.concatenate([[0.0], np.cumsum(seg)])])
    H = I ** (1 / Np)
    ok = H > 0
    t = log_grid()
    t = t[t <= H[ok][-1]]  # H may grow too slowly for power extrapolation of its inverse
    Hinv = _interp_power(t, H[ok], s[ok])
    phiN = OneDimYoung.from_samples(t, phi(Hinv), check=False)
    return SobolevReport(regime, cond1, s, H, phiN, normalized)


def _power_segments(x, y):
    """Integrals over [x_k, x_{k+1}] of the piecewise power (or linear) interpolant."""
    x0, x1, y0, y1 = x[:-1], x[1:], y[:-1], y[1:]
    with np.errstate(all="ignore"):
        e = np.log(y1 / y0) / np.log(x1 / x0)
        pw = np.where(np.abs(e + 1) > 1e-10,
                      y0 * x0 * ((x1 / x0) ** (e + 1) - 1) / (e + 1),
                      y0 * x0 * np.log(x1 / x0))
    lin = 0.5 * (y0 + y1) * (x1 - x0)
    ok = (y0 > 0) & (y1 > 0) & (x0 > 0) & np.isfinite(pw)
    return np.where(ok, pw, lin)
