"""Rearrangement-invariant norms of step profiles and a Hardy-inequality checker.

All norms take the decreasing rearrangement of the profile first, so any
StepProfile (monotone or not) is accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre

from .profiles import StepProfile
from .young import OneDimYoung, YoungError, _power_segments, log_grid

__all__ = [
    "NormSpec", "NormError", "lorentz_norm", "lorentz_zygmund_norm", "luxemburg_norm",
    "orlicz_lorentz_norm", "OrliczLorentzB", "orlicz_lorentz_B", "hardy_check", "HardyReport",
    "evaluate",
]

INF = math.inf


class NormError(ValueError):
    pass


def _inf(x) -> float:
    if isinstance(x, str):
        if x.lower() in ("inf", "infinity", "+inf"):
            return INF
        return float(x)
    return float(x)


def lz_admissible(p: float, q: float, alpha: float, beta: float = 0.0) -> bool:
    """Non-triviality of L^{p,q}(log L)^alpha (log log L)^beta."""
    if p <= 0 or q <= 0:
        return False
    if not math.isinf(p):
        return True
    if math.isinf(q):
        return alpha < 0 or (alpha == 0 and beta <= 0)
    return alpha + 1 / q < 0 or (alpha + 1 / q == 0 and beta * q < -1)


@dataclass(frozen=True)
class NormSpec:
    """kind in {lorentz, lorentz_zygmund, orlicz, orlicz_lorentz}."""

    kind: str
    p: float = 2.0
    q: float = 2.0
    alpha: float = 0.0
    beta: float = 0.0
    A: OneDimYoung | None = field(default=None, repr=False)
    N: int = 2

    def __post_init__(self):
        object.__setattr__(self, "p", _inf(self.p))
        object.__setattr__(self, "q", _inf(self.q))
        if self.kind == "lorentz":
            if not (1 < self.p <= INF and 0 < self.q <= INF):
                raise NormError("Lorentz norm needs 1 < p <= inf and 0 < q <= inf")
        elif self.kind == "lorentz_zygmund":
            if not lz_admissible(self.p, self.q, self.alpha, self.beta):
                raise NormError(f"L^(p={self.p},q={self.q})(log L)^{self.alpha} is trivial: with p = inf "
                                "require q < inf and alpha + 1/q < 0, or q = inf and alpha <= 0")
        elif self.kind in ("orlicz", "orlicz_lorentz"):
            if self.A is None:
                raise NormError(f"{self.kind} norm needs a Young function A")
            if self.kind == "orlicz_lorentz" and self.N < 2:
                raise NormError("N must be at least 2")
        else:
            raise NormError(f"unknown norm kind {self.kind!r}")

    def __call__(self, f: StepProfile, measure: float | None = None) -> float:
        return evaluate(self, f, measure)


def evaluate(spec: NormSpec, f: StepProfile, measure: float | None = None) -> float:
    if spec.kind == "lorentz":
        return lorentz_norm(f, spec.p, spec.q)
    if spec.kind == "lorentz_zygmund":
        return lorentz_zygmund_norm(f, spec.p, spec.q, spec.alpha, spec.beta, measure)
    if spec.kind == "orlicz":
        return luxemburg_norm(f, spec.A)
    return orlicz_lorentz_norm(f, spec.A, spec.N, measure)


def _pieces(f: StepProfile):
    g = f.rearranged()
    keep = g.values > 0
    return g.breaks[:-1][keep], g.breaks[1:][keep], g.values[keep]


# ---------------------------------------------------------------------------
# Lorentz and Lorentz-Zygmund


def lorentz_norm(f: StepProfile, p: float, q: float) -> float:
    """(int [s^{1/p} f*(s)]^q ds/s)^{1/q}, exact on step pieces; +inf when divergent."""
    p, q = _inf(p), _inf(q)
    a, b, c = _pieces(f)
    if len(c) == 0:
        return 0.0
    if math.isinf(q):
        w = np.ones_like(b) if math.isinf(p) else b ** (1 / p)
        return float(np.max(c * w))
    if math.isinf(p):
        return INF  # int ds/s diverges at 0
    e = q / p
    total = np.sum(c**q * (b**e - a**e)) / e
    return float(total ** (1 / q))


# Gauss-Legendre nodes for the log-weighted pieces
_GLX, _GLW = roots_legendre(48)


def _lz_weight(x, p, alpha, beta, measure):
    """Weight in the variable x = log(|Omega|/s), including the Jacobian ds/s = dx."""
    w = (1 + x) ** alpha
    if beta:
        w = w * (1 + np.log1p(x)) ** beta
    if math.isinf(p):
        return w
    return measure ** (1 / p) * np.exp(-x / p) * w


def lorentz_zygmund_norm(f: StepProfile, p: float, q: float, alpha: float, beta: float = 0.0,
                         measure: float | None = None) -> float:
    """Norm with weight s^{1/p} (1 + log(|Omega|/s))^alpha (1 + log(1 + log(|Omega|/s)))^beta."""
    p, q = _inf(p), _inf(q)
    if not lz_admissible(p, q, alpha, beta):
        raise NormError("inadmissible Lorentz-Zygmund parameters")
    measure = f.measure if measure is None else float(measure)
    if alpha == 0 and beta == 0:
        return lorentz_norm(f, p, q)
    a, b, c = _pieces(f)
    if len(c) == 0:
        return 0.0
    xa = np.log(measure / np.maximum(a, 1e-300))
    xa[a == 0] = INF
    xb = np.log(measure / b)
    if math.isinf(q):
        best = 0.0
        for lo, hi, ck in zip(xb, xa, c):
            top = hi if math.isfinite(hi) else lo + 60.0
            xs = [lo, top]
            if beta == 0 and alpha > 0 and not math.isinf(p):
                xs.append(min(max(alpha * p - 1, lo), top))  # stationary point of the weight
            elif beta != 0:
                xs.extend(np.linspace(lo, top, 257))
            wt = max(float(_lz_weight(np.float64(x), p, alpha, beta, measure)) for x in xs)
            best = max(best, ck * wt)
        return best
    total = 0.0
    for lo, hi, ck in zip(xb, xa, c):
        def g(x):
            return _lz_weight(x, p, alpha, beta, measure) ** q

        if math.isinf(hi) and math.isinf(p):
            # slow algebraic decay: integrate in w = log(1 + x)
            val, _ = quad(lambda w: np.exp(w * (alpha * q + 1)) * (1 + w) ** (beta * q), math.log1p(lo), INF,
                          epsabs=0, epsrel=1e-12, limit=400)
        elif math.isinf(hi) or hi - lo > 4:
            val, _ = quad(g, lo, hi, epsabs=0, epsrel=1e-12, limit=400)
        else:
            xm = 0.5 * (hi - lo) * _GLX + 0.5 * (hi + lo)
            val = 0.5 * (hi - lo) * np.dot(_GLW, g(xm))
        total += ck**q * val
    if not math.isfinite(total):
        return INF
    return float(total ** (1 / q))


# ---------------------------------------------------------------------------
# Orlicz (Luxemburg)


def _bisect_norm(modular, scale: float, rtol: float = 1e-10) -> float:
    """inf{k > 0 : modular(k) <= 1} for a non-increasing modular."""
    lo = hi = scale
    while modular(hi) > 1:
        hi *= 2
    while modular(lo) <= 1 and lo > 1e-300:
        lo /= 2
    while (hi - lo) > rtol * hi:
        mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
        if modular(mid) <= 1:
            hi = mid
        else:
            lo = mid
    return hi


def luxemburg_norm(f: StepProfile, A: OneDimYoung) -> float:
    """inf{k > 0 : int A(|f|/k) <= 1} by bisection to relative width 1e-10."""
    a, b, c = _pieces(f)
    if len(c) == 0:
        return 0.0
    w = b - a

    def modular(k):
        return float(np.sum(w * A(c / k)))

    return _bisect_norm(modular, float(c[0]))


# ---------------------------------------------------------------------------
# Orlicz-Lorentz X_{A,N}


def _tail_integral(x0, y0, kappa):
    """int_{x0}^inf y0 (x/x0)^kappa dx for kappa < -1."""
    if kappa >= -1:
        return INF
    return -y0 * x0 / (kappa + 1)


def _local_exponent(x, y):
    return math.log(y[-1] / y[-2]) / math.log(x[-1] / x[-2])


@dataclass(frozen=True, eq=False)
class OrliczLorentzB:
    """B of the Orlicz-Lorentz construction, with J(t) = int_t^inf B(tau) tau^{-N-1} dtau."""

    y: np.ndarray  # abscissae of B
    B: np.ndarray
    N: int
    J: np.ndarray  # J on y
    head: float  # B ~ B[1] (y/y[1])^head below y[1]
    tail: float  # B ~ B[-1] (y/y[-1])^tail beyond y[-1]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            ly, lB = np.log(self.y[1:]), np.log(self.B[1:])
            mid = np.exp(np.interp(np.log(t), ly, lB))
            lo = self.B[1] * (t / self.y[1]) ** self.head
            hi = self.B[-1] * (t / self.y[-1]) ** self.tail
        return np.where(t <= 0, 0.0, np.where(t < self.y[1], lo, np.where(t > self.y[-1], hi, mid)))

    def Jfun(self, t):
        """int_t^inf B(tau) tau^{-N-1} dtau, +inf at t = 0 when divergent."""
        t = np.asarray(t, dtype=float)
        N = self.N
        y, J = self.y[1:], self.J[1:]
        with np.errstate(all="ignore"):
            k = np.clip(np.searchsorted(y, t, side="right") - 1, 0, len(y) - 2)
            # partial piece from t to y[k+1] with B as a local power
            y0, y1 = y[k], y[k + 1]
            B0, B1 = self.B[1:][k], self.B[1:][k + 1]
            e = np.log(B1 / B0) / np.log(y1 / y0) - N - 1
            g0 = self(t) * t ** (-N - 1)
            part = np.where(np.abs(e + 1) > 1e-12, g0 * t * ((y1 / t) ** (e + 1) - 1) / (e + 1),
                            g0 * t * np.log(y1 / t))
            mid = J[k + 1] + part
            eh = self.head - N - 1
            gh = self.B[1] * self.y[1] ** (-self.head)
            if eh != -1:
                lo = J[0] + gh * (self.y[1] ** (eh + 1) - t ** (eh + 1)) / (eh + 1)
            else:
                lo = J[0] + gh * np.log(self.y[1] / t)
            et = self.tail - N - 1
            gt = self.B[-1] * self.y[-1] ** (-self.tail)
            hi = -gt * t ** (et + 1) / (et + 1)
        out = np.where(t < self.y[1], lo, np.where(t >= self.y[-1], hi, mid))
        return np.where(t <= 0, (INF if self.head - N - 1 <= -1 else J[0] + gh * self.y[1] ** (eh + 1) / (eh + 1)), out)


def orlicz_lorentz_B(A: OneDimYoung, N: int, levels: int = 512) -> OrliczLorentzB:
    """Build B from A through the left-continuous inverse b^{-1}, sampled on `levels` levels."""
    if N < 2:
        raise NormError("N must be at least 2")
    r = A.s[1:]
    a = A.deriv(r)
    if np.any(a <= 0):
        raise NormError("A must be strictly increasing away from 0 (plateaus are not supported)")
    Np = N / (N - 1)
    # I(r) = int_0^r a^{-1/(N-1)}
    w = a ** (-1 / (N - 1))
    kap = math.log(w[1] / w[0]) / math.log(r[1] / r[0])
    if kap <= -1:
        raise NormError("quadrature failure in the b^{-1} formula: int_0 (1/a)^{1/(N-1)} diverges "
                        f"(local exponent {kap:.4g} near 0); normalize A near 0 first")
    I = np.concatenate([[w[0] * r[0] / (kap + 1)], w[0] * r[0] / (kap + 1) + np.cumsum(_power_segments(r, w))])
    K = I ** (-N) * a ** (-Np)
    kt = _local_exponent(r, K)
    tailK = _tail_integral(r[-1], K[-1], kt)
    if not math.isfinite(tailK):
        raise NormError(f"quadrature failure in the b^{{-1}} formula: outer integral diverges (tail exponent {kt:.4g})")
    segK = _power_segments(r, K)
    Jr = np.concatenate([np.cumsum(segK[::-1])[::-1], [0.0]]) + tailK
    # b^{-1}(s) = J(a^{-1}(s))^{1/(1-N)} on log-spaced levels inside the sampled range of a
    s_lv = np.geomspace(a[0], a[-1], levels)
    rho = np.exp(np.interp(np.log(s_lv), np.log(a), np.log(r)))
    Jrho = np.exp(np.interp(np.log(rho), np.log(r), np.log(Jr)))
    binv = Jrho ** (1 / (1 - N))
    # b(y) has pairs (y_j, s_j) = (b^{-1}(s_j), s_j)
    y, b = binv, s_lv
    order = np.argsort(y)
    y, b = y[order], b[order]
    y, idx = np.unique(y, return_index=True)
    b = b[idx]
    hb = math.log(b[1] / b[0]) / math.log(y[1] / y[0])
    tb = _local_exponent(y, b)
    B0 = b[0] * y[0] / (hb + 1)
    Bv = B0 + np.concatenate([[0.0], np.cumsum(_power_segments(y, b))])
    yy = np.concatenate([[0.0], y])
    BB = np.concatenate([[0.0], Bv])
    head, tail = hb + 1, tb + 1
    if tail >= N:
        raise NormError(f"B grows like t^{tail:.4g} with exponent >= N; the X_(A,N) modular diverges")
    g = BB[1:] * y ** (-N - 1)
    tailJ = _tail_integral(y[-1], g[-1], tail - N - 1)
    J = np.concatenate([np.cumsum(_power_segments(y, g)[::-1])[::-1], [0.0]]) + tailJ
    J = np.concatenate([[INF], J])
    return OrliczLorentzB(yy, BB, N, J, head, tail)


def orlicz_lorentz_norm(f: StepProfile, A: OneDimYoung | OrliczLorentzB, N: int = 2,
                        measure: float | None = None) -> float:
    """Luxemburg norm of s^{-1/N} f*(s) under B on (0, |Omega|).

    On a piece [a, b) with value c the substitution tau = c s^{-1/N} / k gives
    int_a^b B(c s^{-1/N}/k) ds = N (c/k)^N (J(c b^{-1/N}/k) - J(c a^{-1/N}/k)).
    """
    Bf = A if isinstance(A, OrliczLorentzB) else orlicz_lorentz_B(A, N)
    N = Bf.N
    a, b, c = _pieces(f)
    if len(c) == 0:
        return 0.0

    def modular(k):
        tb = c * b ** (-1 / N) / k
        ta = np.where(a > 0, c * np.maximum(a, 1e-300) ** (-1 / N) / k, INF)
        Ja = np.where(np.isinf(ta), 0.0, Bf.Jfun(np.where(np.isinf(ta), 1.0, ta)))
        return float(np.sum(N * (c / k) ** N * (Bf.Jfun(tb) - Ja)))

    return _bisect_norm(modular, float(np.max(c * b ** (-1 / N))))


# ---------------------------------------------------------------------------
# Hardy inequalities


@dataclass
class HardyReport:
    lhs1: float
    rhs1: float
    lhs2: float
    rhs2: float

    @property
    def ratio1(self) -> float:
        return _ratio(self.lhs1, self.rhs1)

    @property
    def ratio2(self) -> float:
        return _ratio(self.lhs2, self.rhs2)

    @property
    def ratio(self) -> float:
        return max(self.ratio1, self.ratio2)

    def to_dict(self):
        return {"lhs1": self.lhs1, "rhs1": self.rhs1, "ratio1": self.ratio1,
                "lhs2": self.lhs2, "rhs2": self.rhs2, "ratio2": self.ratio2}


def _ratio(l, r):
    if l == 0 and r == 0:
        return 0.0
    return l / r if r > 0 else INF


def _power_int(c, k, a, b):
    """int_a^b c t^k dt (a may be 0)."""
    if k == -1:
        return c * math.log(b / a) if a > 0 else INF
    if a == 0 and k < -1:
        return INF
    return c * (b ** (k + 1) - a ** (k + 1)) / (k + 1)


def hardy_check(psi: StepProfile, r: float, q: float, monotone: bool = False) -> HardyReport:
    """Both Hardy inequalities with constant 1, for a step function psi >= 0 on (0, inf).

    psi is zero beyond psi.measure. q < 1 requires monotone psi.
    """
    if r <= 0 or q <= 0:
        raise ValueError("r and q must be positive")
    if q < 1 and not monotone:
        raise ValueError("q < 1 needs a monotone psi (outside the inequality's hypotheses otherwise)")
    v = psi.values
    if np.any(v < 0):
        raise ValueError("psi must be non-negative")
    if monotone and not (np.all(np.diff(v) <= 0) or np.all(np.diff(v) >= 0)):
        raise ValueError("psi flagged monotone but is not")
    a_, b_ = psi.breaks[:-1], psi.breaks[1:]
    if not np.any(v > 0):
        return HardyReport(0.0, 0.0, 0.0, 0.0)
    # right sides: sum c^q int t^{(1 -+ r) q - 1}
    rhs1 = sum(_power_int(c**q, (1 - r) * q - 1, a, b) for a, b, c in zip(a_, b_, v) if c > 0)
    rhs2 = sum(_power_int(c**q, (1 + r) * q - 1, a, b) for a, b, c in zip(a_, b_, v) if c > 0)
    P = np.concatenate([[0.0], np.cumsum(v * (b_ - a_))])  # int_0^t psi at breakpoints
    M = P[-1]
    lhs1 = 0.0
    lhs2 = 0.0
    for k, (a, b, c) in enumerate(zip(a_, b_, v)):
        P0 = P[k]
        R0 = M - P0  # int_t^inf psi at t = a
        # (t^{-r} (P0 + c (t - a)))^q / t  and  (t^r (R0 - c (t - a)))^q / t
        if q == 1:
            lin = P0 - c * a
            lhs1 += (_power_int(lin, -r - 1, a, b) if lin != 0 else 0.0) + _power_int(c, -r, a, b)
            lhs2 += _power_int(R0 + c * a, r - 1, a, b) - _power_int(c, r, a, b)
            continue
        if a == 0:
            # first piece: P = c t exactly; R = R0 - c t is smooth
            lhs1 += _power_int(c**q, (1 - r) * q - 1, 0.0, b) if c > 0 else 0.0
            val, _ = quad(lambda t: max(R0 - c * t, 0.0) ** q, 0.0, b, weight="alg", wvar=(r * q - 1, 0.0),
                          epsabs=0, epsrel=1e-12, limit=200)
            lhs2 += val
            continue
        f1 = lambda t: (t ** (-r) * (P0 + c * (t - a))) ** q / t  # noqa: E731
        f2 = lambda t: (t**r * max(R0 - c * (t - a), 0.0)) ** q / t  # noqa: E731
        lhs1 += quad(f1, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
        lhs2 += quad(f2, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    # beyond the support: int_0^t psi = M and int_t^inf psi = 0
    lhs1 += M**q * psi.measure ** (-r * q) / (r * q)
    return HardyReport(float(lhs1), float(rhs1), float(lhs2), float(rhs2))
