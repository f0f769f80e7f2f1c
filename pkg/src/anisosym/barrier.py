"""Radial comparison function v and its gradient profile F.

    F(r) = Psi^{-1}( C1 r^{1/N} f**(r) / (N omega_N^{1/N}) + C1 Phi_conj^{-1}(G(r)) )
    v(s) = int_s^{|Omega|} F(r) / (N omega_N^{1/N} r^{1/N'}) dr

Quadrature treats F as a local power law between nodes, which is exact for
power-type data and handles the integrable singularity at r = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .profiles import RadialProfile, StepProfile
from .rearrange import double_star
from .young import BarrierUndefined, ConjugateInverse, OneDimYoung, PsiMap, conjugate_inverse, omega

__all__ = [
    "BarrierSpec", "GradientProfile", "RadialProfile", "F_profile", "barrier_solution",
    "barrier_wellposed", "barrier_gradient_energy", "closed_form_barrier",
]


@dataclass(frozen=True, eq=False)
class BarrierSpec:
    phi: OneDimYoung
    f_profile: StepProfile
    G_profile: StepProfile
    N: int = 2
    C1: float = 1.0
    C2: float = 1.0
    refine_decades: float = 10.0
    nodes_per_decade: int = 64

    def __post_init__(self):
        if self.C1 <= 0 or self.C2 <= 0:
            raise ValueError("C1 and C2 must be positive")
        if abs(self.f_profile.measure - self.G_profile.measure) > 1e-12 * self.f_profile.measure:
            raise ValueError("f and G profiles must cover the same measure")
        if np.any(self.G_profile.values < 0):
            raise ValueError("G must be non-negative")

    @property
    def measure(self) -> float:
        return self.f_profile.measure


@dataclass(frozen=True, eq=False)
class GradientProfile:
    """F on consecutive subintervals [r_k, r_{k+1}] with one-sided end values.

    left[k] = F(r_k+), right[k] = F(r_{k+1}-); F may jump where G does.
    """

    r: np.ndarray
    left: np.ndarray
    right: np.ndarray
    head_exponent: float

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        k = np.clip(np.searchsorted(self.r, s, side="right") - 1, 0, len(self.left) - 1)
        r0, r1 = self.r[k], self.r[k + 1]
        f0, f1 = self.left[k], self.right[k]
        with np.errstate(all="ignore"):
            e = np.log(f1 / f0) / np.log(r1 / r0)
            pw = f0 * (s / r0) ** e
        lin = f0 + (f1 - f0) * (s - r0) / (r1 - r0)
        out = np.where((f0 > 0) & (f1 > 0) & (r0 > 0), pw, lin)
        head = self.right[0] * (s / self.r[1]) ** self.head_exponent
        return np.where(s < self.r[1], head, out)


def _nodes(spec: BarrierSpec) -> np.ndarray:
    om = spec.measure
    b = np.union1d(spec.f_profile.breaks, spec.G_profile.breaks)
    first = b[1]
    lo = om * 10.0 ** (-spec.refine_decades)
    logn = np.geomspace(lo, om, int(spec.refine_decades * spec.nodes_per_decade) + 1)
    lin = np.linspace(0, om, 513)
    nodes = np.union1d(np.union1d(b, logn), lin)
    nodes = nodes[(nodes >= 0) & (nodes <= om)]
    if first < lo:
        nodes = np.union1d(nodes, np.geomspace(first, lo, 8))
    return nodes


def _argument(spec: BarrierSpec, r, G, cinv: ConjugateInverse | None):
    N = spec.N
    fss = double_star(spec.f_profile)
    head = spec.C1 * r ** (1 / N) * fss(r) / (N * omega(N) ** (1 / N))
    return head if cinv is None else head + spec.C1 * cinv(G)


def _conjugate_inverse(spec: BarrierSpec):
    # G = 0 needs no conjugate, which lets Phi grow linearly
    return conjugate_inverse(spec.phi) if np.any(spec.G_profile.values > 0) else None


def F_profile(spec: BarrierSpec) -> GradientProfile:
    """F on the union of data breakpoints plus log-refined nodes near 0."""
    r = _nodes(spec)
    r = r[r > 0] if r[0] == 0 else r
    r = np.concatenate([[0.0], r])
    mid = 0.5 * (r[:-1] + r[1:])
    G = spec.G_profile(mid)  # constant on each subinterval by construction
    Psi = PsiMap(spec.phi)
    cinv = _conjugate_inverse(spec)
    argL = _argument(spec, r[:-1], G, cinv)
    argR = _argument(spec, r[1:], G, cinv)
    sup = Psi.sup
    bad = np.nonzero(np.maximum(argL, argR) >= sup)[0]
    if len(bad):
        k = bad[0]
        raise BarrierUndefined(f"barrier undefined: the Psi argument leaves the range of Psi at r={r[k + 1]:.6g} "
                               f"(argument {max(argL[k], argR[k]):.6g} >= sup Psi {sup:.6g})")
    left = Psi.inverse(argL)
    right = Psi.inverse(argR)
    left[0] = right[0]
    # head exponent on (0, r_1) from the first two resolved nodes
    with np.errstate(all="ignore"):
        e = math.log(right[1] / right[0]) / math.log(r[2] / r[1]) if right[0] > 0 and right[1] > 0 else 0.0
    return GradientProfile(r, left, right, e if math.isfinite(e) else 0.0)


def _piece_integrals(r0, r1, y0, y1, w):
    """int_{r0}^{r1} y(r) r^w dr with y a local power law (or linear if a value is 0)."""
    with np.errstate(all="ignore"):
        e = np.log(y1 / y0) / np.log(r1 / r0)
        k = e + w + 1
        pw = np.where(np.abs(k) > 1e-12,
                      y0 * r0 ** (w + 1) * ((r1 / r0) ** k - 1) / k,
                      y0 * r0 ** (w + 1) * np.log(r1 / r0))
        # linear y = a + b r
        b = (y1 - y0) / (r1 - r0)
        a = y0 - b * r0
        lin = a * (r1 ** (w + 1) - r0 ** (w + 1)) / (w + 1) + b * (r1 ** (w + 2) - r0 ** (w + 2)) / (w + 2)
    ok = (y0 > 0) & (y1 > 0) & (r0 > 0) & np.isfinite(pw)
    return np.where(ok, pw, lin)


def barrier_solution(spec: BarrierSpec, F: GradientProfile | None = None) -> RadialProfile:
    """v(s) on the F nodes; v(|Omega|) = 0, v(0) may be +inf (blow-up exponent kept)."""
    F = F_profile(spec) if F is None else F
    N = spec.N
    c = N * omega(N) ** (1 / N)
    w = -(1 - 1 / N)
    r = F.r
    seg = _piece_integrals(r[1:-1], r[2:], F.left[1:], F.right[1:], w) / c
    # head piece (0, r_1): F ~ F(r_1-) (r/r_1)^e
    k = F.head_exponent + w + 1
    blow = None
    if F.right[0] == 0:
        head = 0.0
    elif k > 0:
        head = F.right[0] * r[1] ** (w + 1) / k / c
    else:
        head = math.inf
        blow = k
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    v = np.concatenate([[head + tail[0]], tail])
    return RadialProfile(r, v, N, blowup_exponent=blow, F=F, exact=_Between(F, v, c, w))


@dataclass(frozen=True, eq=False)
class _Between:
    """v(s) off the nodes: nodal value at the right end plus the partial piece."""

    F: GradientProfile
    v: np.ndarray
    c: float
    w: float

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        r = self.F.r
        k = np.clip(np.searchsorted(r, s, side="right") - 1, 0, len(r) - 2)
        r1 = r[k + 1]
        with np.errstate(all="ignore"):
            part = _piece_integrals(s, r1, self.F(s), self.F.right[k], self.w) / self.c
            e = self.F.head_exponent + self.w + 1
            head = self.F.right[0] * (r1 ** e - s ** e) / (e * r1 ** self.F.head_exponent) / self.c
        part = np.where(k == 0, head, part)
        part = np.where(s >= r1, 0.0, part)
        return np.where(s <= 0, self.v[0], self.v[k + 1] + part)


def barrier_gradient_energy(v: RadialProfile, phi: OneDimYoung) -> float:
    """int_0^{|Omega|} Phi(F(r)) dr, which equals int over the ball of Phi(|grad v|)."""
    F = v.F
    if F is None:
        if np.all(v.values == 0):
            return 0.0
        raise ValueError("radial profile carries no gradient profile")
    r = F.r
    E0, E1 = phi(F.left[1:]), phi(F.right[1:])
    seg = _piece_integrals(r[1:-1], r[2:], E0, E1, 0.0)
    e0 = float(phi(F.right[0]))
    with np.errstate(all="ignore"):
        ke = math.log(float(phi(F.right[1])) / e0) / math.log(r[2] / r[1]) if e0 > 0 else 0.0
    if e0 == 0:
        head = 0.0
    elif ke > -1:
        head = e0 * r[1] / (ke + 1)
    else:
        head = math.inf
    return float(head + seg.sum())


@dataclass
class WellposedReport:
    cond1: bool
    cond2: bool
    grad_finite: bool
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.cond1 and self.cond2 and self.grad_finite

    def to_dict(self):
        return {"cond1": self.cond1, "cond2": self.cond2, "grad_finite": self.grad_finite,
                "details": self.details}


def barrier_wellposed(spec: BarrierSpec) -> WellposedReport:
    """Range conditions on Psi and finiteness of the barrier's gradient energy."""
    Psi = PsiMap(spec.phi)
    sup = Psi.sup
    details: dict = {"sup_psi": sup if math.isfinite(sup) else "inf"}
    cond1 = math.isinf(sup)
    r = _nodes(spec)
    r = r[r > 0]
    cinv = _conjugate_inverse(spec)
    arg = np.maximum(_argument(spec, r, spec.G_profile(r), cinv),
                     _argument(spec, r, spec.G_profile.left_limit(r), cinv))
    viol = np.nonzero(arg >= sup)[0]
    cond2 = len(viol) == 0
    if not cond2:
        details["cond2_first_r"] = float(r[viol[0]])
        details["cond2_argument"] = float(arg[viol[0]])
    grad_finite = True
    if cond2:
        F = F_profile(spec)
        E = spec.phi(F.right[1:])
        rr = F.r[2:]
        first = min(b for b in (spec.f_profile.breaks[1], spec.G_profile.breaks[1]))
        # decade integrals just above the data resolution; growth toward 0 means divergence
        edges = first * 10.0 ** np.arange(1, 5)
        edges = edges[edges <= spec.measure]
        if len(edges) >= 4:
            dec = []
            for a, b in zip(edges[:-1], edges[1:]):
                sel = (rr >= a) & (rr <= b)
                dec.append(np.trapezoid(E[sel], rr[sel]) if sel.sum() > 1 else 0.0)
            ratios = [d0 / d1 if d1 > 0 else 0.0 for d0, d1 in zip(dec[:-1], dec[1:])]
            details["decade_ratios"] = [float(x) for x in ratios]
            grad_finite = not all(x >= 0.9 for x in ratios)
        energy = barrier_gradient_energy(barrier_solution(spec, F), spec.phi)
        details["gradient_energy"] = energy if math.isfinite(energy) else "inf"
        grad_finite = grad_finite and math.isfinite(energy)
    return WellposedReport(cond1, cond2, grad_finite, details)


def closed_form_barrier(pbar: float, Lam: float, spec: BarrierSpec, s) -> np.ndarray:
    """v for Phi_diamond = Lam s^pbar written with explicit powers, by adaptive quadrature.

    Independent of the tabulated Psi and conjugate inverses; used as a cross-check.
    """
    from scipy.integrate import quad

    N = spec.N
    c = N * omega(N) ** (1 / N)
    pbp = pbar / (pbar - 1)
    fss = double_star(spec.f_profile)

    def F(r):
        G = float(spec.G_profile(r))
        a = spec.C1 * r ** (1 / N) * float(fss(r)) / c + spec.C1 * (pbar * Lam) ** (1 / pbar) * (pbp * G) ** (1 / pbp)
        return (a / Lam) ** (1 / (pbar - 1))

    pts = np.union1d(spec.f_profile.breaks, spec.G_profile.breaks)
    out = []
    for s0 in np.atleast_1d(s):
        p = pts[(pts > s0) & (pts < spec.measure)]
        val = 0.0
        edges = np.concatenate([[s0], p, [spec.measure]])
        for a, b in zip(edges[:-1], edges[1:]):
            val += quad(lambda r: F(r) / (c * r ** (1 - 1 / N)), a, b, limit=200, epsabs=0, epsrel=1e-11)[0]
        out.append(val)
    return np.asarray(out)
