"""End-to-end checks of the symmetrization estimates on solved grid problems."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import young
from .barrier import BarrierSpec, barrier_gradient_energy, barrier_solution
from .norms import lorentz_norm, lorentz_zygmund_norm, luxemburg_norm
from .pde import DiscreteProblem, SolveOptions, gradient_norms, solve
from .profiles import RadialProfile, StepProfile
from .rearrange import (GridFunction, LatticeRearrangement, SimplexRearrangement, decreasing_rearrangement,
                        double_star, pseudo_rearrangement)
from .young import OneDimYoung, PowerSum, YoungSpec, klimov_symmetrize

__all__ = [
    "HypothesisError", "ComparisonVacuous", "VerificationReport", "RatioReport", "comparison_barrier",
    "comparison_report", "gradient_integral", "gradient_estimate_report", "polya_szego_check",
    "regularity_hypotheses", "regularity_table", "RegularityReport", "distributional_hypotheses",
    "distributional_exponents_check", "DistributionalReport", "data_conditions", "global_hypotheses",
]


class HypothesisError(ValueError):
    """Inputs outside the hypotheses of the estimate being checked."""


class ComparisonVacuous(ValueError):
    pass


def _conj_exp(p):
    return math.inf if p == 1 else p / (p - 1)


def global_hypotheses(p, N) -> list:
    """Warnings for pbar < N and max p_i < pbar*; these never refuse a run."""
    pb = young.harmonic_mean(p)
    out = []
    if pb >= N:
        out.append(f"pbar = {pb:.6g} is not below N = {N}")
    else:
        ps = N * pb / (N - pb)
        if max(p) >= ps:
            out.append(f"max p_i = {max(p):.6g} is not below pbar* = {ps:.6g}")
    return out


# ---------------------------------------------------------------------------
# comparison


@dataclass
class VerificationReport:
    empirical_constant: float
    s: np.ndarray
    u_star: np.ndarray
    v: np.ndarray
    threshold: float
    route: str
    provenance: dict = field(default_factory=dict)

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.where(self.u_star == 0, 0.0, self.u_star / self.v)

    @property
    def passed(self) -> bool:
        return bool(self.empirical_constant <= self.threshold)

    @property
    def margin_profile(self) -> StepProfile:
        """ratio u*/v as a step function on the evaluated s nodes."""
        order = np.argsort(self.s)
        s, r = self.s[order], self.ratio[order]
        s, idx = np.unique(s, return_index=True)
        r = r[idx]
        if s[0] > 0:
            s = np.concatenate([[0.0], s])
            r = np.concatenate([[r[0]], r])
        return StepProfile(s, r[:-1]) if len(s) > 1 else StepProfile(np.array([0.0, 1.0]), np.zeros(1))

    def write_margins(self, path):
        order = np.argsort(self.s)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "u_star", "v", "ratio"])
            for k in order:
                w.writerow([repr(float(self.s[k])), repr(float(self.u_star[k])), repr(float(self.v[k])),
                            repr(float(self.ratio[k]))])

    def to_dict(self):
        return {"empirical_C": self.empirical_constant, "threshold": self.threshold, "pass": self.passed,
                "route": self.route, "points": int(len(self.s)), **self.provenance}


def _domain_measure(u: GridFunction, lattice: bool | None):
    if lattice is None:
        lattice = u.dim == 2
    L = LatticeRearrangement(u) if lattice else SimplexRearrangement(u)
    return L.domain_measure, L


def comparison_barrier(prob: DiscreteProblem, u: GridFunction, C1: float = 1.0, C2: float = 1.0,
                       conservative: bool = False, lattice: bool | None = None,
                       phi_diamond: OneDimYoung | None = None) -> BarrierSpec:
    """Barrier data for a solved problem.

    f* comes from the cell values of f; G is the pseudo-rearrangement of
    Phi_conj(C2 g) with respect to u (or its decreasing rearrangement when
    `conservative`). Both are extended by zero to the measure of the domain
    carried by u's interpolant.
    """
    measure, _ = _domain_measure(u, lattice)
    phi_d = klimov_symmetrize(prob.phi) if phi_diamond is None else phi_diamond
    fgrid = GridFunction(u.lo, u.hi, prob.f, u.mask)
    fprof = decreasing_rearrangement(fgrid).padded(measure)
    if any(np.any(g != 0) for g in prob.g):
        conj = young.conjugate(prob.phi)
        h = conj(np.stack([C2 * g for g in prob.g], -1))
        hgrid = GridFunction(u.lo, u.hi, h, u.mask)
        G = decreasing_rearrangement(hgrid) if conservative else pseudo_rearrangement(hgrid, u)
    else:
        G = StepProfile.constant(0.0, u.measure)
    return BarrierSpec(phi_d, fprof, G.padded(measure), prob.dim, C1, C2)


def comparison_report(u: GridFunction, spec: BarrierSpec, threshold: float = 1.05,
                      lattice: bool | None = None, v: RadialProfile | None = None) -> VerificationReport:
    """Empirical C = sup u*(s)/v(s), skipping the last cell next to s = |Omega|.

    u* is that of the piecewise linear interpolant on the Kuhn triangulation of
    the lattice of cell centres (exact in every dimension).
    """
    measure, L = _domain_measure(u, lattice)
    if abs(measure - spec.measure) > 1e-9 * measure:
        raise ValueError(f"barrier measure {spec.measure:.12g} does not match the domain measure {measure:.12g}")
    v = barrier_solution(spec) if v is None else v
    cell = u.cell_volume
    s, t = L.profile()
    route = "lattice" if isinstance(L, LatticeRearrangement) else "simplex"
    keep = (s <= measure - cell) & (t > 0)
    s, t = s[keep], t[keep]
    vv = v(s)
    if np.any((vv <= 0) & (t > 0)):
        raise ComparisonVacuous("comparison vacuous: v vanishes where u does not")
    C = float(np.max(t / vv)) if len(t) else 0.0
    prov = {"measure": measure, "cell_volume": cell, "h": list(u.h)}
    return VerificationReport(C, s, t, vv, threshold, route, prov)


# ---------------------------------------------------------------------------
# gradient estimate and Polya-Szego


@dataclass
class RatioReport:
    lhs: float
    rhs: float
    slack: float
    label: str = ""

    @property
    def ratio(self) -> float:
        if self.lhs == 0:
            return 0.0
        return self.lhs / self.rhs if self.rhs > 0 else math.inf

    @property
    def passed(self) -> bool:
        return self.ratio <= 1 + self.slack

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "slack": self.slack, "pass": self.passed}


def gradient_integral(u: GridFunction, phi: YoungSpec) -> float:
    """int Phi(grad u) for the interpolant of u.

    In two dimensions this is the exact integral over the triangulated lattice
    (equal to the forward-difference sum for separable Phi); otherwise the
    forward-difference sum of a separable Phi.
    """
    if u.dim == 2:
        L = LatticeRearrangement(u)
        return float(np.sum(phi(L.gradients())) * L.area)
    facs = phi.factors()
    if facs is None:
        raise ValueError("non-separable Phi needs a two-dimensional grid")
    U = np.pad(u.masked, 1)
    M = np.pad(u.mask, 1)
    total = 0.0
    for i, (F, h) in enumerate(zip(facs, u.h)):
        d = np.diff(U, axis=i) / h
        lo = [slice(None)] * u.dim
        hi = [slice(None)] * u.dim
        lo[i], hi[i] = slice(0, -1), slice(1, None)
        touch = M[tuple(lo)] | M[tuple(hi)]
        total += float(np.sum(F(d[touch])))
    return total * u.cell_volume


def gradient_estimate_report(u: GridFunction, v: RadialProfile, phi: YoungSpec, phi_diamond: OneDimYoung,
                             slack: float = 0.05) -> RatioReport:
    """int Phi(grad u) against int Phi_diamond(|grad v|)."""
    lhs = gradient_integral(u, phi)
    rhs = barrier_gradient_energy(v, phi_diamond)
    return RatioReport(lhs, rhs, slack, "gradient")


def polya_szego_check(u: GridFunction, phi: YoungSpec, phi_diamond: OneDimYoung | None = None,
                      slack: float = 0.05) -> RatioReport:
    """int Phi_diamond(|grad u_star|) / int Phi(grad u) for a two-dimensional field."""
    if u.dim != 2:
        raise ValueError("the symmetrized gradient is computed on two-dimensional lattices")
    phi_d = klimov_symmetrize(phi) if phi_diamond is None else phi_diamond
    L = LatticeRearrangement(u)
    lhs = L.gradient_energy_star(phi_d)
    rhs = float(np.sum(phi(L.gradients())) * L.area)
    return RatioReport(lhs, rhs, slack, "polya_szego")


# ---------------------------------------------------------------------------
# data conditions


def data_conditions(prob: DiscreteProblem, phi_diamond: OneDimYoung | None = None, measure=None) -> dict:
    """The two summability conditions on f and g, evaluated on the grid data."""
    phi_d = klimov_symmetrize(prob.phi) if phi_diamond is None else phi_diamond
    fgrid = GridFunction(prob.grid.lo, prob.grid.hi, prob.f, prob.grid.mask)
    fprof = decreasing_rearrangement(fgrid)
    measure = fprof.measure if measure is None else measure
    fprof = fprof.padded(measure)
    N = prob.dim
    s = np.union1d(fprof.breaks, np.geomspace(1e-8 * measure, measure, 512))
    w = s ** (1 / N) * double_star(fprof)(s)
    upper = StepProfile(s, np.maximum(w[:-1], w[1:]))  # dominates s^{1/N} f**(s)
    try:
        fnorm = luxemburg_norm(upper, phi_d.conjugate())
    except young.YoungError as exc:
        fnorm = math.inf
        note = str(exc)
    else:
        note = ""
    if any(np.any(g != 0) for g in prob.g):
        conj = young.conjugate(prob.phi)
        gmod = float(np.sum(conj(np.stack(prob.g, -1))[prob.grid.mask]) * prob.vol)
    else:
        gmod = 0.0
    ok = math.isfinite(fnorm) and math.isfinite(gmod)
    out = {"f_luxemburg": fnorm, "g_modular": gmod, "within_hypotheses": ok}
    if note:
        out["note"] = note
    if not ok:
        out["status"] = "outside theorem hypotheses"
    return out


# ---------------------------------------------------------------------------
# regularity tables


def _check(cond: bool, msg: str, bad: list):
    if not cond:
        bad.append(msg)


def regularity_hypotheses(p, N: int, case: str, m: float, sigma: float, r=None, s=None) -> list:
    """Violated constraints on (m, sigma, r_i, s_i) for the three data cases."""
    pb = young.harmonic_mean(p)
    pp = [_conj_exp(x) for x in p]
    bad: list = []
    sig = float(sigma)
    if case == "i":
        _check((m > N / pb and 0 < sig <= math.inf) or (m == N / pb and 0 < sig <= 1),
               f"case i needs m > N/pbar = {N / pb:.6g} (or m = N/pbar with sigma <= 1); got m={m}, sigma={sig}", bad)
        if r is not None:
            s = [math.inf] * len(p) if s is None else s
            for i, (ri, si, q) in enumerate(zip(r, s, pp)):
                lim = N * q / pb
                _check((ri > lim and 0 < si <= math.inf) or (ri == lim and 0 < si <= q / pb),
                       f"case i needs r_{i + 1} > N p_{i + 1}'/pbar = {lim:.6g} "
                       f"(or equality with s_{i + 1} <= p'/pbar); "
                       f"got r={ri}, s={si}", bad)
    elif case == "ii":
        _check(1 < sig <= math.inf, f"case ii needs 1 < sigma <= inf; got sigma={sig}", bad)
    elif case == "iii":
        if pb >= N:
            bad.append(f"case iii needs pbar < N; got pbar={pb:.6g}")
        else:
            ps = N * pb / (N - pb)
            psp = ps / (ps - 1)
            _check((psp < m < N / pb and 0 < sig <= math.inf) or (m == psp and sig == pb),
                   f"case iii needs (pbar*)' = {psp:.6g} < m < N/pbar = {N / pb:.6g} "
                   f"(or m = (pbar*)' with sigma = pbar); got m={m}, sigma={sig}", bad)
    else:
        bad.append(f"unknown case {case!r}")
    return bad


@dataclass
class RegularityReport:
    case: str
    lhs: float
    rhs: float
    f_term: float
    g_terms: list
    homogeneity_t: float
    homogeneity_error: float
    warnings: list = field(default_factory=list)

    @property
    def constant(self) -> float:
        if self.lhs == 0:
            return 0.0
        return self.lhs / self.rhs if self.rhs > 0 else math.inf

    @property
    def passed(self) -> bool:
        return math.isfinite(self.constant) and self.homogeneity_error <= 1e-10

    def to_dict(self):
        return {"case": self.case, "lhs": self.lhs, "rhs": self.rhs, "c": self.constant,
                "f_term": self.f_term, "g_terms": self.g_terms, "homogeneity_t": self.homogeneity_t,
                "homogeneity_error": self.homogeneity_error, "warnings": self.warnings, "pass": self.passed}


def _profile(values: np.ndarray, grid: GridFunction) -> StepProfile:
    return decreasing_rearrangement(GridFunction(grid.lo, grid.hi, values, grid.mask))


def regularity_rhs(prob: DiscreteProblem, case: str, m: float, sigma: float, f=None, g=None):
    """Right side of the a-priori bound: f term and one term per g_i."""
    N, pb = prob.dim, prob.pbar
    pp = [_conj_exp(x) for x in prob.p]
    f = prob.f if f is None else f
    g = prob.g if g is None else g
    grid = prob.grid
    sig = float(sigma)
    if case == "i":
        fn = lorentz_norm(_profile(f, grid), m, sig / (pb - 1))
        gidx = [(N * q / pb, q / pb) for q in pp]
    elif case == "ii":
        fn = lorentz_norm(_profile(f, grid), N / pb, sig / (pb - 1))
        gidx = [(N * q / pb, sig * q / pb) for q in pp]
    else:
        fn = lorentz_norm(_profile(f, grid), m, sig / (pb - 1))
        gidx = [(m * N * (pb - 1) / (N - m) * q / pb, sig * q / pb) for q in pp]
    f_term = fn ** (1 / (pb - 1))
    g_terms = []
    for gi, (a, b), q in zip(g, gidx, pp):
        if not np.any(gi != 0):
            g_terms.append(0.0)
            continue
        g_terms.append(lorentz_norm(_profile(gi, grid), a, b) ** (q / pb))
    return f_term, g_terms


def regularity_lhs(u: GridFunction, prob: DiscreteProblem, case: str, m: float, sigma: float) -> float:
    N, pb = prob.dim, prob.pbar
    prof = decreasing_rearrangement(u)
    if case == "i":
        return float(np.max(np.abs(u.values[u.mask]))) if u.mask.any() else 0.0
    if case == "ii":
        return lorentz_zygmund_norm(prof, "inf", sigma, -1.0, measure=u.measure)
    return lorentz_norm(prof, m * N * (pb - 1) / (N - m * pb), sigma)


def regularity_table(u: GridFunction, prob: DiscreteProblem, case: str, m: float, sigma: float,
                     r=None, s=None, t: float = 4.0) -> RegularityReport:
    """Left norm of u, right combination of data norms, empirical c and the scaling check.

    The scaling f -> t f, g_i -> t^{pbar/((pbar-1) p_i')} g_i multiplies every
    right-side term by t^{1/(pbar-1)}; the relative deviation is reported.
    """
    bad = regularity_hypotheses(prob.p, prob.dim, case, m, sigma, r, s)
    if bad:
        raise HypothesisError("; ".join(bad))
    pb = prob.pbar
    pp = [_conj_exp(x) for x in prob.p]
    f_term, g_terms = regularity_rhs(prob, case, m, sigma)
    rhs = f_term + sum(g_terms)
    lhs = regularity_lhs(u, prob, case, m, sigma)
    gs = [t ** (pb / ((pb - 1) * q)) * g for g, q in zip(prob.g, pp)]
    f2, g2 = regularity_rhs(prob, case, m, sigma, t * prob.f, gs)
    expect = t ** (1 / (pb - 1)) * rhs
    err = abs(f2 + sum(g2) - expect) / expect if expect > 0 else abs(f2 + sum(g2))
    return RegularityReport(case, lhs, rhs, f_term, g_terms, t, err, global_hypotheses(prob.p, prob.dim))


# ---------------------------------------------------------------------------
# distributional solutions


def distributional_hypotheses(p, N: int, m: float, r: float, gamma: float | None = None) -> list:
    """Violated constraints for the truncation experiment with f = |x|^{-gamma}."""
    pb = young.harmonic_mean(p)
    pbp = _conj_exp(pb)
    bad: list = []
    for i, q in enumerate(p):
        _check(q / pbp > N / (N - 1), f"needs p_{i + 1}/pbar' > N/(N-1) = {N / (N - 1):.6g}; "
               f"got {q / pbp:.6g}", bad)
    if pb >= N:
        bad.append(f"needs pbar < N for (pbar*)'; got pbar={pb:.6g}, N={N}")
        return bad
    ps = N * pb / (N - pb)
    psp = ps / (ps - 1)
    ms = N * m / (N - m) if m < N else math.inf
    _check((1 < m < psp and 0 < r <= ms) or (m == psp and pbp < r <= ms),
           f"needs 1 < m < (pbar*)' = {psp:.6g} with 0 < r <= m* (or m = (pbar*)' with pbar' < r <= m*); "
           f"got m={m}, r={r}", bad)
    if gamma is not None:
        _check(0 <= gamma < N / m or (gamma == N / m and math.isinf(r)),
               f"|x|^-gamma lies in L^(m,r) only for gamma < N/m = {N / m:.6g}; got gamma={gamma}", bad)
    return bad


@dataclass
class DistributionalReport:
    levels: list
    q: list
    f_norms: list  # ||f_k||_{L^{m,m*}}
    grad_norms: list  # per level, per direction ||d_i u_k||_{L^{q_i}}
    envelope: list  # per level, per direction ||d_i u_k||_{q_i} / ||f_k||^{m*/q_i}
    tol: float
    notes: list = field(default_factory=list)

    @property
    def spread(self) -> float:
        E = np.asarray(self.envelope)
        if not np.all(np.isfinite(E)) or np.any(E <= 0):
            return math.inf
        return float(np.max(E.max(axis=0) / E.min(axis=0)))

    @property
    def passed(self) -> bool:
        return self.spread <= self.tol

    def to_dict(self):
        return {"levels": self.levels, "q": self.q, "f_norms": self.f_norms, "grad_norms": self.grad_norms,
                "envelope": self.envelope, "spread": self.spread, "tol": self.tol, "pass": self.passed,
                "notes": self.notes}


def distributional_exponents_check(grid: GridFunction, p, lam, m: float, r: float, gamma: float,
                                   levels=(2, 4, 8, 16), center=None, tol: float = 1.5,
                                   opts: SolveOptions | None = None) -> DistributionalReport:
    """Solve with truncations f_k = min(|x|^{-gamma}, T_k) and track gradient norms.

    T_k = level_k * min over the domain of |x|^{-gamma}. The envelope constant
    ||d_i u_k||_{q_i} / ||f_k||_{L^{m,m*}}^{m*/q_i}, q_i = p_i m*/pbar', must
    vary by at most the factor `tol` across levels in every direction.
    """
    N = grid.dim
    bad = distributional_hypotheses(p, N, m, r, gamma)
    if bad:
        raise HypothesisError("; ".join(bad))
    pb = young.harmonic_mean(p)
    pbp = _conj_exp(pb)
    ms = N * m / (N - m)
    q = [x * ms / pbp for x in p]
    c = np.zeros(N) if center is None else np.asarray(center, dtype=float)
    X = grid.centers()
    rad = np.sqrt(sum((x - ci) ** 2 for x, ci in zip(X, c)))
    with np.errstate(divide="ignore"):
        f = rad ** (-gamma)
    base = float(np.min(f[grid.mask]))
    notes = global_hypotheses(p, N)
    ps = N * pb / (N - pb)
    if gamma < N * (ps - 1) / ps:
        notes.append("f lies in L^((pbar*)'): the weak-solution theory already applies")
    fn, gn, env = [], [], []
    for lv in levels:
        fk = np.minimum(f, lv * base)
        prob = DiscreteProblem(grid, p, lam, fk)
        u = solve(prob, opts).u
        a = lorentz_norm(_profile(prob.f, grid), m, ms)
        gq = gradient_norms(prob, u, q)
        fn.append(a)
        gn.append(gq)
        env.append([g / a ** (ms / qi) for g, qi in zip(gq, q)])
    return DistributionalReport(list(levels), q, fn, gn, env, tol, notes)
