"""Finite-difference energy minimization for the prototype anisotropic problem

    -sum_i d_i( lam_i |u_{x_i}|^{p_i - 2} u_{x_i} ) = f - div g   in Omega,  u = 0 on the boundary.

Unknowns are the masked cells; forward differences run over a one-cell padding,
so every edge touching the mask carries a difference with the zero extension.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .rearrange import GridFunction
from .young import PowerSum, harmonic_mean

__all__ = [
    "DiscreteProblem", "SolveOptions", "SolveResult", "SolverError", "energy", "solve",
    "residual", "gradient_norms", "assemble_laplacian",
]


class SolverError(RuntimeError):
    def __init__(self, msg, u=None, history=None):
        super().__init__(msg)
        self.u = u
        self.history = history or []


@dataclass(frozen=True)
class _Axis:
    D: sp.csr_matrix  # unknowns -> edge differences
    tail: np.ndarray  # flat full-grid index of the edge tail, -1 outside the box
    g: np.ndarray  # g_i on each edge


def _as_array(x, shape):
    if x is None:
        return np.zeros(shape)
    if isinstance(x, GridFunction):
        return x.masked
    a = np.asarray(x, dtype=float)
    return np.broadcast_to(a, shape).copy()


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """Grid, exponents, weights and data of one discrete problem."""

    grid: GridFunction
    p: tuple
    lam: tuple
    f: np.ndarray | float = 0.0
    g: tuple | None = None
    eps_reg: float = 0.0
    notes: list = field(default_factory=list, compare=False)

    def __post_init__(self):
        N = self.grid.dim
        p = tuple(float(x) for x in np.atleast_1d(self.p))
        lam = tuple(float(x) for x in np.atleast_1d(self.lam))
        if len(p) != N or len(lam) != N:
            raise ValueError(f"need {N} exponents and weights, got {len(p)} and {len(lam)}")
        PowerSum(p, lam)  # validates p_i >= 1, lam_i > 0, pbar > 1
        if self.eps_reg < 0:
            raise ValueError("eps_reg must be non-negative")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "lam", lam)
        shape = self.grid.n
        f = np.where(self.grid.mask, _as_array(self.f, shape), 0.0)
        gs = [np.zeros(shape)] * N if self.g is None else list(self.g)
        if len(gs) != N:
            raise ValueError(f"g needs {N} components")
        gs = tuple(np.where(self.grid.mask, _as_array(x, shape), 0.0) for x in gs)
        if not np.all(np.isfinite(f)) or not all(np.all(np.isfinite(x)) for x in gs):
            raise ValueError("data must be finite")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", gs)
        pb = self.pbar
        if pb >= N:
            self.notes.append(f"pbar = {pb:.6g} >= N = {N}: regularity tables do not apply")
        elif max(p) >= self.pbar_star:
            self.notes.append(f"max p_i = {max(p):.6g} >= pbar* = {self.pbar_star:.6g}")
        object.__setattr__(self, "_ops", self._assemble())

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def pbar(self) -> float:
        return harmonic_mean(self.p)

    @property
    def pbar_star(self) -> float:
        N, pb = self.dim, self.pbar
        return N * pb / (N - pb) if pb < N else math.inf

    @property
    def phi(self) -> PowerSum:
        """Young function bounded by a(xi).xi for the prototype flux."""
        return PowerSum(self.p, self.lam)

    @property
    def vol(self) -> float:
        return self.grid.cell_volume

    @property
    def n_unknowns(self) -> int:
        return int(self.grid.mask.sum())

    def _assemble(self):
        mask = self.grid.mask
        N, shape = self.dim, mask.shape
        idx = -np.ones(shape, dtype=np.int64)
        idx[mask] = np.arange(mask.sum())
        full = np.arange(mask.size).reshape(shape)
        P = np.pad(idx, 1, constant_values=-1)
        Pf = np.pad(full, 1, constant_values=-1)
        ops = []
        for i in range(N):
            lo = [slice(1, -1)] * N
            hi = [slice(1, -1)] * N
            lo[i] = slice(0, -1)
            hi[i] = slice(1, None)
            tail, head = P[tuple(lo)].ravel(), P[tuple(hi)].ravel()
            tail_full = Pf[tuple(lo)].ravel()
            keep = (tail >= 0) | (head >= 0)
            tail, head, tail_full = tail[keep], head[keep], tail_full[keep]
            m = len(tail)
            rows = np.concatenate([np.nonzero(head >= 0)[0], np.nonzero(tail >= 0)[0]])
            cols = np.concatenate([head[head >= 0], tail[tail >= 0]])
            hh = self.grid.h[i]
            vals = np.concatenate([np.full((head >= 0).sum(), 1 / hh), np.full((tail >= 0).sum(), -1 / hh)])
            D = sp.csr_matrix((vals, (rows, cols)), shape=(m, mask.sum()))
            gi = np.where(tail >= 0, self.g[i].ravel()[np.maximum(tail_full, 0)], 0.0)
            ops.append(_Axis(D, tail_full, gi))
        return ops

    def unknowns(self, u) -> np.ndarray:
        if isinstance(u, GridFunction):
            u = u.values
        u = np.asarray(u, dtype=float)
        return u[self.grid.mask] if u.shape == self.grid.n else u

    def to_grid(self, x) -> GridFunction:
        vals = np.zeros(self.grid.n)
        vals[self.grid.mask] = x
        return GridFunction(self.grid.lo, self.grid.hi, vals, self.grid.mask)

    def differences(self, u):
        x = self.unknowns(u)
        return [a.D @ x for a in self._ops]

    def scaled(self, t_f: float = 1.0, t_g=1.0) -> "DiscreteProblem":
        tg = np.broadcast_to(np.asarray(t_g, dtype=float), (self.dim,))
        return DiscreteProblem(self.grid, self.p, self.lam, t_f * self.f,
                               tuple(t * g for t, g in zip(tg, self.g)), self.eps_reg)


def _phi_terms(d, p, eps):
    if eps == 0:
        return np.abs(d) ** p
    return (d * d + eps * eps) ** (p / 2) - eps**p


def _flux(d, p, eps):
    if eps == 0:
        with np.errstate(all="ignore"):
            return np.where(d == 0, 0.0, np.abs(d) ** (p - 2) * d)
    return (d * d + eps * eps) ** (p / 2 - 1) * d


def _curv(d, p, eps):
    if eps == 0:
        if p == 2:
            return np.ones_like(d)
        with np.errstate(all="ignore"):
            w = (p - 1) * np.abs(d) ** (p - 2)
        return np.where(np.isfinite(w), w, 0.0)
    with np.errstate(all="ignore"):
        w = (d * d + eps * eps) ** (p / 2 - 2) * ((p - 1) * d * d + eps * eps)
    return np.where(np.isfinite(w), w, 0.0)


def _energy_x(prob: DiscreteProblem, x, eps):
    J = -np.dot(prob.f[prob.grid.mask], x)
    for a, p, lam in zip(prob._ops, prob.p, prob.lam):
        d = a.D @ x
        J += lam / p * _phi_terms(d, p, eps).sum() - np.dot(a.g, d)
    return J * prob.vol


def _grad_x(prob: DiscreteProblem, x, eps):
    g = -prob.f[prob.grid.mask].copy()
    for a, p, lam in zip(prob._ops, prob.p, prob.lam):
        d = a.D @ x
        g += a.D.T @ (lam * _flux(d, p, eps) - a.g)
    return g * prob.vol


def _hess_x(prob: DiscreteProblem, x, eps, shift=0.0):
    H = None
    for a, p, lam in zip(prob._ops, prob.p, prob.lam):
        d = a.D @ x
        w = lam * _curv(d, p, eps) + shift
        term = a.D.T @ sp.diags(w) @ a.D
        H = term if H is None else H + term
    return (H * prob.vol).tocsc()


def energy(prob: DiscreteProblem, u, eps: float | None = None) -> float:
    """J(u) with the problem's eps_reg unless `eps` is given (0 for the exact energy)."""
    return float(_energy_x(prob, prob.unknowns(u), prob.eps_reg if eps is None else eps))


def residual(prob: DiscreteProblem, u, eps: float | None = None) -> float:
    """max over masked cells of the discrete weak-form residual per unit cell volume."""
    g = _grad_x(prob, prob.unknowns(u), prob.eps_reg if eps is None else eps)
    return float(np.max(np.abs(g)) / prob.vol) if len(g) else 0.0


def assemble_laplacian(prob: DiscreteProblem) -> sp.csc_matrix:
    """Weighted Dirichlet matrix sum_i lam_i D_i^T D_i h^N (the Hessian for p = (2, ..., 2))."""
    H = None
    for a, lam in zip(prob._ops, prob.lam):
        term = lam * (a.D.T @ a.D)
        H = term if H is None else H + term
    return (H * prob.vol).tocsc()


def gradient_norms(prob: DiscreteProblem, u, q=2.0, interior: bool = False):
    """Per-direction discrete L^q norms of the difference quotients of u.

    With interior=True each masked cell uses the forward difference when its
    forward neighbour is masked and the backward one otherwise, so the jump to
    the zero extension is not counted.
    """
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    qs = np.broadcast_to(qs, (prob.dim,)) if len(qs) in (1, prob.dim) else None
    if qs is None:
        raise ValueError("q must be a scalar or one exponent per direction")
    vol = prob.vol
    out = []
    if interior:
        U = u.values if isinstance(u, GridFunction) else prob.to_grid(prob.unknowns(u)).values
        M = prob.grid.mask
        for i in range(prob.dim):
            h = prob.grid.h[i]
            fw = np.zeros_like(U)
            bw = np.zeros_like(U)
            okf = np.zeros_like(M)
            okb = np.zeros_like(M)
            sl_a = [slice(None)] * prob.dim
            sl_b = [slice(None)] * prob.dim
            sl_a[i], sl_b[i] = slice(0, -1), slice(1, None)
            sa, sb = tuple(sl_a), tuple(sl_b)
            fw[sa] = (U[sb] - U[sa]) / h
            okf[sa] = M[sb] & M[sa]
            bw[sb] = (U[sb] - U[sa]) / h
            okb[sb] = M[sb] & M[sa]
            d = np.where(okf, fw, np.where(okb, bw, 0.0))[M]
            out.append(_lq(d, qs[i], vol))
        return out
    for a, qi in zip(prob._ops, qs):
        out.append(_lq(a.D @ prob.unknowns(u), qi, vol))
    return out


def _lq(d, q, vol):
    if math.isinf(q):
        return float(np.max(np.abs(d))) if len(d) else 0.0
    return float((np.sum(np.abs(d) ** q) * vol) ** (1 / q))


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 200
    method: str = "newton"
    eps_start: float = 1.0
    eps_min: float = 1e-8
    stage_tol: float = 1e-6
    armijo: float = 1e-4

    def __post_init__(self):
        if self.method not in ("newton", "ncg"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")


@dataclass
class SolveResult:
    u: GridFunction
    eps: float
    iterations: int
    history: list  # rows (iter, energy, residual, eps)
    runtime: float
    stalled: bool = False  # stopped because the energy no longer decreases in floating point

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "energy", "residual", "eps"])
            for row in self.history:
                w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def _schedule(prob: DiscreteProblem, opts: SolveOptions):
    if all(p == 2 for p in prob.p):
        return [prob.eps_reg]
    floor = prob.eps_reg if prob.eps_reg > 0 else opts.eps_min
    eps = [opts.eps_start]
    while eps[-1] >= floor and eps[-1] > 0:
        nxt = eps[-1] / 2
        if prob.eps_reg > 0 and nxt < prob.eps_reg:
            eps.append(prob.eps_reg)
            break
        eps.append(nxt)
    return eps


def solve(prob: DiscreteProblem, opts: SolveOptions | None = None, x0=None) -> SolveResult:
    """Minimize the discrete energy; eps-continuation unless every p_i equals 2.

    Stops when ||grad J|| <= tol ||grad J(0)|| at the final eps.  Raises
    SolverError with the last iterate when max_iter Newton/NCG steps per stage
    are exhausted.
    """
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    x = np.zeros(prob.n_unknowns) if x0 is None else prob.unknowns(x0).copy()
    history = []
    sched = _schedule(prob, opts)
    total = 0
    P = None
    stalled = []
    for k, eps in enumerate(sched):
        final = k == len(sched) - 1
        tol = opts.tol if final else max(opts.tol, opts.stage_tol)
        g0 = np.linalg.norm(_grad_x(prob, np.zeros_like(x), eps))
        if g0 == 0:
            x[:] = 0
            history.append((total, 0.0, 0.0, eps))
            continue
        if opts.method == "newton":
            x, it = _newton(prob, x, eps, tol * g0, opts, history, total, stalled)
        else:
            if P is None:
                P = spl.splu(assemble_laplacian(prob))
            x, it = _ncg(prob, x, eps, tol * g0, opts, history, total, P, stalled)
        total += it
    return SolveResult(prob.to_grid(x), sched[-1], total, history, time.perf_counter() - t0,
                       bool(stalled and stalled[-1] == sched[-1]))


def _line_search(prob, x, du, g, J0, eps, c):
    slope = float(g @ du)
    if slope >= 0:
        return None
    a = 1.0
    for _ in range(60):
        if _energy_x(prob, x + a * du, eps) <= J0 + c * a * slope:
            return a
        a *= 0.5
    return None


def _newton(prob, x, eps, atol, opts, history, it0, stalled):
    shift = 0.0 if eps > 0 or all(p <= 2 for p in prob.p) else 1e-12
    flat, J_prev = 0, math.inf
    for it in range(opts.max_iter + 1):
        g = _grad_x(prob, x, eps)
        J = _energy_x(prob, x, eps)
        history.append((it0 + it, J, float(np.max(np.abs(g)) / prob.vol), eps))
        if np.linalg.norm(g) <= atol:
            return x, it
        flat, J_prev = (flat + 1 if J >= J_prev else 0), J
        if flat >= 5:
            stalled.append(eps)
            return x, it
        if it == opts.max_iter:
            break
        H = _hess_x(prob, x, eps, shift)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", spl.MatrixRankWarning)
            du = spl.spsolve(H, -g)
        if not np.all(np.isfinite(du)):
            du = -g
        a = _line_search(prob, x, du, g, J, eps, opts.armijo)
        if a is None:
            a = _line_search(prob, x, -g, g, J, eps, opts.armijo)
            du = -g
            if a is None:
                # no decrease available at float precision
                stalled.append(eps)
                return x, it
        x = x + a * du
    raise SolverError(f"no convergence within {opts.max_iter} iterations at eps={eps:.3g}", x, history)


def _ncg(prob, x, eps, atol, opts, history, it0, P, stalled):
    g = _grad_x(prob, x, eps)
    z = P.solve(g)
    d = -z
    flat = 0
    for it in range(opts.max_iter + 1):
        J = _energy_x(prob, x, eps)
        history.append((it0 + it, J, float(np.max(np.abs(g)) / prob.vol), eps))
        if np.linalg.norm(g) <= atol:
            return x, it
        if it == opts.max_iter:
            break
        a = _line_search(prob, x, d, g, J, eps, opts.armijo)
        if a is None:
            d = -z
            a = _line_search(prob, x, d, g, J, eps, opts.armijo)
            if a is None:
                stalled.append(eps)
                return x, it
        x = x + a * d
        flat = flat + 1 if _energy_x(prob, x, eps) >= J else 0
        if flat >= 25:
            stalled.append(eps)
            return x, it
        g_new = _grad_x(prob, x, eps)
        z_new = P.solve(g_new)
        beta = max(0.0, float(g_new @ (z_new - z)) / float(g @ z))
        d = -z_new + beta * d
        g, z = g_new, z_new
    raise SolverError(f"no convergence within {opts.max_iter} iterations at eps={eps:.3g}", x, history)
