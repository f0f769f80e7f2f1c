"""Discrete rearrangements of grid functions.

Cell-level operations treat a grid function as piecewise constant on cells
(exact measure bookkeeping). `LatticeRearrangement` instead rearranges the
piecewise-linear interpolant of cell-centre values on the triangulated lattice,
whose gradient energy coincides with the forward-difference energy.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .profiles import RadialProfile, StepProfile
from .young import omega


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Cell values on a uniform grid over the box [lo, hi]; zero outside `mask`."""

    lo: tuple
    hi: tuple
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "lo", tuple(float(x) for x in self.lo))
        object.__setattr__(self, "hi", tuple(float(x) for x in self.hi))
        if v.shape != m.shape or v.ndim != len(self.lo) or len(self.lo) != len(self.hi):
            raise ValueError("values, mask and box must have matching dimensions")
        if any(b <= a for a, b in zip(self.lo, self.hi)):
            raise ValueError("box must have positive extent")
        if not m.any():
            raise ValueError("mask is empty: |Omega| must be positive")
        if not np.all(np.isfinite(v[m])):
            raise ValueError("values must be finite on the mask")

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def n(self) -> tuple:
        return self.values.shape

    @property
    def h(self) -> tuple:
        return tuple((b - a) / k for a, b, k in zip(self.lo, self.hi, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def measure(self) -> float:
        return float(self.mask.sum()) * self.cell_volume

    @property
    def masked(self) -> np.ndarray:
        """Values with zero extension outside the mask."""
        return np.where(self.mask, self.values, 0.0)

    def centers(self):
        axes = [a + (np.arange(k) + 0.5) * hh for a, k, hh in zip(self.lo, self.n, self.h)]
        return np.meshgrid(*axes, indexing="ij")

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.lo, self.hi, np.where(self.mask, values, 0.0), self.mask)

    def to_csv(self, path):
        """Columns: one index per axis, value, mask; box in a leading comment."""
        names = ["x_index", "y_index", "z_index"][: self.dim] if self.dim <= 3 else [f"i{k}" for k in range(self.dim)]
        with open(path, "w", newline="") as fh:
            fh.write(f"# lo={','.join(repr(x) for x in self.lo)} hi={','.join(repr(x) for x in self.hi)}\n")
            w = csv.writer(fh)
            w.writerow(names + ["value", "mask"])
            for idx in np.ndindex(*self.n):
                w.writerow(list(idx) + [repr(float(self.masked[idx])), int(self.mask[idx])])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path) as fh:
            head = fh.readline().strip()
        if not head.startswith("# lo="):
            raise ValueError(f"{path}: missing box comment line")
        lo_s, hi_s = head[2:].split(" ")
        lo = tuple(float(x) for x in lo_s[3:].split(","))
        hi = tuple(float(x) for x in hi_s[3:].split(","))
        data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
        d = len(lo)
        idx = data[:, :d].astype(int)
        n = tuple(idx.max(axis=0) + 1)
        vals = np.zeros(n)
        mask = np.zeros(n, dtype=bool)
        vals[tuple(idx.T)] = data[:, d]
        mask[tuple(idx.T)] = data[:, d + 1] > 0
        return cls(lo, hi, vals, mask)


def box_grid(lo, hi, h: float, values=0.0) -> GridFunction:
    """All cells of the box are in the domain."""
    n = tuple(int(round((b - a) / h)) for a, b in zip(lo, hi))
    return GridFunction(lo, hi, np.full(n, values, dtype=float), np.ones(n, dtype=bool))


def lattice_box(lo, hi, h: float, values=0.0) -> GridFunction:
    """Cells centred at the interior lattice nodes of the box [lo, hi].

    The zero extension then lives exactly on the boundary of the box, so the
    interpolant (and the difference energy) sees the true domain rather than
    one shifted outward by half a cell.
    """
    n = tuple(int(round((b - a) / h)) - 1 for a, b in zip(lo, hi))
    if min(n) < 1:
        raise ValueError("box must contain at least one interior node")
    lo2 = tuple(a + h / 2 for a in lo)
    hi2 = tuple(b - h / 2 for b in hi)
    return GridFunction(lo2, hi2, np.full(n, values, dtype=float), np.ones(n, dtype=bool))


def ball_grid(h: float, radius: float = 1.0, dim: int = 2, center=None) -> GridFunction:
    """Inscribed-cell mask of a ball: a cell belongs to the domain iff it lies inside."""
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    k = int(math.ceil(radius / h))
    lo = tuple(center - k * h)
    hi = tuple(center + k * h)
    n = (2 * k,) * dim
    g = GridFunction(lo, hi, np.zeros(n), np.ones(n, dtype=bool))
    far = sum((np.abs(x - c) + h / 2) ** 2 for x, c in zip(g.centers(), center))
    return GridFunction(lo, hi, np.zeros(n), far < radius**2)


# ---------------------------------------------------------------------------
# cell-level rearrangements


def distribution_function(u: GridFunction, t):
    """mu_u(t) = measure of masked cells with |u| > t."""
    a = np.sort(np.abs(u.values[u.mask]))
    t = np.asarray(t, dtype=float)
    return (len(a) - np.searchsorted(a, t, side="right")) * u.cell_volume


def decreasing_rearrangement(u: GridFunction) -> StepProfile:
    """Sorted-descending |u| over masked cells as a step profile on (0, |Omega|]."""
    a = np.sort(np.abs(u.values[u.mask]))[::-1]
    b = np.arange(len(a) + 1) * u.cell_volume
    return StepProfile(b, a, True)


@dataclass(frozen=True)
class DoubleStar:
    """u**(s) = (1/s) int_0^s u*, exact from step data; u**(0) = u*(0+)."""

    profile: StepProfile

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(all="ignore"):
            out = self.profile.integral(s) / s
        return np.where(s > 0, out, self.profile.values[0])


def double_star(p: StepProfile) -> DoubleStar:
    if not p.monotone:
        p = p.rearranged()
    return DoubleStar(p)


def symmetric_rearrangement(u: GridFunction) -> RadialProfile:
    """u_star(x) = u*(omega_N |x|^N), kept as a step profile in s."""
    p = decreasing_rearrangement(u).compressed()
    return RadialProfile(p.breaks, np.concatenate([p.values, [0.0]]), u.dim, kind="step")


def cell_order(u: GridFunction, reverse_ties: bool = False) -> np.ndarray:
    """Masked cells ordered by |u| descending, ties by linear index."""
    a = np.abs(u.values[u.mask])
    idx = np.arange(len(a))
    if reverse_ties:
        return np.lexsort((-idx, -a))
    return np.lexsort((idx, -a))


def pseudo_rearrangement(h: GridFunction, u: GridFunction, reverse_ties: bool = False) -> StepProfile:
    """G(s): value of h on the cell swept at measure s when cells are taken by decreasing |u|."""
    if h.values.shape != u.values.shape or not np.array_equal(h.mask, u.mask):
        raise ValueError("h and u must live on the same masked grid")
    order = cell_order(u, reverse_ties)
    vals = h.values[h.mask][order]
    b = np.arange(len(vals) + 1) * u.cell_volume
    return StepProfile(b, vals, False)


# ---------------------------------------------------------------------------
# piecewise-linear interpolant on the triangulated lattice of cell centres


def _simplex_tail(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """P(l > t) for l linear on a simplex with sorted vertex values x (S, N+1), levels t (T,).

    Equal to the divided difference [x_0..x_N] (y - t)_+^N; repeated knots use
    C(N, m) (x - t)_+^(N - m). Knots closer than 1e-9 of the simplex spread are
    merged. Result has shape (S, T).
    """
    S, n1 = x.shape
    N = n1 - 1
    spread = x[:, -1] - x[:, 0]
    x = x.copy()
    for k in range(1, n1):
        close = x[:, k] - x[:, k - 1] <= 1e-9 * spread
        x[:, k] = np.where(close, x[:, k - 1], x[:, k])
    X = x[:, :, None]
    tt = t[None, None, :]
    pos = np.maximum(X - tt, 0.0)
    D = [pos[:, i] ** N for i in range(n1)]
    for m in range(1, n1):
        conf = pos ** (N - m) if N > m else (X > tt).astype(float)
        c = math.comb(N, m)
        nxt = []
        for i in range(n1 - m):
            gap = (x[:, i + m] - x[:, i])[:, None]
            with np.errstate(all="ignore"):
                dd = (D[i + 1] - D[i]) / gap
            nxt.append(np.where(gap > 0, dd, c * conf[:, i]))
        D = nxt
    return np.clip(D[0], 0.0, 1.0)


class SimplexRearrangement:
    """Exact distribution function of |P1 interpolant| of a grid function in any dimension.

    Cell centres are lattice nodes and unmasked neighbours carry 0. Each dual
    cube is split into N! Kuhn simplices along its main diagonal (in two
    dimensions this is the split used by LatticeRearrangement). The domain is
    the union of simplices with a masked vertex.
    """

    def __init__(self, u: GridFunction):
        N = u.dim
        U = np.pad(u.masked, 1)
        M = np.pad(u.mask, 1)
        cu, cm = [], []
        for c in range(2**N):
            sl = tuple(slice(1, None) if (c >> i) & 1 else slice(0, -1) for i in range(N))
            cu.append(U[sl].ravel())
            cm.append(M[sl].ravel())
        cu, cm = np.stack(cu, 1), np.stack(cm, 1)
        live = cm.any(axis=1)
        cu, cm = cu[live], cm[live]
        vals, inside = [], []
        for pi in itertools.permutations(range(N)):
            corners = [0]
            for ax in pi:
                corners.append(corners[-1] | (1 << ax))
            vals.append(cu[:, corners])
            inside.append(cm[:, corners].any(axis=1))
        V = np.concatenate(vals)
        inside = np.concatenate(inside)
        self.dim = N
        self.volume = float(np.prod(u.h)) / math.factorial(N)
        self.domain_measure = float(inside.sum()) * self.volume
        V = np.concatenate([V, -V])  # |u| > t  <=>  u > t or -u > t
        V = np.sort(V[V.max(axis=1) > 0], axis=1)
        self._V = V
        self._lo_sorted = np.sort(V[:, 0])
        self.max = float(np.abs(U).max())

    def mu(self, t, chunk: int = 32):
        """|{|u| > t}| for an array of levels t >= 0."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        order = np.argsort(t)
        ts = t[order]
        V = self._V
        lo, hi = V[:, 0], V[:, -1]
        full = (len(lo) - np.searchsorted(self._lo_sorted, ts, side="right")) * self.volume
        part = np.zeros_like(ts)
        for k in range(0, len(ts), chunk):
            tk = ts[k:k + chunk]
            sel = (lo <= tk[-1]) & (hi > tk[0])
            if not sel.any():
                continue
            P = _simplex_tail(V[sel], tk)
            P = np.where(lo[sel, None] > tk[None, :], 0.0, P)  # counted in `full`
            part[k:k + chunk] = self.volume * P.sum(axis=0)
        out = np.empty_like(ts)
        out[order] = full + part
        return out

    def levels(self, n_uniform: int = 1024, n_top: int = 256):
        """Level grid: uniform in (0, max) plus geometric refinement near the maximum."""
        m = self.max
        if m == 0:
            return np.array([0.0])
        top = m * (1 - np.geomspace(1e-9, 1, n_top))
        return np.unique(np.concatenate([np.linspace(0, m, n_uniform + 1)[:-1], top, [m]]))

    def profile(self, levels=None):
        """Pairs (s_j, t_j) with s_j = mu(t_j): points on the graph of u*."""
        t = self.levels() if levels is None else np.asarray(levels, dtype=float)
        return self.mu(t), t


def _triangles(U: np.ndarray):
    """Vertex values of both triangles of every lattice square of a padded array.

    Square (i, j) with corners a=(i,j), b=(i+1,j), c=(i+1,j+1), d=(i,j+1) is
    split into (a, b, c) and (a, d, c).
    """
    a, b = U[:-1, :-1], U[1:, :-1]
    c, d = U[1:, 1:], U[:-1, 1:]
    return np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3),
                           np.stack([a, d, c], -1).reshape(-1, 3)])


class LatticeRearrangement:
    """Exact distribution function of |P1 interpolant| of a 2-D grid function.

    Cell centres are lattice nodes; nodes outside the mask carry 0. The domain
    of the interpolant is the union of triangles with at least one masked node,
    whose measure is `domain_measure`.
    """

    def __init__(self, u: GridFunction):
        if u.dim != 2:
            raise ValueError("lattice rearrangement is implemented for two dimensions")
        hx, hy = u.h
        self.area = 0.5 * hx * hy
        self.h = (hx, hy)
        U = np.pad(u.masked, 1)
        M = np.pad(u.mask.astype(float), 1)
        self._U = U
        self.domain_measure = float((_triangles(M).max(axis=1) > 0).sum()) * self.area
        T = _triangles(U)
        T = np.concatenate([T, -T])  # |u| > t  <=>  u > t or -u > t
        T = T[T.max(axis=1) > 0]
        self._T = np.sort(T, axis=1)
        self._a_sorted = np.sort(self._T[:, 0])
        self.max = float(np.abs(U).max())

    def gradients(self, signed_values: np.ndarray | None = None):
        """Constant gradients of the interpolant on every triangle, shape (T, 2)."""
        U = self._U
        hx, hy = self.h
        a, b = U[:-1, :-1], U[1:, :-1]
        c, d = U[1:, 1:], U[:-1, 1:]
        g1 = np.stack([(b - a) / hx, (c - b) / hy], -1).reshape(-1, 2)
        g2 = np.stack([(c - d) / hx, (d - a) / hy], -1).reshape(-1, 2)
        return np.concatenate([g1, g2])

    def mu(self, t, chunk: int = 64):
        """|{|u| > t}| for an increasing or arbitrary array of levels t >= 0."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        order = np.argsort(t)
        ts = t[order]
        T = self._T
        a, b, c = T[:, 0], T[:, 1], T[:, 2]
        full = (len(a) - np.searchsorted(self._a_sorted, ts, side="right")) * self.area
        part = np.zeros_like(ts)
        for k in range(0, len(ts), chunk):
            tk = ts[k:k + chunk]
            sel = (a <= tk[-1]) & (c > tk[0]) & (c > a)
            if not sel.any():
                continue
            A, B, C = a[sel, None], b[sel, None], c[sel, None]
            tt = tk[None, :]
            with np.errstate(all="ignore"):
                lower = 1 - (tt - A) ** 2 / ((B - A) * (C - A))
                upper = (C - tt) ** 2 / ((C - A) * (C - B))
            phi = np.where(tt < A, 0.0, np.where(tt < B, lower, np.where(tt < C, upper, 0.0)))
            part[k:k + chunk] = self.area * np.nansum(phi, axis=0)
        out = np.empty_like(ts)
        out[order] = full + part
        return out

    def levels(self, n_uniform: int = 4096, n_top: int = 512):
        """Level grid: uniform in (0, max) plus geometric refinement near the maximum."""
        m = self.max
        if m == 0:
            return np.array([0.0])
        top = m * (1 - np.geomspace(1e-9, 1, n_top))
        return np.unique(np.concatenate([np.linspace(0, m, n_uniform + 1)[:-1], top, [m]]))

    def profile(self, levels=None):
        """Pairs (s_j, t_j) with s_j = mu(t_j): points on the graph of u*."""
        t = self.levels() if levels is None else np.asarray(levels, dtype=float)
        return self.mu(t), t

    def u_star(self, s, levels=None):
        """u*(s) by monotone interpolation of the level table."""
        sj, tj = self.profile(levels)
        return np.interp(np.asarray(s, dtype=float), sj[::-1], tj[::-1], right=0.0)

    def symmetric(self, levels=None) -> RadialProfile:
        sj, tj = self.profile(levels)
        order = np.argsort(sj)
        s, v = sj[order], tj[order]
        s, idx = np.unique(s, return_index=True)
        v = v[idx]
        if s[0] > 0:
            s = np.concatenate([[0.0], s])
            v = np.concatenate([[self.max], v])
        if s[-1] < self.domain_measure:
            s = np.concatenate([s, [self.domain_measure]])
            v = np.concatenate([v, [0.0]])
        return RadialProfile(s, v, 2)

    def gradient_energy_star(self, phi_diamond, levels=None) -> float:
        """Lower quadrature of int Phi_diamond(|grad u_star|) over level bands.

        On each band the weight N omega_N^{1/N} s^{1/N'} is taken at the band's
        smaller s and Jensen's inequality is applied, so the value never exceeds
        the exact integral for the interpolant.
        """
        t = self.levels() if levels is None else np.asarray(levels, dtype=float)
        s = self.mu(t)
        ds = s[:-1] - s[1:]
        dt = np.diff(t)
        ok = ds > 0
        w = 2 * math.sqrt(omega(2)) * np.sqrt(s[1:][ok])
        return float(np.sum(ds[ok] * phi_diamond(w * dt[ok] / ds[ok])))
