"""Profiles in the measure coordinate s: step functions, sampled functions and
radial functions on the ball of the same measure."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .young import omega


@dataclass(frozen=True, eq=False)
class StepProfile:
    """Right-continuous step function on (0, breaks[-1]].

    values[k] holds on [breaks[k], breaks[k+1]).
    """

    breaks: np.ndarray
    values: np.ndarray
    monotone: bool = False

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)
        if b.ndim != 1 or len(b) != len(v) + 1 or len(v) == 0:
            raise ValueError("need K+1 breakpoints for K values")
        if b[0] != 0 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if self.monotone and np.any(np.diff(v) > 0):
            raise ValueError("profile flagged non-increasing but values increase")

    @classmethod
    def constant(cls, value: float, measure: float) -> "StepProfile":
        return cls(np.array([0.0, measure]), np.array([float(value)]), True)

    @classmethod
    def from_widths(cls, widths, values, monotone=False) -> "StepProfile":
        return cls(np.concatenate([[0.0], np.cumsum(widths)]), values, monotone)

    @property
    def measure(self) -> float:
        return float(self.breaks[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breaks)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        k = np.searchsorted(self.breaks, s, side="right") - 1
        inside = (k >= 0) & (k < len(self.values))
        return np.where(inside, self.values[np.clip(k, 0, len(self.values) - 1)], 0.0)

    def left_limit(self, s):
        s = np.asarray(s, dtype=float)
        k = np.searchsorted(self.breaks, s, side="left") - 1
        inside = (k >= 0) & (k < len(self.values))
        return np.where(inside, self.values[np.clip(k, 0, len(self.values) - 1)], 0.0)

    def integral(self, s):
        """int_0^s of the profile, exact."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.measure)
        cum = np.concatenate([[0.0], np.cumsum(self.values * self.widths)])
        k = np.clip(np.searchsorted(self.breaks, s, side="right") - 1, 0, len(self.values) - 1)
        return cum[k] + self.values[k] * (s - self.breaks[k])

    def rearranged(self) -> "StepProfile":
        """Decreasing rearrangement of |profile|."""
        if self.monotone and np.all(self.values >= 0):
            return self
        a = np.abs(self.values)
        order = np.argsort(-a, kind="stable")
        return StepProfile.from_widths(self.widths[order], a[order], True)

    def compressed(self) -> "StepProfile":
        """Merge neighbouring pieces with equal values."""
        keep = np.concatenate([[True], np.diff(self.values) != 0])
        idx = np.nonzero(keep)[0]
        return StepProfile(np.concatenate([self.breaks[idx], [self.measure]]), self.values[idx], self.monotone)

    def padded(self, measure: float) -> "StepProfile":
        """Extend by zero up to `measure`."""
        if measure <= self.measure * (1 + 1e-14):
            return self
        return StepProfile(np.concatenate([self.breaks, [measure]]),
                           np.concatenate([self.values, [0.0]]),
                           self.monotone and self.values[-1] >= 0)

    def scaled(self, t: float) -> "StepProfile":
        return StepProfile(self.breaks, t * self.values, self.monotone and t >= 0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s_left", "s_right", "value"])
            for a, b, v in zip(self.breaks[:-1], self.breaks[1:], self.values):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "StepProfile":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(np.concatenate([[data[0, 0]], data[:, 1]]), data[:, 2])


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radial function on the ball of measure `measure`, indexed by s = omega_N |x|^N.

    `s` are nodes 0 = s_0 < ... < s_K = measure with nodal values; `kind`
    selects linear interpolation or right-continuous steps between nodes.
    `F` optionally keeps the barrier's gradient profile; `exact` is an optional
    evaluator used instead of interpolation between nodes.
    """

    s: np.ndarray
    values: np.ndarray
    N: int
    kind: str = "linear"
    blowup_exponent: float | None = None
    F: object | None = field(default=None, repr=False)
    exact: object | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def measure(self) -> float:
        return float(self.s[-1])

    def radius(self, s=None):
        s = self.s if s is None else np.asarray(s, dtype=float)
        return (s / omega(self.N)) ** (1.0 / self.N)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.exact is not None:
            return np.where(s < self.measure, self.exact(s), 0.0)
        if self.kind == "step":
            k = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(self.values) - 1)
            return np.where(s < self.measure, self.values[k], 0.0)
        return np.interp(s, self.s, self.values, right=0.0)

    def at_radius(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self(omega(self.N) * np.abs(rho) ** self.N)

    def support_measure(self) -> float:
        pos = np.nonzero(self.values > 0)[0]
        if len(pos) == 0:
            return 0.0
        k = pos[-1]
        return float(self.s[min(k + 1, len(self.s) - 1)])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "radius", "v"])
            for s, r, v in zip(self.s, self.radius(), self.values):
                w.writerow([repr(float(s)), repr(float(r)), repr(float(v)) if math.isfinite(v) else "inf"])
