"""Closed-form radial profiles used by the scenario metrics.

The central object is the "capped Green tail" T: a C^2 radial profile
equal to r^(2-n) outside r_b, constant inside r_a, with

    Lap T = -(n-2) psi'(r) r^(1-n) <= 0   (psi a quintic smoothstep),

so u = 1 + c T is positive and superharmonic everywhere, the deviation
u - 1 has an exact r^(2-n) tail, and the conformally flat metric
u^(4/(n-2)) delta has pointwise non-negative scalar curvature with known
mass 2c.  (No compactly supported deviation can be superharmonic: its
Laplacian would have to be both <= 0 and of zero mean, forcing u to be
constant.  A genuine tail is unavoidable.)

A compactly supported dimple P with Lap P < 0 near its center is used to
carve pockets of negative curvature: u = 1 + c T - d P.
"""

from __future__ import annotations

import numpy as np


def smoothstep(t):
    """Quintic smoothstep: 0 -> 1 over [0, 1], C^2 at the ends."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def smoothstep_d1(t):
    tc = np.clip(t, 0.0, 1.0)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 30.0 * tc**2 * (tc - 1.0) ** 2, 0.0)


def smoothstep_d2(t):
    tc = np.clip(t, 0.0, 1.0)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 60.0 * tc * (2.0 * tc - 1.0) * (tc - 1.0), 0.0)


class CappedGreenTail:
    """T(r) = r^(2-n) for r >= r_b, constant for r <= r_a, superharmonic.

    T' = -(n-2) psi(r) r^(1-n) with psi the smoothstep over [r_a, r_b],
    hence Lap T = -(n-2) psi'(r) r^(1-n) is <= 0 and supported in the
    transition shell.  Values inside the shell come from a dense cached
    cumulative quadrature of T'.
    """

    def __init__(self, n: int, r_a: float, r_b: float, samples: int = 4001):
        if not r_b > r_a > 0:
            raise ValueError("need 0 < r_a < r_b")
        self.n = n
        self.r_a = float(r_a)
        self.r_b = float(r_b)
        grid = np.linspace(r_a, r_b, samples)
        dT = self.d1(grid)
        # cumulative trapezoid from r_b inward on a dense grid
        from scipy.integrate import cumulative_trapezoid
        cum = cumulative_trapezoid(dT, grid, initial=0.0)
        self._grid = grid
        self._vals = r_b ** (2.0 - n) + (cum - cum[-1])
        self.core_value = float(self._vals[0])

    def _t(self, r):
        return (np.asarray(r, dtype=float) - self.r_a) / (self.r_b - self.r_a)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        lo = r <= self.r_a
        hi = r >= self.r_b
        mid = ~(lo | hi)
        out[lo] = self.core_value
        out[hi] = r[hi] ** (2.0 - self.n)
        out[mid] = np.interp(r[mid], self._grid, self._vals)
        return out

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        return -(self.n - 2.0) * smoothstep(self._t(r)) * r ** (1.0 - self.n)

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        n = self.n
        psi = smoothstep(self._t(r))
        dpsi = smoothstep_d1(self._t(r)) / (self.r_b - self.r_a)
        return -(n - 2.0) * (dpsi * r ** (1.0 - n) + (1.0 - n) * psi * r ** (-float(n)))

    def laplacian(self, r):
        """Lap T = T'' + (n-1) T'/r = -(n-2) psi'(r) r^(1-n), exactly."""
        r = np.asarray(r, dtype=float)
        dpsi = smoothstep_d1(self._t(r)) / (self.r_b - self.r_a)
        return -(self.n - 2.0) * dpsi * r ** (1.0 - self.n)


class Dimple:
    """P(r) = (1 - (r/R)^2)^5 inside radius R, zero outside (C^4)."""

    def __init__(self, radius: float, power: int = 5):
        self.R = float(radius)
        self.k = int(power)

    def __call__(self, r):
        t = np.clip(np.asarray(r, dtype=float) / self.R, 0.0, 1.0)
        return (1.0 - t**2) ** self.k

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        t = r / self.R
        inside = t < 1.0
        val = -2.0 * self.k * (r / self.R**2) * (1.0 - t**2) ** (self.k - 1)
        return np.where(inside, val, 0.0)

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        t2 = (r / self.R) ** 2
        inside = t2 < 1.0
        k = self.k
        val = (-2.0 * k / self.R**2) * (1.0 - t2) ** (k - 2) * (1.0 - (2.0 * k - 1.0) * t2)
        return np.where(inside, val, 0.0)

    def laplacian(self, r, n: int):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(r > 0, self.d1(r) / r, self.d2(0.0))
        return self.d2(r) + (n - 1.0) * term


class GaussianBump:
    """exp(-(r/w)^2); smooth but NOT superharmonic beyond r^2 > n w^2 / 2."""

    def __init__(self, width: float = 1.0):
        self.w = float(width)

    def __call__(self, r):
        return np.exp(-(np.asarray(r, dtype=float) / self.w) ** 2)

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        return -2.0 * r / self.w**2 * self(r)

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        return (4.0 * r**2 / self.w**4 - 2.0 / self.w**2) * self(r)

    def laplacian(self, r, n: int):
        r = np.asarray(r, dtype=float)
        return (4.0 * r**2 / self.w**4 - 2.0 * n / self.w**2) * self(r)
