"""Bessel functions, log-gamma and Gauss-Jacobi rules.

Thin validated wrappers over scipy.special plus a hand-rolled Golub-Welsch
solver for the symmetric Jacobi weight (1-u^2)^a, which is all the angular
quadrature of the Hankel translation needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special


class DomainError(ValueError):
    """Raised when an argument lies outside the supported domain."""


def _as_float_array(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def bessel_j(nu, x):
    """J_nu(x) for real nu >= -1/2 and x >= 0.

    Broadcasts over array inputs. Returns a Python float for scalar input.
    """
    nu_a = _as_float_array(nu, "nu")
    x_a = _as_float_array(x, "x")
    if np.any(nu_a < -0.5):
        raise DomainError("bessel_j requires nu >= -1/2")
    if np.any(x_a < 0):
        raise DomainError("bessel_j requires x >= 0")
    out = np.asarray(special.jv(nu_a, x_a), dtype=float)
    # jv underflows to 0 for subnormal x even when x^nu is not small
    tiny = np.broadcast_to((x_a > 0) & (x_a < 1e-3), out.shape)
    if np.any(tiny):
        nb = np.broadcast_to(nu_a, out.shape)[tiny]
        xb = np.broadcast_to(x_a, out.shape)[tiny]
        out = out.copy()
        out[tiny] = np.exp(nb * np.log(xb)) * _reduced_bessel_unchecked(nb, xb)
    return float(out) if np.ndim(out) == 0 else out


def _reduced_bessel_unchecked(nu, x):
    # x^{-nu} J_nu(x), continuous at 0 with value 1/(2^nu Gamma(nu+1)).
    x = np.asarray(x, dtype=float)
    out = np.empty(np.broadcast(nu, x).shape)
    nu_b = np.broadcast_to(nu, out.shape)
    x_b = np.broadcast_to(x, out.shape)
    small = x_b < 1e-3
    big = ~small
    if np.any(big):
        xb = x_b[big]
        nb = nu_b[big]
        out[big] = special.jv(nb, xb) * np.exp(-nb * np.log(xb))
    if np.any(small):
        xs = x_b[small]
        ns = nu_b[small]
        q = -0.25 * xs * xs
        term = np.exp(-ns * np.log(2.0) - special.gammaln(ns + 1.0))
        acc = term.copy()
        for k in range(1, 6):
            term = term * q / (k * (ns + k))
            acc += term
        out[small] = acc
    return out


def reduced_bessel(nu, x):
    """x^{-nu} J_nu(x), the entire function with the removable point at 0."""
    nu_a = _as_float_array(nu, "nu")
    x_a = _as_float_array(x, "x")
    if np.any(nu_a < -0.5):
        raise DomainError("reduced_bessel requires nu >= -1/2")
    if np.any(x_a < 0):
        raise DomainError("reduced_bessel requires x >= 0")
    out = _reduced_bessel_unchecked(nu_a, x_a)
    return float(out) if np.ndim(out) == 0 else out


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    x_a = _as_float_array(x, "x")
    if np.any(x_a <= 0):
        raise DomainError("log_gamma requires x > 0")
    out = special.gammaln(x_a)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss rule for the weight (1-u^2)^exponent on (-1, 1)."""

    nodes: np.ndarray
    weights: np.ndarray
    exponent: float

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ValueError("node and weight counts differ")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self):
        return self.nodes.size

    def integrate(self, values):
        """Apply the rule along the last axis of ``values``."""
        return np.asarray(values) @ self.weights


def jacobi_mass(exponent):
    """Integral of (1-u^2)^exponent over (-1, 1)."""
    a = float(exponent)
    return float(np.exp(0.5 * np.log(np.pi) + special.gammaln(a + 1.0) - special.gammaln(a + 1.5)))


def gauss_jacobi(n, exponent):
    """n-point Gauss rule for (1-u^2)^exponent via Golub-Welsch.

    The monic recurrence for the symmetric Jacobi weight has zero diagonal and
    off-diagonal sqrt(beta_k), beta_1 = 1/(2a+3) and
    beta_k = k(k+2a) / ((2k+2a)^2 - 1) for k >= 2.
    """
    n = int(n)
    a = float(exponent)
    if n < 1:
        raise DomainError("gauss_jacobi requires n >= 1")
    if not a > -1:
        raise DomainError("gauss_jacobi requires exponent > -1")
    mu0 = jacobi_mass(a)
    if n == 1:
        return QuadratureRule(np.zeros(1), np.array([mu0]), a)
    k = np.arange(1, n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = k * (k + 2 * a) / ((2 * k + 2 * a) ** 2 - 1.0)
    beta[0] = 1.0 / (2 * a + 3.0)
    try:
        nodes, vecs = linalg.eigh_tridiagonal(np.zeros(n), np.sqrt(beta))
    except linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"Golub-Welsch eigen-solve failed for n={n}") from exc
    weights = mu0 * vecs[0] ** 2
    # symmetrize: the weight is even, so the rule must be too
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return QuadratureRule(nodes, weights, a)


class ReducedBesselTable:
    """Fast x^{-nu} J_nu(x) for a fixed order, tabulated once.

    Near the origin a cubic Hermite interpolant of the reduced function itself
    (exact derivative -x g_{nu+1}); beyond r1 the modulus/phase form
    J = M cos(theta) with sqrt(pi r / 2) M and theta - r splined in s = 1/r,
    both of which tend to constants as r grows.  Both pieces live on uniform
    grids so lookup is a direct index.
    """

    def __init__(self, nu: float, step: float = 1.0 / 256, n_far: int = 4096):
        from scipy.interpolate import CubicSpline

        self.nu = float(nu)
        nu = self.nu
        self.r1 = float(max(20.0, nu * nu, 2.0 * nu))
        n_near = int(math.ceil(self.r1 / step))
        self._step = self.r1 / n_near
        r = self._step * np.arange(n_near + 1)
        g = _reduced_bessel_unchecked(nu, r)
        dg = -r * _reduced_bessel_unchecked(nu + 1.0, r) * self._step
        # Hermite cell polynomials in local t in [0, 1]
        self._near = np.stack([g[:-1], dg[:-1],
                               3 * (g[1:] - g[:-1]) - 2 * dg[:-1] - dg[1:],
                               2 * (g[:-1] - g[1:]) + dg[:-1] + dg[1:]])
        s = np.linspace(0.0, 1.0 / self.r1, n_far)
        self._ds = s[1]
        rr = 1.0 / s[1:]
        j = special.jv(nu, rr)
        y = special.yv(nu, rr)
        amp = np.hypot(j, y) * np.sqrt(0.5 * np.pi * rr)
        ref = -(2.0 * nu + 1.0) * np.pi / 4.0
        ph = np.mod(np.arctan2(y, j) - rr - ref + np.pi, 2 * np.pi) - np.pi + ref
        self._amp = CubicSpline(s, np.concatenate([[1.0], amp])).c
        self._phase = CubicSpline(s, np.concatenate([[ref], ph])).c

    @staticmethod
    def _ppoly(c, i, t):
        return ((c[0, i] * t + c[1, i]) * t + c[2, i]) * t + c[3, i]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        near = x <= self.r1
        if np.any(near):
            u = x[near] / self._step
            i = np.minimum(u.astype(np.int64), self._near.shape[1] - 1)
            t = u - i
            c = self._near
            out[near] = ((c[3, i] * t + c[2, i]) * t + c[1, i]) * t + c[0, i]
        far = ~near
        if np.any(far):
            xf = x[far]
            s = 1.0 / xf
            u = s / self._ds
            i = np.minimum(u.astype(np.int64), self._amp.shape[1] - 1)
            t = (u - i) * self._ds
            m = self._ppoly(self._amp, i, t) * np.sqrt(2.0 / np.pi) / np.sqrt(xf)
            out[far] = m * np.cos(xf + self._ppoly(self._phase, i, t)) * xf ** (-self.nu)
        return out


_TABLES: dict = {}


def fast_reduced_bessel(nu, x):
    """Tabulated x^{-nu} J_nu(x); tables are built once per order and then read-only."""
    key = float(nu)
    table = _TABLES.get(key)
    if table is None:
        table = _TABLES.setdefault(key, ReducedBesselTable(key))
    return table(x)
