"""Radial kernel profiles and the closed expression algebra behind them.

Every named kernel family is a finite sum of terms c * x**p * B(x) where the
base B is one of

    ("pois", b):  (1 + x^2)^(-b)        B' = -2b x (1 + x^2)^(-b-1)
    ("gauss", 0): exp(-x^2 / 2)         B' = -x exp(-x^2 / 2)
    ("bes", nu):  x^(-nu) J_nu(x)       B' = -x x^(-nu-1) J_(nu+1)(x)

so differentiation, multiplication by x, and the dilation generator
D phi = -(2 lambda + 1) phi - x phi' stay inside the algebra and every
derivative is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import LambdaSpace
from .special import fast_reduced_bessel, log_gamma

Term = tuple  # (p, kind, param)


class Expr:
    """Sparse linear combination of x**p * B(x) terms."""

    def __init__(self, terms=None):
        self.terms: dict[Term, float] = {}
        for key, c in (terms or {}).items():
            self._add(key, c)

    def _add(self, key, c):
        if c == 0:
            return
        v = self.terms.get(key, 0.0) + c
        if v == 0:
            self.terms.pop(key, None)
        else:
            self.terms[key] = v

    @classmethod
    def base(cls, kind, param=0.0, coef=1.0):
        return cls({(0, kind, float(param)): float(coef)})

    def __add__(self, other):
        out = Expr(self.terms)
        for k, c in other.terms.items():
            out._add(k, c)
        return out

    def scale(self, s):
        return Expr({k: s * c for k, c in self.terms.items()})

    def times_x(self, power=1):
        return Expr({(p + power, kind, q): c for (p, kind, q), c in self.terms.items()})

    def derivative(self):
        out = Expr()
        for (p, kind, q), c in self.terms.items():
            if p:
                out._add((p - 1, kind, q), p * c)
            if kind == "pois":
                out._add((p + 1, kind, q + 1.0), -2.0 * q * c)
            elif kind == "gauss":
                out._add((p + 1, kind, q), -c)
            elif kind == "bes":
                out._add((p + 1, kind, q + 1.0), -c)
            elif kind != "one":
                raise ValueError(kind)
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        cache = {}
        for (p, kind, q), c in self.terms.items():
            key = (kind, q)
            if key not in cache:
                cache[key] = _base_value(kind, q, x)
            out = out + c * (x ** p if p else 1.0) * cache[key]
        return out

    @property
    def oscillation(self) -> float:
        return 1.0 if any(kind == "bes" for (_, kind, _) in self.terms) else 0.0

    @property
    def decay(self) -> float:
        rates = []
        for (p, kind, q) in self.terms:
            if kind == "pois":
                rates.append(2 * q - p)
            elif kind == "bes":
                rates.append(q + 0.5 - p)
            elif kind == "one":
                rates.append(-p)
            else:
                rates.append(math.inf)
        return min(rates) if rates else math.inf

    @property
    def even(self) -> bool:
        return all(p % 2 == 0 for (p, _, _) in self.terms)


def _base_value(kind, q, x):
    if kind == "pois":
        return np.exp(-q * np.log1p(x * x))
    if kind == "gauss":
        return np.exp(-0.5 * x * x)
    if kind == "bes":
        return fast_reduced_bessel(q, x)
    if kind == "one":
        return np.ones_like(x)
    raise ValueError(kind)


def dilation_generator(space: LambdaSpace, e: Expr) -> Expr:
    """D phi = -(2 lambda + 1) phi - x phi', so that t d/dt phi_t = (D phi)_t."""
    return e.scale(-space.dim) + e.derivative().times_x().scale(-1.0)


@dataclass(frozen=True, eq=False)
class Profile:
    """A radial profile phi on (0, inf) with its first two derivatives.

    ``decay`` is a rate with |phi(x)| <~ x**-decay at infinity, ``oscillation``
    the angular frequency of any oscillating factor (0 if none), ``mass`` the
    integral of phi(y) y^{2 lambda} dy when known.
    """

    phi: Callable
    dphi: Callable
    d2phi: Callable
    label: str
    expr: Expr | None = None
    oscillation: float = 0.0
    decay: float = math.inf
    even: bool = True
    mass: float | None = None
    d3phi: Callable | None = None
    _env: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_expr(cls, e: Expr, label: str, mass=None) -> "Profile":
        d1 = e.derivative()
        d2 = d1.derivative()
        d3 = d2.derivative()
        return cls(e, d1, d2, label, expr=e, oscillation=e.oscillation, decay=e.decay,
                   even=e.even, mass=mass, d3phi=d3)

    def __call__(self, x):
        return self.phi(np.asarray(x, dtype=float))

    def third_derivative(self, x):
        if self.d3phi is not None:
            return self.d3phi(x)
        x = np.asarray(x, dtype=float)
        h = 1e-4 * np.maximum(x, 1e-3)
        return (self.d2phi(x + h) - self.d2phi(np.abs(x - h))) / (2 * h)

    def envelope(self, r):
        """Decreasing majorant of |phi| on [r, inf), conservative by a factor 2."""
        if "r" not in self._env:
            rr = np.geomspace(1e-4, 1e9, 3001)
            vals = np.abs(self.phi(rr))
            cm = np.maximum.accumulate(vals[::-1])[::-1]
            self._env["r"] = rr
            self._env["v"] = 2.0 * cm
        rr, vv = self._env["r"], self._env["v"]
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(rr, r, side="right") - 1, 0, rr.size - 1)
        out = vv[idx]
        if not math.isinf(self.decay):
            # beyond the table extend by the declared power law
            far = r > rr[-1]
            if np.any(far):
                out = np.where(far, vv[-1] * (r / rr[-1]) ** (-self.decay), out)
        else:
            out = np.where(r > rr[-1], 0.0, out)
        return out


def gamma_ratio_constant(space: LambdaSpace) -> float:
    """K = 2^{lambda - 1/2} Gamma(lambda + 1/2): h(f # g) = K h(f) h(g)."""
    lam = space.lam
    return math.exp((lam - 0.5) * math.log(2.0) + log_gamma(lam + 0.5))
