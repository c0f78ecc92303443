"""Admissibility checks for profiles.

check_z_lambda measures the three pointwise decay constants of the class Z^lam
and watches their growth decade by decade.  check_variation_admissible
evaluates the five integral conditions that make the variation operator
bounded; every integral is accumulated decade by decade in its outer variable
and classified from the decay of those increments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import LambdaSpace, LogGrid
from .profiles import Profile

_GX, _GW = np.polynomial.legendre.leggauss(16)


# ---------------------------------------------------------------------------
# Z^lambda


@dataclass
class ZReport:
    constants: dict
    passed: bool
    violated: list = field(default_factory=list)
    worst_x: dict = field(default_factory=dict)

    @property
    def C_i(self):
        return self.constants["i"]

    @property
    def C_ii(self):
        return self.constants["ii"]

    @property
    def C_iii(self):
        return self.constants["iii"]


def z_lambda_products(space: LambdaSpace, prof: Profile, x):
    """The three products whose sups are the Z^lam constants."""
    x = np.asarray(x, dtype=float)
    lam = space.lam
    q = 1.0 + x * x
    return {
        "i": np.abs(prof.phi(x)) * q ** (lam + 1),
        "ii": np.abs(prof.dphi(x)) * q ** (lam + 2) / x,
        "iii": np.abs(prof.d2phi(x)) * q ** (lam + 2),
    }


def check_z_lambda(space: LambdaSpace, prof: Profile, xgrid: LogGrid | None = None, *, cap=1e12,
                   growth=0.05) -> ZReport:
    """Sup of each product over the grid, failing on a cap or sustained growth.

    A product that still grows by more than ``growth`` in log10 per decade over
    the last three decades of the grid is reported as unbounded.
    """
    if xgrid is None:
        xgrid = LogGrid(1e-3, 1e6, 32)
    x = xgrid.nodes
    prods = z_lambda_products(space, prof, x)
    ppd = xgrid.points_per_decade
    consts, worst, violated = {}, {}, []
    for key, v in prods.items():
        i = int(np.argmax(v))
        consts[key] = float(v[i])
        worst[key] = float(x[i])
        # decade maxima over the top three decades
        nd = int(round(ppd))
        tops = [v[max(0, x.size - (k + 1) * nd):x.size - k * nd].max() for k in range(4)][::-1]
        tops = np.log10(np.maximum(tops, 1e-300))
        grows = bool(np.all(np.diff(tops) > growth))
        if not np.isfinite(consts[key]) or consts[key] > cap or grows:
            violated.append(key)
    return ZReport(consts, not violated, violated, worst)


# ---------------------------------------------------------------------------
# decade accumulation


@dataclass
class IntegralReport:
    value: float
    status: str  # "finite", "infinite" or "inconclusive"
    increments: np.ndarray = field(repr=False, default=None)


def classify(increments, *, rel=1e-12, ratio_max=0.95) -> IntegralReport:
    """Classify a sum of non-negative per-decade increments.

    Finite: the last increments vanish or shrink geometrically (the tail is
    then extrapolated as d r / (1 - r)).  Infinite: they do not shrink.
    """
    d = np.asarray(increments, dtype=float)
    total = float(d.sum())
    if not np.all(np.isfinite(d)):
        return IntegralReport(math.inf, "infinite", d)
    if total == 0 or np.all(d[-3:] <= rel * max(total, 1e-300)):
        return IntegralReport(total, "finite", d)
    last = d[-4:]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = last[1:] / last[:-1]
    if np.all(r < ratio_max) and np.all(np.isfinite(r)):
        rho = float(r[-1])
        return IntegralReport(total + float(d[-1]) * rho / (1 - rho), "finite", d)
    if np.all(r >= ratio_max):
        return IntegralReport(math.inf, "infinite", d)
    return IntegralReport(total, "inconclusive", d)


def _decade_panels(a, b, per_decade=4):
    """Gauss-Legendre nodes and weights on [a, b] with log-spaced panels."""
    n = max(1, int(math.ceil(per_decade * math.log10(b / a))))
    e = np.exp(np.linspace(math.log(a), math.log(b), n + 1))
    lo, hi = e[:-1, None], e[1:, None]
    y = 0.5 * (hi - lo) * _GX + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * _GW
    return y.ravel(), w.ravel()


def decade_integral(fn, lo_exp=-8, hi_exp=8, per_decade=4):
    """Per-decade integrals of fn over [10^k, 10^{k+1}], plus the piece below 10^lo_exp."""
    incs = []
    for k in range(lo_exp, hi_exp):
        y, w = _decade_panels(10.0 ** k, 10.0 ** (k + 1), per_decade)
        incs.append(float(np.sum(np.abs(fn(y)) * w)))
    return np.array(incs)


def radial_tail(space: LambdaSpace, g, z, *, per_unit=3, w_min=1e-12, w_max=1e12):
    """int_{z}^inf (r^2 - z^2)^{lam - 1} g(r) dr for each z >= 0, vectorized over z.

    Panels in log(r - z) resolve the endpoint factor (r - z)^{lam - 1}.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    lam = space.lam
    lo, hi = math.log(w_min), math.log(w_max)
    n = int(math.ceil(per_unit * (hi - lo)))
    e = np.linspace(lo, hi, n + 1)
    a, b = e[:-1, None], e[1:, None]
    s = (0.5 * (b - a) * _GX + 0.5 * (b + a)).ravel()
    ws = (0.5 * (b - a) * _GW).ravel()
    w = np.exp(s)
    out = np.empty(z.size)
    for i, zi in enumerate(z):
        r = zi + w
        vals = (w * (2 * zi + w)) ** (lam - 1) * np.asarray(g(r), dtype=float) * w
        # g frozen at r = z below w_min; at z = 0 the piece is O(w_min^{2 lam}) and dropped
        head = 0.0 if zi == 0 else \
            (2 * zi) ** (lam - 1) * float(np.asarray(g(np.array([zi])))[0]) * w_min ** lam / lam
        out[i] = float(np.sum(vals * ws)) + head
    return out


# ---------------------------------------------------------------------------
# the tail profile Phi


@dataclass
class TailProfile:
    """Phi(z) = int_0^inf u^{lam-1} phi(sqrt(z^2 + u)) du, even in z, with Phi'."""

    space: LambdaSpace
    prof: Profile
    diverges: bool = False

    def __call__(self, z):
        z = np.abs(np.atleast_1d(np.asarray(z, dtype=float)))
        if self.diverges:
            return np.full(z.shape, math.inf)
        return 2.0 * radial_tail(self.space, lambda r: r * self.prof.phi(r), z)

    def derivative(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self.diverges:
            return np.full(z.shape, math.nan)
        return 2.0 * z * radial_tail(self.space, self.prof.dphi, np.abs(z))


def variation_tail_profile(space: LambdaSpace, prof: Profile, *, eps=0.05) -> TailProfile:
    """The even function Phi.

    Phi(0) = 2 int s^{2 lam - 1} phi(s) ds, so Phi is flagged divergent when the
    envelope of |phi| s^{2 lam} does not decay at least like s^{-eps} over
    the last three decades below 1e9.
    """
    s = np.geomspace(1e6, 1e9, 61)
    v = np.abs(prof.phi(s)) * s ** (2 * space.lam + eps)
    env = np.maximum.accumulate(v[::-1])[::-1]
    if env[0] == 0:
        return TailProfile(space, prof)
    slope = np.polyfit(np.log(s), np.log(np.maximum(env, 1e-300)), 1)[0]
    return TailProfile(space, prof, diverges=bool(slope > -1e-6))


# ---------------------------------------------------------------------------
# conditions (a)-(e)


@dataclass
class AdmissibilityReport:
    results: dict

    @property
    def passed(self) -> bool:
        return all(r.status == "finite" for r in self.results.values())

    def summary(self) -> dict:
        return {k: (r.status, r.value) for k, r in self.results.items()}


def _derivative(prof: Profile, k):
    return (prof.phi, prof.dphi, prof.d2phi)[k]


def _cond_a(space, prof, k):
    dk = _derivative(prof, k)
    incs = decade_integral(lambda x: np.abs(dk(x)) * x ** (2 * space.lam + k))
    return classify(incs)


def _inner_u(space, g, L, s):
    """int_L^inf u^{lam-1} g(s + u) du for arrays L, s (same shape), L >= 0."""
    lam = space.lam
    out = np.zeros(L.shape)
    # u = L + w, log panels in w; the factor (L + w)^{lam - 1} is smooth unless L = 0
    lo, hi = -14.0, 14.0 * math.log(10)
    e = np.linspace(lo * math.log(10), hi, 3 * 60 + 1)
    a, b = e[:-1, None], e[1:, None]
    sg = (0.5 * (b - a) * _GX + 0.5 * (b + a)).ravel()
    wg = (0.5 * (b - a) * _GW).ravel()
    w = np.exp(sg)
    for idx in np.ndindex(L.shape):
        u = L[idx] + w
        out[idx] = float(np.sum(u ** (lam - 1) * g(s[idx] + u) * w * wg))
    return out


def _cond_b(space, prof, k, lo_exp=-6, hi_exp=6):
    lam = space.lam
    dk = _derivative(prof, k)

    def g(q):
        return np.abs(dk(np.sqrt(q))) / q ** (k / 2)

    # v in (1/2, 2) split at the singular point 1, panels in log|1 - v|
    gx8, gw8 = np.polynomial.legendre.leggauss(8)
    v_parts, j_parts = [], []
    for sign, top in ((-1.0, 0.5), (1.0, 1.0)):
        e = np.linspace(math.log(1e-10), math.log(top), 24)
        a, b = e[:-1, None], e[1:, None]
        sg = (0.5 * (b - a) * gx8 + 0.5 * (b + a)).ravel()
        dv = np.exp(sg)
        v_parts.append(1.0 + sign * dv)
        j_parts.append(dv * (0.5 * (b - a) * gw8).ravel())
    v = np.concatenate(v_parts)
    jac = np.concatenate(j_parts)
    fac = v ** lam / np.abs(1 - v) * jac

    incs = []
    for kk in range(lo_exp, hi_exp):
        s, ws = _decade_panels(10.0 ** kk, 10.0 ** (kk + 1), 2)
        S, V = np.meshgrid(s, v, indexing="ij")
        L = np.pi ** 2 * V * S / (4 * (1 - V) ** 2)
        inner = _inner_u(space, g, L, S)
        val = np.sum(ws[:, None] * s[:, None] ** (k - 0.5) * inner * fac[None, :])
        incs.append(float(val))
    return classify(incs)


def _cond_c(space, prof):
    def integrand(z):
        return z * z * 2.0 * radial_tail(space, lambda r: np.abs(prof.dphi(r)), z, per_unit=2)

    return classify(decade_integral(integrand, -6, 6, per_decade=2))


def _cond_d(space, tail: TailProfile):
    if tail.diverges:
        return IntegralReport(math.inf, "infinite")
    z = 10.0 ** np.arange(0, 7)
    v = np.abs(tail(z))
    ref = max(float(np.abs(tail(np.array([0.0])))[0]), 1e-300)
    if v[-1] <= 1e-6 * ref and v[-1] <= v[-3]:
        return IntegralReport(float(v[-1]), "finite")
    if v[-1] >= 0.5 * v[-3]:
        return IntegralReport(float(v[-1]), "infinite")
    return IntegralReport(float(v[-1]), "inconclusive")


def _cond_e(space, tail: TailProfile):
    if tail.diverges:
        return IntegralReport(math.inf, "infinite")

    def integrand(u):
        return np.abs(tail(u)) + u * np.abs(tail.derivative(u))

    return classify(decade_integral(integrand, -6, 6, per_decade=2))


def check_variation_admissible(space: LambdaSpace, prof: Profile, *, conditions="abcde") -> AdmissibilityReport:
    """Evaluate conditions (a)-(e); (a) and (b) carry one entry per derivative order."""
    res = {}
    if "a" in conditions:
        for k in (0, 1, 2):
            res[f"a{k}"] = _cond_a(space, prof, k)
    if "b" in conditions:
        for k in (0, 1):
            res[f"b{k}"] = _cond_b(space, prof, k)
    if "c" in conditions:
        res["c"] = _cond_c(space, prof)
    tail = variation_tail_profile(space, prof)
    if "d" in conditions:
        res["d"] = _cond_d(space, tail)
    if "e" in conditions:
        res["e"] = _cond_e(space, tail)
    return AdmissibilityReport(res)
