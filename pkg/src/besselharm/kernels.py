"""Named kernel families and their profiles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import LambdaSpace
from .profiles import Expr, Profile, dilation_generator, gamma_ratio_constant
from .special import log_gamma

FAMILIES = ("poisson", "heat", "bochner-riesz", "poisson-deriv", "heat-deriv", "stein-br", "custom")


@dataclass(frozen=True)
class KernelFamily:
    name: str
    param: float | None = None
    custom: Profile | None = None

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.name!r}")
        if self.name in ("bochner-riesz", "stein-br") and not (self.param is not None and self.param > 0):
            raise ValueError(f"{self.name} requires alpha > 0")
        if self.name in ("poisson-deriv", "heat-deriv"):
            if self.param is None or self.param < 0 or int(self.param) != self.param:
                raise ValueError(f"{self.name} requires an integer m >= 0")
        if self.name == "custom" and self.custom is None:
            raise ValueError("custom family needs a profile")

    @classmethod
    def parse(cls, text: str) -> "KernelFamily":
        """Parse 'poisson', 'heat', 'bochner-riesz:a', 'poisson-deriv:m', 'heat-deriv:m', 'stein-br:a'."""
        name, _, arg = text.strip().partition(":")
        name = name.strip().lower()
        if name in ("poisson", "heat"):
            if arg:
                raise ValueError(f"{name} takes no parameter")
            return cls(name)
        if not arg:
            raise ValueError(f"{name} needs a parameter")
        value = float(arg)
        if name in ("poisson-deriv", "heat-deriv"):
            if value != int(value):
                raise ValueError(f"{name} requires an integer m")
        return cls(name, value)

    def __str__(self):
        if self.name in ("poisson", "heat"):
            return self.name
        if self.name == "custom":
            return f"custom:{self.custom.label}"
        p = int(self.param) if self.name.endswith("deriv") else self.param
        return f"{self.name}:{p:g}"


def poisson_constant(space: LambdaSpace) -> float:
    lam = space.lam
    return 2 * lam * math.exp(log_gamma(lam) - log_gamma(lam + 0.5)) / math.sqrt(math.pi)


def heat_constant(space: LambdaSpace) -> float:
    lam = space.lam
    return math.exp((0.5 - lam) * math.log(2.0) - log_gamma(lam + 0.5))


def bochner_riesz_order(space: LambdaSpace, alpha: float) -> float:
    return alpha + space.lam + 0.5


def bochner_riesz_constant(alpha: float) -> float:
    return math.exp(alpha * math.log(2.0) + log_gamma(alpha + 1.0))


def _poisson_expr(space):
    return Expr.base("pois", space.lam + 1.0, poisson_constant(space))


def _heat_expr(space):
    return Expr.base("gauss", 0.0, heat_constant(space))


def _br_expr(space, alpha):
    return Expr.base("bes", bochner_riesz_order(space, alpha), bochner_riesz_constant(alpha))


def scale_derivative_expr(space: LambdaSpace, e: Expr, m: int) -> Expr:
    """Expression for t^m d^m/dt^m phi_t at t = 1, i.e. prod_{k<m} (D - k) phi."""
    out = e
    for k in range(m):
        out = dilation_generator(space, out) + out.scale(-float(k))
    return out


def make_kernel(space: LambdaSpace, family: KernelFamily | str) -> Profile:
    if isinstance(family, str):
        family = KernelFamily.parse(family)
    name, a = family.name, family.param
    K = gamma_ratio_constant(space)
    if name == "poisson":
        return Profile.from_expr(_poisson_expr(space), "poisson", mass=1.0)
    if name == "heat":
        return Profile.from_expr(_heat_expr(space), "heat", mass=1.0)
    if name == "bochner-riesz":
        return Profile.from_expr(_br_expr(space, a), f"bochner-riesz:{a:g}", mass=K)
    if name == "poisson-deriv":
        m = int(a)
        e = scale_derivative_expr(space, _poisson_expr(space), m)
        return Profile.from_expr(e, f"poisson-deriv:{m}", mass=1.0 if m == 0 else 0.0)
    if name == "heat-deriv":
        m = int(a)
        e = scale_derivative_expr(space, _heat_expr(space), m)
        return Profile.from_expr(e, f"heat-deriv:{m}", mass=1.0 if m == 0 else 0.0)
    if name == "stein-br":
        # (2 lambda + 1) phi + x phi' = -D phi for the Bochner-Riesz profile
        e = dilation_generator(space, _br_expr(space, a)).scale(-1.0)
        return Profile.from_expr(e, f"stein-br:{a:g}", mass=0.0)
    return family.custom


def custom_profile(phi, dphi, d2phi, label="custom", *, decay=math.inf, oscillation=0.0,
                   even=False, mass=None, d3phi=None) -> Profile:
    return Profile(phi, dphi, d2phi, label, decay=decay, oscillation=oscillation, even=even,
                   mass=mass, d3phi=d3phi)


def t_derivative_profile(space: LambdaSpace, prof: Profile) -> Profile:
    """Phi = (2 lambda + 1) phi + x phi', so that d/dt tau_y(phi_t) = -(1/t) tau_y(Phi_t)."""
    if prof.expr is not None:
        e = dilation_generator(space, prof.expr).scale(-1.0)
        return Profile.from_expr(e, f"tderiv({prof.label})", mass=0.0 if prof.mass is not None else None)
    d = space.dim

    def phi(x):
        return d * prof.phi(x) + x * prof.dphi(x)

    def dphi(x):
        return (d + 1) * prof.dphi(x) + x * prof.d2phi(x)

    def d2phi(x):
        return (d + 2) * prof.d2phi(x) + x * prof.third_derivative(x)

    return Profile(phi, dphi, d2phi, f"tderiv({prof.label})", decay=prof.decay,
                   oscillation=prof.oscillation, even=prof.even,
                   mass=0.0 if prof.mass is not None else None)


def dilate(space: LambdaSpace, prof: Profile, t: float):
    """The callable phi_t(x) = t^{-2 lambda - 1} phi(x / t)."""
    s = t ** (-space.dim)
    return lambda x: s * prof.phi(np.asarray(x, dtype=float) / t)


def poisson_transform(space: LambdaSpace, x):
    """Closed form h(P) = c e^{-x} with c = 2^{1/2 - lambda} / Gamma(lambda + 1/2)."""
    return heat_constant(space) * np.exp(-np.asarray(x, dtype=float))


def heat_transform(space: LambdaSpace, x):
    x = np.asarray(x, dtype=float)
    return heat_constant(space) * np.exp(-0.5 * x * x)


def bochner_riesz_multiplier(alpha, x):
    x = np.asarray(x, dtype=float)
    return np.where(x < 1, np.clip(1 - x * x, 0, None) ** alpha, 0.0)


def stein_multiplier(alpha, x):
    x = np.asarray(x, dtype=float)
    base = np.clip(1 - x * x, 0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2 * alpha * x * x * np.where(x < 1, base ** (alpha - 1), 0.0)
    return np.nan_to_num(out)
