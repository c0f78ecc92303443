"""Reducers over convolution fields and the auxiliary maximal and Hardy operators.

The three reducers act row by row on a matrix [x, t]:

* maximal: sup_t |v|;
* square_function: (int |v|^2 dt/t)^{1/2} by the log-trapezoid rule;
* rho_variation: the exact rho-variation over all subsequences of the time
  grid, by dynamic programming.

Operator handles wrap "field then reducer" (or any map f -> Tf) behind one
protocol, apply(f, rows) -> values at those x nodes, so that truncated inputs
for the grand maximal functions and the sparse extractor reuse one path.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fields import OperatorField, TimeGrid, commutator_rows, field_rows
from .grid import GridFunction, LambdaSpace, TailWarning
from .profiles import Profile


class TruncationWarning(UserWarning):
    """A time integral does not decay at the ends of the time grid."""


def _values(field):
    if isinstance(field, OperatorField):
        return field.values, field.tgrid
    return np.asarray(field), None


def _wrap(field, vals):
    if isinstance(field, OperatorField):
        return GridFunction(field.xgrid, vals)
    return vals


# ---------------------------------------------------------------------------
# reducers


def maximal(field):
    """Row maxima of |field|."""
    v, _ = _values(field)
    return _wrap(field, np.max(np.abs(v), axis=1))


def square_function(field, log_step=None, *, end_tol=1e-4, warn=True):
    """(int |v|^2 dt/t)^{1/2} per row; times are geometric so dt/t is a constant step."""
    v, tg = _values(field)
    if log_step is None:
        if tg is None:
            raise ValueError("log_step is needed for a bare array")
        log_step = tg.log_step
    sq = np.abs(v) ** 2
    w = np.full(sq.shape[1], log_step)
    if w.size > 1:
        w[0] *= 0.5
        w[-1] *= 0.5
    total = sq @ w
    if warn and sq.shape[1] > 1:
        ends = np.maximum(sq[:, 0], sq[:, -1]) * log_step
        bad = ends > end_tol * np.maximum(total, 1e-300)
        bad &= total > 1e-30 * max(float(total.max()), 1e-300)
        if np.any(bad):
            warnings.warn(f"square_function: end columns carry more than {end_tol:g} of the integral "
                          f"at {int(bad.sum())} rows", TruncationWarning, stacklevel=2)
    return _wrap(field, np.sqrt(total))


def rho_variation(field, rho: float):
    """sup over subsequences of (sum |v_{j_{k+1}} - v_{j_k}|^rho)^{1/rho} per row.

    best[k] = max_{j<k} best[j] + |v_k - v_j|^rho is the largest sum over
    chains ending at k; the answer is max_k best[k].  O(n_t^2) per row.
    """
    if not rho > 2:
        raise ValueError("rho must be > 2")
    v, _ = _values(field)
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[None, :]
    n = v.shape[1]
    best = np.zeros(v.shape)
    for k in range(1, n):
        cand = best[:, :k] + np.abs(v[:, k:k + 1] - v[:, :k]) ** rho
        best[:, k] = cand.max(axis=1)
    res = best.max(axis=1) ** (1.0 / rho)
    return _wrap(field, res)


def rho_variation_bruteforce(row, rho: float) -> float:
    """Exhaustive search over all subsequences (oracle for short rows)."""
    row = np.asarray(row, dtype=float)
    n = row.size
    best = 0.0
    for mask in range(1, 1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        if len(idx) < 2:
            continue
        s = float(np.sum(np.abs(np.diff(row[idx])) ** rho))
        best = max(best, s)
    return best ** (1.0 / rho)


REDUCERS = {"maximal": maximal, "square": square_function, "variation": rho_variation}


# ---------------------------------------------------------------------------
# cumulative integrals of sampled functions


class Cumulative:
    """F(y) = int_0^y g(s) ds for g = f(s) s^{2 lam} (or f(s)/s) sampled on a log grid.

    Between nodes g is interpolated as a power law when consecutive values
    share a sign (exact for power functions) and linearly otherwise.  Below the
    first node g is continued by the power law of the first cell when it is
    integrable at 0, else by a constant f.
    """

    def __init__(self, f: GridFunction, exponent: float):
        x = f.x
        g = np.asarray(f.values, dtype=float) * x ** exponent
        self.x, self.g = x, g
        ratio = x[1:] / x[:-1]
        same = (g[:-1] * g[1:] > 0)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            q = np.where(same, np.log(np.abs(g[1:] / np.where(g[:-1] == 0, 1, g[:-1]))) / np.log(ratio), 0.0)
        # steep cells (underflowing values, jumps) fall back to linear
        same &= np.isfinite(q) & (np.abs(q) <= 60)
        q = np.where(same, q, 0.0)
        self.q = q
        self.same = same
        cells = np.where(same, self._power_piece(g[:-1], x[:-1], q, ratio),
                         0.5 * (g[:-1] + g[1:]) * (x[1:] - x[:-1]))
        q0 = q[0] if same[0] else exponent
        if q0 > -1:
            head = g[0] * x[0] / (q0 + 1)
        else:
            head = 0.0
        self.q0 = q0
        self.head = head
        self.F = np.concatenate([[head], head + np.cumsum(cells)])

    @staticmethod
    def _power_piece(g0, x0, q, rho):
        # int_{x0}^{x0 rho} g0 (s / x0)^q ds
        a = q + 1
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(np.abs(a) > 1e-12, g0 * x0 * (rho ** a - 1) / np.where(np.abs(a) > 1e-12, a, 1),
                           g0 * x0 * np.log(rho))
        return out

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        x, g = self.x, self.g
        out = np.empty(y.shape)
        below = y <= x[0]
        above = y >= x[-1]
        mid = ~below & ~above
        if np.any(below):
            yb = y[below]
            if self.q0 > -1:
                out[below] = g[0] * x[0] * (yb / x[0]) ** (self.q0 + 1) / (self.q0 + 1)
            else:
                out[below] = 0.0
        out[above] = self.F[-1]
        if np.any(mid):
            ym = y[mid]
            i = np.clip(np.searchsorted(x, ym, side="right") - 1, 0, x.size - 2)
            x0, g0 = x[i], g[i]
            pw = self._power_piece(g0, x0, self.q[i], ym / x0)
            lin = (ym - x0) * (g0 + 0.5 * (g[i + 1] - g0) * (ym - x0) / (x[i + 1] - x0))
            out[mid] = self.F[i] + np.where(self.same[i], pw, lin)
        return out


class LinearCumulative:
    """F(y) = int_0^y f(s) s^{2 lam} ds with f linear in s between nodes and constant below the grid.

    Unlike Cumulative this is linear in f, which keeps the maximal function
    built on it sublinear; it is exact for constant and affine f.
    """

    def __init__(self, space: LambdaSpace, f: GridFunction):
        x = f.x
        v = np.asarray(f.values, dtype=float)
        self.x, self.v, self.d = x, v, space.dim
        self.slope = np.diff(v) / np.diff(x)
        cells = self._piece(np.arange(x.size - 1), x[1:])
        head = v[0] * x[0] ** self.d / self.d
        self.F = np.concatenate([[head], head + np.cumsum(cells)])

    def _piece(self, i, y):
        x0, d, b = self.x[i], self.d, self.slope[i]
        a = self.v[i] - b * x0
        return a * (y ** d - x0 ** d) / d + b * (y ** (d + 1) - x0 ** (d + 1)) / (d + 1)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        x = self.x
        out = np.empty(y.shape)
        below = y <= x[0]
        above = y >= x[-1]
        mid = ~below & ~above
        out[below] = self.v[0] * y[below] ** self.d / self.d
        out[above] = self.F[-1]
        if np.any(mid):
            i = np.clip(np.searchsorted(x, y[mid], side="right") - 1, 0, x.size - 2)
            out[mid] = self.F[i] + self._piece(i, y[mid])
        return out


def hardy_operators(space: LambdaSpace, f: GridFunction):
    """H_0(f)(x) = x^{-2 lam - 1} int_0^x f y^{2 lam} dy and H_inf(f)(x) = int_x^inf f dy / y."""
    x = f.x
    c0 = Cumulative(f, 2 * space.lam)
    h0 = c0(x) / x ** space.dim
    cinf = Cumulative(f, -1.0)
    hinf = cinf.F[-1] - cinf(x)
    top = abs(float(f.values[-1]))
    if top > 1e-6 * max(float(np.max(np.abs(f.values))), 1e-300):
        warnings.warn("hardy_operators: f is not negligible at the top of the grid; H_inf is truncated there",
                      TailWarning, stacklevel=2)
    return GridFunction(f.grid, h0), GridFunction(f.grid, hinf)


# ---------------------------------------------------------------------------
# Hardy-Littlewood maximal function on ((0, inf), |.|, m_lam)


@dataclass
class MaximalBounds:
    lower: GridFunction
    upper: GridFunction


def _ball_measure(space, x, r):
    lo = np.maximum(x - r, 0.0)
    return ((x + r) ** space.dim - lo ** space.dim) / space.dim


def hl_maximal_bounds(space: LambdaSpace, f: GridFunction, *, radii_per_decade=48,
                      points: np.ndarray | None = None) -> MaximalBounds:
    """Lower and upper bounds of M_lam f at the grid nodes.

    The lower bound is the max of exact ball averages (of the piecewise linear
    interpolant of |f|, constant below the first node)
    over geometric radii r_k; the upper bound uses that on r in [r_k, r_{k+1}]
    the average is at most avg(r_{k+1}) m(B(r_{k+1})) / m(B(r_k)), and below
    the smallest radius it is at most the local max of |f|.
    """
    x = f.x if points is None else np.asarray(points, dtype=float)
    cum = LinearCumulative(space, f.with_values(np.abs(f.values)))
    r_min = f.grid.x_min * (f.grid.ratio - 1) * 1e-3
    r_max = 4 * f.grid.x_max
    radii = np.geomspace(r_min, r_max, int(math.ceil(radii_per_decade * math.log10(r_max / r_min))) + 1)
    X, R = np.meshgrid(x, radii, indexing="ij")
    mass = cum(X + R) - cum(np.maximum(X - R, 0.0))
    meas = _ball_measure(space, X, R)
    avg = mass / meas
    lower = np.maximum(avg.max(axis=1), np.abs(f(x)) if points is not None else np.abs(f.values))
    adj = avg[:, 1:] * meas[:, 1:] / meas[:, :-1]
    # below r_min: the interpolant's max over the tiny ball is its value at the nearest nodes
    xs = f.x
    i = np.clip(np.searchsorted(xs, x) - 1, 0, xs.size - 2)
    local = np.maximum(np.abs(f.values[i]), np.abs(f.values[i + 1]))
    upper = np.maximum(adj.max(axis=1), local)
    upper = np.maximum(upper, lower)
    grid = f.grid if points is None else None
    if grid is None:
        return MaximalBounds(lower, upper)
    return MaximalBounds(GridFunction(grid, lower), GridFunction(grid, upper))


def hl_maximal(space: LambdaSpace, f: GridFunction, **kw) -> GridFunction:
    """M_lam f on the grid (the certified lower bound; see hl_maximal_bounds)."""
    return hl_maximal_bounds(space, f, **kw).lower


# ---------------------------------------------------------------------------
# operator handles


@dataclass
class OperatorHandle:
    """An operator T exposed as apply(f, rows) -> (Tf)(x_rows)."""

    name: str
    apply: Callable

    def __call__(self, f: GridFunction, rows=None):
        return self.apply(f, rows)


def field_operator(space: LambdaSpace, prof: Profile, tgrid: TimeGrid, kind: str, rho: float = 3.0,
                   name: str | None = None) -> OperatorHandle:
    """T f = reducer(f # phi_t) with kind in {maximal, square, variation}."""
    log_step = tgrid.log_step

    def apply(f, rows=None):
        v = field_rows(space, f, prof, tgrid, rows)
        return _reduce(kind, v, log_step, rho)

    return OperatorHandle(name or f"{kind}[{prof.label}]", apply)


def commutator_operator(space: LambdaSpace, prof: Profile, tgrid: TimeGrid, kind: str, b: GridFunction,
                        m: int, rho: float = 3.0) -> OperatorHandle:
    """T f = reducer of the commutator field with symbol b and order m."""
    log_step = tgrid.log_step

    def apply(f, rows=None):
        v = commutator_rows(space, f, b, m, prof, tgrid, rows)
        return _reduce(kind, v, log_step, rho)

    return OperatorHandle(f"{kind}[{prof.label}, b^{m}]", apply)


def hl_operator(space: LambdaSpace) -> OperatorHandle:
    def apply(f, rows=None):
        v = hl_maximal(space, f).values
        return v if rows is None else v[rows]

    return OperatorHandle("hl_maximal", apply)


def _reduce(kind, v, log_step, rho):
    if kind == "maximal":
        return maximal(v)
    if kind == "square":
        return square_function(v, log_step, warn=False)
    if kind == "variation":
        return rho_variation(v, rho)
    raise ValueError(f"unknown reducer {kind!r}")


# ---------------------------------------------------------------------------
# grand maximal truncations


def grand_maximal(space: LambdaSpace, T: OperatorHandle, f: GridFunction, variant: str = "M_T",
                  dyadic=None, *, max_cubes: int = 20000) -> GridFunction:
    """M_T f(x) = sup_{Q ni x} max_Q |T(f chi_{outside 3Q})| or its oscillation variant M_sharp_3.

    Q runs over the cubes of a dyadic system (built on the grid span by
    default) that contain at least one node; ess sup over Q is the max over
    the nodes in Q.
    """
    from .weights import build_dyadic

    if variant not in ("M_T", "M_sharp_3"):
        raise ValueError("variant must be 'M_T' or 'M_sharp_3'")
    g = f.grid
    x = g.nodes
    if dyadic is None:
        dyadic = build_dyadic(space, (0.0, g.x_max * 1.0000001), xgrid=g)
    out = np.zeros(g.n)
    cubes = dyadic.cubes_with_nodes(x)
    if len(cubes) > max_cubes:
        raise ValueError(f"grand_maximal: {len(cubes)} cubes exceeds the cost guard {max_cubes}")
    fv = np.asarray(f.values)
    for cube in cubes:
        rows = cube.node_indices(x)
        left, right = cube.dilate(3.0)
        outside = (x < left) | (x >= right)
        if not np.any(outside & (fv != 0)):
            continue
        vals = np.abs(T(f.with_values(np.where(outside, fv, 0.0)), rows))
        s = vals.max() - vals.min() if variant == "M_sharp_3" else vals.max()
        out[rows] = np.maximum(out[rows], s)
    return GridFunction(g, out)


# ---------------------------------------------------------------------------
# kernel bounds


@dataclass
class KernelBoundReport:
    sup_products: dict
    argmax: dict
    finite: bool


def kernel_bound_products(space: LambdaSpace, prof: Profile, tgrid: TimeGrid, xs, ys, *, rho=3.0,
                          fd_rel=1e-4):
    """Sup over the (x, y) sample of the size, gradient and variation products.

    size:      ||G_t(x, y)||_{L^2(dt/t)} m(B(x, |x - y|))
    gradient:  ||d_x G_t(x, y)||_{L^2(dt/t)} |x - y| m(B(x, |x - y|))
    variation: ||{G_t(x, y)}_t||_{v_rho} m(B(x, |x - y|))
    with G_t(x, y) = tau_x(phi_t)(y); d_x by central differences.
    """
    from .translation import translate_values

    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    off = X != Y
    X, Y = X[off], Y[off]
    t = tgrid.nodes
    dt = tgrid.log_step
    G = np.empty((X.size, t.size))
    Gd = np.empty((X.size, t.size))
    hx = fd_rel * X
    for j, tj in enumerate(t):
        G[:, j] = translate_values(space, prof, tj, X, Y)
        Gd[:, j] = (translate_values(space, prof, tj, X + hx, Y) - translate_values(space, prof, tj, X - hx, Y)) \
            / (2 * hx)
    dist = np.abs(X - Y)
    mB = _ball_measure(space, X, dist)
    size = square_function(G, dt, warn=False) * mB
    grad = square_function(Gd, dt, warn=False) * dist * mB
    var = rho_variation(G, rho) * mB
    prods = {"size": size, "gradient": grad, "variation": var}
    sups, where = {}, {}
    for k, v in prods.items():
        i = int(np.argmax(v))
        sups[k] = float(v[i])
        where[k] = (float(X[i]), float(Y[i]))
    return KernelBoundReport(sups, where, all(np.isfinite(list(sups.values()))))
