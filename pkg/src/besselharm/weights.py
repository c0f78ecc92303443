"""A_p weights, weighted BMO and the delta-adic interval system on (0, inf).

Sup-based characteristics run over one interval family: all pairs of
endpoints from a coarsened node lattice (at most 200 endpoints) plus the
intervals (0, x_j) anchored at the origin.  Interval integrals come from
piecewise-power cumulative sums, which are exact for power weights, so the
power-weight identities (scale invariance, duality) hold to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridFunction, LambdaSpace, LogGrid, measure_between
from .operators import Cumulative


@dataclass
class Weight:
    w: GridFunction
    cached_ap: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        v = np.asarray(self.w.values, dtype=float)
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("weight values must be finite and > 0")

    @classmethod
    def power(cls, grid: LogGrid, beta: float) -> "Weight":
        return cls(GridFunction(grid, grid.nodes ** beta))

    @classmethod
    def constant(cls, grid: LogGrid, c: float = 1.0) -> "Weight":
        return cls(GridFunction(grid, np.full(grid.n, float(c))))

    @property
    def grid(self) -> LogGrid:
        return self.w.grid

    def __pow__(self, s: float) -> "Weight":
        return Weight(self.w.with_values(self.w.values ** s))


@dataclass
class APReport:
    value: float
    diverges: bool
    stable: bool
    argmax: tuple


def _lattice(n: int, max_endpoints: int) -> np.ndarray:
    step = max(1, math.ceil((n - 1) / (max_endpoints - 1)))
    idx = np.arange(0, n, step)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def _head_diverges(c: Cumulative, slack: float = 1e-9) -> bool:
    return c.q0 <= -1 + slack


def _interval_integrals(space, values: np.ndarray, grid: LogGrid, idx: np.ndarray):
    """Integrals over all lattice pairs [x_i, x_j] (i < j) and over (0, x_j).

    Returns (pairs, anchored, diverges) with pairs[a, b] the integral between
    lattice points a < b.
    """
    c = Cumulative(GridFunction(grid, values), 2 * space.lam)
    F = c.F[idx]
    pairs = F[None, :] - F[:, None]
    return pairs, F, _head_diverges(c)


def ap_products(space: LambdaSpace, w: Weight, p: float, a, b):
    """The A_p product over the intervals (a, b); a may be 0, b <= x_max."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m = measure_between(space, a, b)
    cw = Cumulative(w.w, 2 * space.lam)
    W = (cw(b) - cw(a)) / m
    if p == 1:
        raise ValueError("use a1_characteristic for p = 1")
    sig = w.w.with_values(w.w.values ** (-1.0 / (p - 1)))
    cs = Cumulative(sig, 2 * space.lam)
    S = (cs(b) - cs(a)) / m
    return W * S ** (p - 1)


def ap_report(space: LambdaSpace, w: Weight, p: float, *, max_endpoints: int = 200) -> APReport:
    """[w]_{A_p} over the lattice family, with divergence and refinement flags."""
    if not p > 1:
        raise ValueError("p must be > 1; use a1_characteristic for p = 1")
    g = w.grid
    vals = _ap_scan(space, w.w.values, g, p, max_endpoints)
    coarse = _ap_scan(space, w.w.values, g, p, max(2, max_endpoints // 2))
    value, arg, div = vals
    stable = abs(value - coarse[0]) <= 1e-2 * value
    return APReport(value, div, bool(stable), arg)


def _ap_scan(space, wv, g, p, max_endpoints):
    idx = _lattice(g.n, max_endpoints)
    x = g.nodes[idx]
    pw, aw, dw = _interval_integrals(space, wv, g, idx)
    ps, as_, ds = _interval_integrals(space, wv ** (-1.0 / (p - 1)), g, idx)
    # the measure goes through the same quadrature, so w = 1 gives exactly 1
    m, xd, _ = _interval_integrals(space, np.ones(g.n), g, idx)
    with np.errstate(divide="ignore", invalid="ignore"):
        prod = np.where(m > 0, (pw / m) * (ps / m) ** (p - 1), -np.inf)
    anchored = (aw / xd) * (as_ / xd) ** (p - 1)
    i, j = np.unravel_index(np.argmax(prod), prod.shape)
    best, arg = float(prod[i, j]), (float(x[i]), float(x[j]))
    k = int(np.argmax(anchored))
    if anchored[k] > best:
        best, arg = float(anchored[k]), (0.0, float(x[k]))
    diverges = dw or ds
    if diverges:
        best = math.inf
    return best, arg, diverges


def ap_characteristic(space: LambdaSpace, w: Weight, p: float, *, max_endpoints: int = 200) -> float:
    """[w]_{A_p^lam} (a lower bound of the true sup; inf when an average diverges at 0)."""
    key = (float(p), max_endpoints)
    if key not in w.cached_ap:
        w.cached_ap[key] = ap_report(space, w, p, max_endpoints=max_endpoints).value
    return w.cached_ap[key]


def a1_characteristic(space: LambdaSpace, w: Weight, *, max_endpoints: int = 200) -> float:
    """sup_I avg_I(w) / min_I w, the min taken over the nodes of I."""
    g = w.grid
    idx = _lattice(g.n, max_endpoints)
    x = g.nodes[idx]
    pw, aw, dw = _interval_integrals(space, w.w.values, g, idx)
    if dw:
        return math.inf
    d = space.dim
    xd = x ** d / d
    # running minima of w between lattice points
    v = w.w.values
    seg_min = np.array([v[idx[k]:idx[k + 1] + 1].min() for k in range(idx.size - 1)])
    L = idx.size
    best = 0.0
    for i in range(L - 1):
        mins = np.minimum.accumulate(seg_min[i:])
        avg = pw[i, i + 1:] / (xd[i + 1:] - xd[i])
        best = max(best, float(np.max(avg / mins)))
    pref_min = np.minimum.accumulate(np.concatenate([[v[0]], seg_min]))
    # anchored intervals: w below x_min is continued by the first-cell power law
    c = Cumulative(w.w, 0.0)
    if c.q0 > 1e-9:
        return math.inf
    anc = aw / xd / pref_min
    return max(best, float(anc.max()))


def power_weight_anchored_ap(space: LambdaSpace, beta: float, p: float) -> float:
    """A_p product of x^beta over (0, r), independent of r."""
    d = space.dim
    s = -beta / (p - 1)
    if beta + d <= 0 or s + d <= 0:
        return math.inf
    return d / (beta + d) * (d / (s + d)) ** (p - 1)


def power_weight_in_ap(space: LambdaSpace, beta: float, p: float) -> bool:
    return -space.dim < beta < space.dim * (p - 1)


def bmo_norm(space: LambdaSpace, b: GridFunction, w: Weight | None = None, *, max_endpoints: int = 120) -> float:
    """sup_I w_lam(I)^{-1} int_I |b - b_I| dm_lam with b_I the m_lam average.

    I runs over the node-lattice pairs (the origin-anchored intervals start at
    the first node).  Integrals use the node quadrature restricted to I.
    """
    g = b.grid
    idx = _lattice(g.n, max_endpoints)
    bv = np.asarray(b.values, dtype=float)
    wv = np.ones(g.n) if w is None else np.asarray(w.w.values, dtype=float)
    x = g.nodes
    best = 0.0
    # trapezoid cell weights of dm on each cell between consecutive nodes
    cell = 0.5 * (x[1:] - x[:-1])
    ml = x ** (2 * space.lam)
    for a_pos in range(idx.size - 1):
        i = idx[a_pos]
        js = idx[a_pos + 1:]
        J = js[-1]
        # node weights for the interval [x_i, x_j]: trapezoid on the cells in between
        seg = slice(i, J + 1)
        xs_ml = ml[seg]
        bseg = bv[seg]
        wseg = wv[seg]
        cw = cell[i:J]
        # cumulative int of b and of 1 (dm) up to each node via trapezoid
        left = np.concatenate([[0.0], np.cumsum(cw * (bseg[:-1] * xs_ml[:-1] + bseg[1:] * xs_ml[1:]))])
        mass = np.concatenate([[0.0], np.cumsum(cw * (xs_ml[:-1] + xs_ml[1:]))])
        wmass = np.concatenate([[0.0], np.cumsum(cw * (wseg[:-1] * xs_ml[:-1] + wseg[1:] * xs_ml[1:]))])
        ends = js - i
        bI = left[ends] / mass[ends]
        # |b - b_I| integrated by trapezoid for every end point at once
        dev = np.abs(bseg[:, None] - bI[None, :]) * xs_ml[:, None]
        cells = cw[:, None] * (dev[:-1] + dev[1:])
        cum = np.concatenate([np.zeros((1, ends.size)), np.cumsum(cells, axis=0)])
        osc = cum[ends, np.arange(ends.size)]
        best = max(best, float(np.max(osc / wmass[ends])))
    return best


def duality_gap(space: LambdaSpace, w: Weight, p: float, **kw) -> float:
    """|[w^{1-p'}]_{A_p'} - [w]_{A_p}^{p'-1}| relative to the right side."""
    q = p / (p - 1)
    lhs = ap_characteristic(space, w ** (1 - q), q, **kw)
    rhs = ap_characteristic(space, w, p, **kw) ** (q - 1)
    return abs(lhs - rhs) / rhs


# ---------------------------------------------------------------------------
# delta-adic intervals


class DyadicAxiomError(RuntimeError):
    pass


@dataclass(frozen=True)
class Cube:
    """Q^k_alpha = [alpha delta^k, (alpha + 1) delta^k)."""

    level: int
    index: int
    delta: float

    @property
    def length(self) -> float:
        return self.delta ** self.level

    @property
    def left(self) -> float:
        return self.index * self.length

    @property
    def right(self) -> float:
        return (self.index + 1) * self.length

    @property
    def center(self) -> float:
        return (self.index + 0.5) * self.length

    def measure(self, space: LambdaSpace) -> float:
        return float(measure_between(space, self.left, self.right))

    def contains(self, x):
        x = np.asarray(x)
        return (x >= self.left) & (x < self.right)

    def node_indices(self, x: np.ndarray) -> np.ndarray:
        lo = np.searchsorted(x, self.left, side="left")
        hi = np.searchsorted(x, self.right, side="left")
        return np.arange(lo, hi)

    def dilate(self, s: float) -> tuple[float, float]:
        """sQ = (center - s l/2, center + s l/2) clipped at 0."""
        r = 0.5 * s * self.length
        return max(self.center - r, 0.0), self.center + r

    def parent(self) -> "Cube":
        m = round(1 / self.delta)
        return Cube(self.level - 1, self.index // m, self.delta)

    def children(self) -> list["Cube"]:
        m = round(1 / self.delta)
        return [Cube(self.level + 1, m * self.index + c, self.delta) for c in range(m)]


@dataclass
class DyadicSystem:
    delta: float
    top: int
    bottom: int
    span: tuple
    a: float = 0.5
    A: float = 0.5

    @property
    def levels(self) -> range:
        return range(self.top, self.bottom + 1)

    def root(self) -> Cube:
        return Cube(self.top, 0, self.delta)

    def cube_of(self, x: float, level: int) -> Cube:
        return Cube(level, int(math.floor(x / self.delta ** level)), self.delta)

    def cubes_with_nodes(self, x: np.ndarray) -> list[Cube]:
        out = []
        for k in self.levels:
            for a in np.unique(np.floor(np.asarray(x) / self.delta ** k).astype(np.int64)):
                out.append(Cube(k, int(a), self.delta))
        return out


def build_dyadic(space: LambdaSpace, span, delta: float = 0.5, levels=None, *, xgrid: LogGrid | None = None
                 ) -> DyadicSystem:
    """The half-open delta-adic system whose top cube [0, delta^top) covers span.

    levels: (top, bottom) or None; by default the bottom level is the first
    whose cubes are shorter than the smallest spacing of xgrid (or 30 levels).
    All four axioms are checked on the cubes that contain xgrid nodes.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    m = round(1 / delta)
    if abs(m * delta - 1) > 1e-12:
        raise ValueError("1/delta must be an integer so that cubes nest")
    lo, hi = float(span[0]), float(span[1])
    if not (0 <= lo < hi):
        raise ValueError("span must satisfy 0 <= lo < hi")
    top = math.floor(math.log(hi) / math.log(delta) + 1e-12)
    if levels is None:
        if xgrid is not None:
            spacing = float(np.min(np.diff(xgrid.nodes)))
            bottom = math.ceil(math.log(spacing) / math.log(delta))
        else:
            bottom = top + 30
    else:
        top, bottom = levels
        if delta ** top < hi:
            raise ValueError("top level does not cover the span")
    sys = DyadicSystem(delta, top, bottom, (lo, hi))
    pts = xgrid.nodes if xgrid is not None else np.linspace(lo, hi, 257)[:-1]
    _verify_axioms(sys, pts)
    return sys


def _verify_axioms(sys: DyadicSystem, x: np.ndarray):
    m = round(1 / sys.delta)
    for k in sys.levels:
        L = sys.delta ** k
        a = np.floor(x / L).astype(np.int64)
        # (i) each point in exactly one cube of the level
        lefts, rights = a * L, (a + 1) * L
        if np.any(x < lefts) or np.any(x >= rights):
            raise DyadicAxiomError(f"level {k}: a point escapes its cube")
        if k > sys.top:
            # (ii) nesting: the parent index of each cube contains it
            pa = a // m
            PL = sys.delta ** (k - 1)
            if np.any(pa * PL > lefts + 1e-12 * PL) or np.any((pa + 1) * PL < rights - 1e-12 * PL):
                raise DyadicAxiomError(f"level {k}: cube not nested in its parent")
        for alpha in np.unique(a)[:64]:
            q = Cube(k, int(alpha), sys.delta)
            # (iii) child count
            if len(q.children()) > math.ceil(1 / sys.delta):
                raise DyadicAxiomError("too many children")
            # (iv) B(c, a delta^k) within Q within B(c, A delta^k)
            c = q.center
            if not (c - sys.a * L >= q.left - 1e-12 * L and c + sys.a * L <= q.right + 1e-12 * L):
                raise DyadicAxiomError("inner ball not inside cube")
            if not (q.left >= c - sys.A * L - 1e-12 * L and q.right <= c + sys.A * L + 1e-12 * L):
                raise DyadicAxiomError("cube not inside outer ball")
