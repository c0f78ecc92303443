"""Convolution fields (f #_lam phi_t)(x_i) on a log grid times a time grid.

With x_i = x_min r^i and t_j = x_min r^{m_j + delta}, dilation covariance gives

    (f # phi_t)(x_i) = sum_k f_k int_{cell_k / t} tau_{x_i/t}(phi)(v) v^{2 lam} dv

and x_i / t_j, w_k / t_j only depend on the lattice offsets i - m_j, k - m_j.
One table G[a, b] = tau_{r^{a-delta}}(phi)(r^{b-delta}) therefore serves every
column, every input f and every commutator symbol b.  Cells are weighted by the
log-trapezoid rule except where the translated kernel is narrower than a cell
(x / t > c_res / h); there the cells next to the diagonal are integrated
exactly, using tau_a(chi_[c1, c2])(u) = I(theta(c1)) - I(theta(c2)) with I the
regularized incomplete beta function.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sps

from .grid import GridFunction, LambdaSpace, LogGrid
from .profiles import Profile
from .translation import unit_translate


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Geometric times stored in decreasing order t_1 > t_2 > ... > t_n."""

    t_min: float
    t_max: float
    points_per_decade: float = 32
    nodes: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max):
            raise ValueError("need 0 < t_min < t_max")
        if self.nodes is None:
            if self.points_per_decade < 16:
                raise ValueError("points_per_decade must be >= 16")
            n = max(int(round(math.log10(self.t_max / self.t_min) * self.points_per_decade)), 1) + 1
            nodes = np.geomspace(self.t_max, self.t_min, n)
            object.__setattr__(self, "nodes", nodes)
        nodes = np.asarray(self.nodes, dtype=float)
        if np.any(np.diff(nodes) >= 0):
            raise ValueError("time nodes must be strictly decreasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def aligned(cls, xgrid: LogGrid, t_min: float, t_max: float, stride: int = 2) -> "TimeGrid":
        """Times on the lattice x_min r^{stride k}, covering [t_min, t_max]."""
        h = xgrid.h
        k_lo = math.floor(math.log(t_min / xgrid.x_min) / (h * stride) + 1e-9)
        k_hi = math.ceil(math.log(t_max / xgrid.x_min) / (h * stride) - 1e-9)
        m = stride * np.arange(k_hi, k_lo - 1, -1)
        nodes = xgrid.x_min * np.exp(h * m)
        ppd = math.log(10.0) / (h * stride)
        return cls(float(nodes[-1]), float(nodes[0]), ppd, nodes)

    @classmethod
    def covering(cls, xgrid: LogGrid, margin_decades: float = 1.0, stride: int = 2) -> "TimeGrid":
        f = 10.0 ** margin_decades
        return cls.aligned(xgrid, xgrid.x_min / f, xgrid.x_max * f, stride)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def log_step(self) -> float:
        return math.log(self.nodes[0] / self.nodes[1]) if self.n > 1 else 0.0

    def refined(self, factor=2) -> "TimeGrid":
        t = self.nodes
        s = np.exp(np.linspace(math.log(t[0]), math.log(t[-1]), factor * (t.size - 1) + 1))
        s[::factor] = t
        return TimeGrid(self.t_min, self.t_max, self.points_per_decade * factor, s)


@dataclass(frozen=True, eq=False)
class OperatorField:
    xgrid: LogGrid
    tgrid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.xgrid.n, self.tgrid.n):
            raise ValueError(f"field shape {v.shape} does not match grids")
        if not np.all(np.isfinite(v)):
            raise ValueError("field entries must be finite")

    def column(self, j) -> GridFunction:
        return GridFunction(self.xgrid, self.values[:, j])

    def to_csv(self, path):
        rows = ["t\\x," + ",".join(repr(float(x)) for x in self.xgrid.nodes)]
        for j, t in enumerate(self.tgrid.nodes):
            rows.append(repr(float(t)) + "," + ",".join(repr(float(v)) for v in self.values[:, j]))
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")


def read_field_csv(path) -> OperatorField:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    xs = np.array([float(v) for v in lines[0].split(",")[1:]])
    ts, vals = [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        ts.append(float(parts[0]))
        vals.append([float(v) for v in parts[1:]])
    return OperatorField(LogGrid.from_nodes(xs), TimeGrid(min(ts), max(ts), nodes=np.array(ts)),
                         np.array(vals).T)


# ---------------------------------------------------------------------------
# exact cell weights for under-resolved rows


def _jacobi_cdf(space, theta):
    """Normalized int_{-1}^{theta} (1 - s^2)^{lam-1} ds."""
    lam = space.lam
    return sps.betainc(lam, lam, np.clip(0.5 * (1.0 + theta), 0.0, 1.0))


def _ball_fraction(space, a, u, c1, c2):
    """tau_a(chi_[c1, c2])(u) for arrays u > 0."""
    u = np.maximum(u, 1e-300)
    th = lambda c: (a * a + u * u - c * c) / (2.0 * a * u)
    return _jacobi_cdf(space, th(c1)) - _jacobi_cdf(space, th(c2))


def _graded_panels(lo, hi, levels=10, ratio=0.25):
    """Split [lo, hi] into panels graded geometrically towards both ends."""
    if hi <= lo:
        return []
    mid = 0.5 * (lo + hi)
    half = mid - lo
    cuts = [half * ratio ** k for k in range(levels, 0, -1)]
    left = [lo] + [lo + c for c in cuts] + [mid]
    right = [hi - c for c in reversed(cuts)] + [hi]
    pts = left + right
    return list(zip(pts[:-1], pts[1:]))


def exact_cell_weight(space: LambdaSpace, prof: Profile, a: float, c1: float, c2: float,
                      u_max: float = math.inf, gl_n: int = 12) -> float:
    """int_{c1}^{c2} tau_a(phi)(w) w^{2 lam} dw via the radial form."""
    x, w = np.polynomial.legendre.leggauss(gl_n)
    bps = sorted({abs(a - c1), abs(a - c2), a + c1, a + c2})
    inside = c1 < a < c2
    total = 0.0
    lam2 = 2 * space.lam
    # ball B(a, u) entirely inside the cell for u < bps[0] when a is inside
    edges = [0.0] + [b for b in bps if b > 0]
    edges = [e for e in edges if e <= u_max] + ([u_max] if u_max < edges[-1] else [])
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        if lo == 0.0:
            if not inside:
                continue
            # fraction is 1: log panels for the plain mass integral
            sub = _log_panels(max(hi * 1e-12, 1e-300), hi)
            for p, q in sub:
                uu = 0.5 * (q - p) * x + 0.5 * (q + p)
                total += 0.5 * (q - p) * np.dot(w, prof.phi(uu) * uu ** lam2)
            total += float(prof.phi(np.array([0.0]))[0]) * (hi * 1e-12) ** (lam2 + 1) / (lam2 + 1)
            continue
        osc = prof.oscillation
        pieces = _graded_panels(lo, hi)
        if osc > 0:
            refined = []
            for p, q in pieces:
                k = max(1, int(math.ceil((q - p) * osc / (0.5 * math.pi))))
                step = (q - p) / k
                refined += [(p + i * step, p + (i + 1) * step) for i in range(k)]
            pieces = refined
        elif hi / lo > 4:
            refined = []
            for p, q in pieces:
                refined += _log_panels(p, q) if q / max(p, 1e-300) > 4 else [(p, q)]
            pieces = refined
        P = np.array(pieces)
        uu = 0.5 * (P[:, 1:2] - P[:, 0:1]) * x[None, :] + 0.5 * (P[:, 1:2] + P[:, 0:1])
        vals = prof.phi(uu) * uu ** lam2 * _ball_fraction(space, a, uu, c1, c2)
        total += float(np.sum(0.5 * (P[:, 1] - P[:, 0]) * (vals @ w)))
    return total


def _log_panels(lo, hi, per_unit=2.0):
    n = max(1, int(math.ceil(math.log(hi / lo) * per_unit)))
    e = np.geomspace(lo, hi, n + 1)
    return list(zip(e[:-1], e[1:]))


# ---------------------------------------------------------------------------


def profile_mass(space: LambdaSpace, prof: Profile) -> float:
    """int_0^inf phi(y) y^{2 lam} dy (declared value when the profile carries one)."""
    if prof.mass is not None:
        return float(prof.mass)
    return profile_tail_mass(space, prof, 0.0)


def profile_tail_mass(space: LambdaSpace, prof: Profile, W: float) -> float:
    """int_W^inf phi(y) y^{2 lam} dy by log panels plus the declared power tail."""
    x, w = np.polynomial.legendre.leggauss(12)
    lo = W if W > 0 else 1e-12
    hi = max(lo, 1.0) * 1e12
    if prof.oscillation > 0:
        from .translation import _negligible_radius
        hi = min(hi, max(lo * 2, _negligible_radius(prof, 1e-18)))
        edges = np.arange(lo, hi + 0.25 * math.pi, 0.25 * math.pi)
        edges = np.unique(np.concatenate([np.geomspace(lo, min(hi, max(lo * 2, 1.0)), 40), edges]))
    else:
        edges = np.geomspace(lo, hi, int(math.log(hi / lo) * 2) + 2)
    a, b = edges[:-1, None], edges[1:, None]
    uu = 0.5 * (b - a) * x[None, :] + 0.5 * (b + a)
    total = float(np.sum(0.5 * (b - a)[:, 0] * ((prof.phi(uu) * uu ** (2 * space.lam)) @ w)))
    if W <= 0:
        total += float(prof.phi(np.array([0.0]))[0]) * lo ** space.dim / space.dim
    if not math.isinf(prof.decay) and prof.oscillation == 0 and prof.decay > space.dim:
        k = prof.decay - space.dim
        total += float(prof.phi(np.array([hi]))[0]) * hi ** space.dim / k
    return total


class KernelTable:
    """Table of tau_{r^{a-delta}}(phi)(r^{b-delta}) times cell weights, for lattice offsets a, b.

    Rows whose translated kernel is narrower than a cell (r^{a-delta} h > c_res)
    get exact weights on the ``band`` nearest cells and a diagonal weight that
    restores the row's total mass int tau_a(phi)(w) w^{2 lam} dw = mass(phi).
    """

    def __init__(self, space: LambdaSpace, prof: Profile, h: float, delta: float, lo: int, hi: int,
                 c_res: float = 0.5, band: int = 3):
        self.space, self.prof, self.h, self.delta = space, prof, h, delta
        self.lo, self.hi, self.band = lo, hi, band
        n = hi - lo + 1
        ext = int(math.ceil(math.log(10.0) / h))
        idx = np.arange(lo, hi + ext + 1)
        vals = np.exp(h * (idx - delta))
        self.vals = vals[:n]
        iu, ju = np.triu_indices(n)
        g = unit_translate(space, prof, vals[iu], vals[ju])
        G = np.empty((n, n))
        G[iu, ju] = g
        G[ju, iu] = g
        cw_all = h * vals ** space.dim
        self.cw = cw_all[:n]
        self.Gw = G * self.cw[None, :]
        del G
        self.unresolved = np.nonzero(self.vals * h > c_res)[0]
        self.corr = np.zeros((n, 2 * band + 1))
        if self.unresolved.size == 0:
            return
        rows = self.unresolved
        # columns past the table, only needed for the row sums of unresolved rows
        ra, cb = np.meshgrid(vals[rows], vals[n:], indexing="ij")
        g_ext = unit_translate(space, prof, ra, cb)
        row_ext = g_ext @ cw_all[n:]
        W_top = vals[-1] * math.exp(0.5 * h)
        W_bot = vals[0] * math.exp(-0.5 * h)
        top_tail = profile_tail_mass(space, prof, W_top)
        mass = profile_mass(space, prof)
        u_max = math.inf
        if prof.oscillation > 0:
            from .translation import _negligible_radius
            u_max = _negligible_radius(prof, 1e-18)
        rh = math.exp(0.5 * h)
        for q, r in enumerate(rows):
            exact_row = self.Gw[r].copy()
            for o in range(-band, band + 1):
                c = r + o
                if o == 0 or not 0 <= c < n:
                    continue
                cv = self.vals[c]
                exact_row[c] = exact_cell_weight(space, prof, self.vals[r], cv / rh, cv * rh, u_max)
            bot_tail = float(prof.phi(np.array([self.vals[r]]))[0]) * W_bot ** space.dim / space.dim
            others = exact_row.sum() - exact_row[r] + row_ext[q] + top_tail + bot_tail
            exact_row[r] = mass - others
            for o in range(-band, band + 1):
                c = r + o
                if 0 <= c < n:
                    self.corr[r, o + band] = exact_row[c] - self.Gw[r, c]

    def covers(self, lo, hi):
        return self.lo <= lo and hi <= self.hi


_TABLE_CACHE: dict = {}


def kernel_table(space, prof, h, delta, lo, hi) -> KernelTable:
    key = (space.lam, id(prof), round(h, 12), round(delta, 9))
    entry = _TABLE_CACHE.get(key)
    if entry is not None and entry[1].covers(lo, hi) and entry[0] is prof:
        return entry[1]
    if entry is not None and entry[0] is prof:
        lo, hi = min(lo, entry[1].lo), max(hi, entry[1].hi)
    table = KernelTable(space, prof, h, delta, lo, hi)
    _TABLE_CACHE[key] = (prof, table)
    return table


def clear_table_cache():
    _TABLE_CACHE.clear()


def _lattice_positions(xgrid: LogGrid, tgrid: TimeGrid):
    m = np.log(tgrid.nodes / xgrid.x_min) / xgrid.h
    mr = np.round(m)
    delta = m - mr
    delta = np.where(np.abs(delta) < 1e-7, 0.0, delta)
    # express t_j = x_min r^{m_j + delta_j}; group columns by delta
    return mr.astype(int), np.round(delta, 9)


def _end_factors(n):
    e = np.ones(n)
    e[0] = e[-1] = 0.5
    return e


def _apply_columns(space, prof, xgrid, tgrid, vectors, combine, rows=None):
    """Shared driver: for each time column compute W_block @ v for every v in ``vectors``.

    ``vectors`` has shape (n_v, n_x) with end factors already applied; ``combine``
    maps the (n_v, n_r) products of one column and the row indices to the
    field entries.  ``rows`` restricts the output to a subset of x nodes.
    """
    n = xgrid.n
    rows = np.arange(n) if rows is None else np.asarray(rows, dtype=int)
    m, delta = _lattice_positions(xgrid, tgrid)
    out = np.empty((rows.size, tgrid.n))
    for dval in np.unique(delta):
        cols = np.nonzero(delta == dval)[0]
        lo = int(-m[cols].max())
        hi = int(n - 1 - m[cols].min())
        table = kernel_table(space, prof, xgrid.h, float(dval), lo, hi)
        b = table.band
        unres = np.zeros(table.vals.size, dtype=bool)
        unres[table.unresolved] = True
        for j in cols:
            s = -m[j] - table.lo
            W = table.Gw[s + rows, s:s + n]
            prod = vectors @ W.T
            # exact near-diagonal corrections for under-resolved rows
            sel = np.nonzero(unres[s + rows])[0]
            if sel.size:
                i = rows[sel]
                for o in range(-b, b + 1):
                    k = i + o
                    ok = (k >= 0) & (k < n)
                    if np.any(ok):
                        prod[:, sel[ok]] += table.corr[s + i[ok], o + b][None, :] * vectors[:, k[ok]]
            out[:, j] = combine(prod, rows)
    return out


def field_rows(space: LambdaSpace, f: GridFunction, prof: Profile, tgrid: TimeGrid, rows) -> np.ndarray:
    """Rows of the convolution field: (f # phi_{t_j})(x_i) for i in rows."""
    v = (np.real_if_close(f.values) * _end_factors(f.grid.n))[None, :]
    return _apply_columns(space, prof, f.grid, tgrid, v, lambda p, r: p[0], rows)


def commutator_rows(space: LambdaSpace, f: GridFunction, b: GridFunction, m: int, prof: Profile,
                    tgrid: TimeGrid, rows=None) -> np.ndarray:
    """Rows of the commutator field, expanded binomially over one kernel table."""
    bv = np.asarray(b.values, dtype=float)
    ef = f.values * _end_factors(f.grid.n)
    vecs = np.stack([bv ** r * ef for r in range(m + 1)])
    coeffs = np.stack([math.comb(m, r) * (-bv) ** (m - r) for r in range(m + 1)])

    def combine(prod, r):
        return np.sum(coeffs[:, r] * prod, axis=0)

    return _apply_columns(space, prof, f.grid, tgrid, vecs, combine, rows)


def convolution_field(space: LambdaSpace, f: GridFunction, prof: Profile, tgrid: TimeGrid) -> OperatorField:
    """values[i, j] = (f # phi_{t_j})(x_i)."""
    return OperatorField(f.grid, tgrid, field_rows(space, f, prof, tgrid, None))


def commutator_field(space: LambdaSpace, f: GridFunction, b: GridFunction, m: int, prof: Profile,
                     tgrid: TimeGrid, *, max_nodes: int = 4096) -> OperatorField:
    """values[i, j] = (phi_{t_j} # [(b(.) - b(x_i))^m f])(x_i)."""
    if m < 1:
        raise ValueError("commutator order m must be >= 1")
    if f.grid.n > max_nodes:
        raise ValueError(f"commutator_field: {f.grid.n} nodes exceeds the cost guard {max_nodes}")
    if b.grid != f.grid:
        raise ValueError("b and f must share a grid")
    return OperatorField(f.grid, tgrid, commutator_rows(space, f, b, m, prof, tgrid))


def convolve(space: LambdaSpace, f: GridFunction, prof: Profile, t: float) -> GridFunction:
    """(f # phi_t) on f's grid."""
    return convolution_field(space, f, prof, _single_time(t)).column(0)


def _single_time(t):
    t = float(t)
    return TimeGrid(t / 2, t * 2, 16, np.array([t]))
