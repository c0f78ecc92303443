"""Sparse families, the sparse averaging operator and a stopping-time extractor.

Averages are node quadratures against dm_lam (the grid measure weights), so
the sparse operator is an exactly symmetric bilinear form on the grid.
Cube measures and packing use the closed form of m_lam.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridFunction, LambdaSpace
from .operators import OperatorHandle
from .weights import Cube, DyadicSystem, build_dyadic


@dataclass
class SparseFamily:
    cubes: list
    major_sets: dict
    eta: float
    overlap_c: int
    dyadic: DyadicSystem | None = None
    stats: dict = field(default_factory=dict)

    def check(self, space: LambdaSpace, x: np.ndarray, eta_target: float = 0.0):
        """Overlap count of the E_Q at the nodes and the achieved eta."""
        count = np.zeros(x.size, dtype=int)
        for q in self.cubes:
            count[self.major_sets[q]] += 1
        return int(count.max(initial=0))

    def dump_jsonl(self, path, space: LambdaSpace, f: GridFunction | None = None):
        lines = []
        for q in self.cubes:
            rec = {"level": q.level, "index": q.index, "left": q.left, "right": q.right,
                   "measure": q.measure(space), "eta_achieved": self.stats.get("eta_q", {}).get(q)}
            if f is not None:
                rec["avg"] = cube_average(space, f, q.left, q.right)
            lines.append(json.dumps(rec))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))


def _node_weights(space, f: GridFunction):
    return f.grid.measure_weights(space)


def cube_average(space: LambdaSpace, f: GridFunction, left: float, right: float, *, absolute=False) -> float:
    """Node-quadrature average of f over [left, right); 0 when no node falls inside."""
    x = f.x
    lo = np.searchsorted(x, left, side="left")
    hi = np.searchsorted(x, right, side="left")
    if hi <= lo:
        return 0.0
    w = _node_weights(space, f)[lo:hi]
    v = f.values[lo:hi]
    if absolute:
        v = np.abs(v)
    return float(np.dot(w, v) / w.sum())


def sparse_operator(space: LambdaSpace, S: SparseFamily, f: GridFunction, *, dilation: float = 1.0,
                    absolute: bool = False) -> GridFunction:
    """sum_Q <f>_{sQ} chi_Q with s = dilation (1 gives the operator A_S)."""
    x = f.x
    out = np.zeros(x.size)
    for q in S.cubes:
        lo, hi = (q.left, q.right) if dilation == 1 else q.dilate(dilation)
        avg = cube_average(space, f, lo, hi, absolute=absolute)
        out[q.node_indices(x)] += avg
    return GridFunction(f.grid, out)


class SparseExtractionError(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class ExtractParams:
    alpha_stop: float = 4.0
    c_level: float | None = None
    eta_target: float = 0.5
    retries: int = 4
    max_cubes: int = 5000


def weak_ratio(space: LambdaSpace, Tf: np.ndarray, f: GridFunction) -> float:
    """sup_s s m({|Tf| > s}) / ||f||_1 on the grid, the weak-(1,1) reference level C_T."""
    w = _node_weights(space, f)
    a = np.abs(Tf)
    order = np.argsort(a)[::-1]
    mass = np.cumsum(w[order])
    # s slightly below a[order[k]] captures the mass of the k+1 largest values
    weak = float(np.max(a[order] * mass)) if a.size else 0.0
    l1 = float(np.dot(w, np.abs(f.values)))
    return weak / l1 if l1 > 0 else 0.0


def dilate_doubling(space: LambdaSpace, s: float = 3.0) -> float:
    """sup over delta-adic Q of m_lam(sQ) / m_lam(Q) (delta = 1/2)."""
    k = np.arange(0, 4096, dtype=float)
    r = 0.5 * (s - 1)
    lo = np.maximum(k - r, 0.0)
    ratio = ((k + 1 + r) ** space.dim - lo ** space.dim) / ((k + 1) ** space.dim - k ** space.dim)
    return float(ratio.max())


def extract_sparse(space: LambdaSpace, T: OperatorHandle, f: GridFunction, Q0: Cube | None = None,
                   params: ExtractParams | None = None, dyadic: DyadicSystem | None = None) -> SparseFamily:
    """Stopping-time sparse family for T at f, verified for sparseness and domination.

    At a cube Q with Lambda_Q = C_T <|f|>_{3Q}, the exceptional set is
    E = {x in Q : |T(f chi_{3Q})(x)| > c_level Lambda_Q}.  A dyadic P inside Q
    stops when <|f|>_{3P} > alpha_stop <|f|>_{3Q} or when E fills more than
    half of P (in measure); the stopping children are the maximal such P.
    c_level starts at 4 D with D = sup m(3Q)/m(Q), so that the weak-type
    bound m(E) <= C_T ||f chi_3Q||_1 / (c_level Lambda_Q) is at most m(Q)/4.
    The family is accepted when every cube keeps a fraction eta_target of its
    measure outside its children; otherwise c_level and alpha_stop double
    (up to params.retries times).  Domination T f <= C_dom sum <|f|>_{3Q} chi_Q is
    checked at every node of Q0 and C_dom is reported.
    """
    params = params or ExtractParams()
    g = f.grid
    x = g.nodes
    if dyadic is None:
        dyadic = build_dyadic(space, (0.0, g.x_max * (1 + 1e-9)), xgrid=g)
    if Q0 is None:
        Q0 = dyadic.root()
    rows0 = Q0.node_indices(x)
    lo3, hi3 = Q0.dilate(3.0)
    fv = np.asarray(f.values, dtype=float)
    if np.any((fv != 0) & ((x < lo3) | (x >= hi3))):
        raise ValueError("f must be supported in 3 Q0")
    wts = _node_weights(space, f)
    Tf0 = np.abs(np.asarray(T(f, rows0), dtype=float))

    if not np.any(fv):
        fam = SparseFamily([Q0], {Q0: rows0}, 1.0, 1, dyadic, {"C_dom": 0.0, "C_T": 0.0, "c_level": 0.0})
        return fam

    Tf_full = np.zeros(x.size)
    Tf_full[rows0] = Tf0
    C_T = weak_ratio(space, Tf_full, f)
    c_level = params.c_level if params.c_level is not None else 4.0 * dilate_doubling(space)
    alpha = params.alpha_stop
    history = []
    for attempt in range(params.retries + 1):
        fam, worst = _build(space, T, f, fv, x, wts, Q0, dyadic, params, C_T, c_level, Tf0, alpha)
        history.append({"c_level": c_level, "alpha_stop": alpha, "eta": fam.eta if fam else None,
                        "worst_packing": worst})
        if fam is not None and fam.eta >= params.eta_target:
            break
        c_level *= 2
        alpha *= 2
    else:
        raise SparseExtractionError(
            f"packing exceeds 1 - eta_target after {params.retries} doublings of the stopping levels", history)

    # domination gate
    S = sparse_operator(space, fam, f, dilation=3.0, absolute=True).values[rows0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(S > 0, Tf0 / S, np.where(Tf0 > 0, np.inf, 0.0))
    C_dom = float(ratio.max(initial=0.0))
    fam.stats.update({"C_dom": C_dom, "C_T": C_T, "c_level": c_level, "alpha_stop": alpha, "history": history,
                      "n_cubes": len(fam.cubes)})
    if not math.isfinite(C_dom):
        raise SparseExtractionError("domination fails: T f > 0 where the sparse form vanishes", fam.stats)
    fam.overlap_c = fam.check(space, x)
    return fam


def _build(space, T, f, fv, x, wts, Q0, dyadic, params, C_T, c_level, Tf0, alpha):
    absf = np.abs(fv)
    cw = np.concatenate([[0.0], np.cumsum(wts * absf)])
    cm = np.concatenate([[0.0], np.cumsum(wts)])

    def avg3(q):
        lo, hi = q.dilate(3.0)
        i = np.searchsorted(x, lo, side="left")
        j = np.searchsorted(x, hi, side="left")
        m = cm[j] - cm[i]
        return (cw[j] - cw[i]) / m if m > 0 else 0.0

    cubes, major, eta_q = [], {}, {}
    stack = [(Q0, Tf0)]
    worst = 0.0
    while stack:
        Q, TQ = stack.pop()
        rows = Q.node_indices(x)
        cubes.append(Q)
        if len(cubes) > params.max_cubes:
            raise SparseExtractionError("cube budget exhausted", {"n": len(cubes)})
        aQ = avg3(Q)
        lam_Q = C_T * aQ
        if TQ is None:
            lo3, hi3 = Q.dilate(3.0)
            trunc = f.with_values(np.where((x >= lo3) & (x < hi3), fv, 0.0))
            TQ = np.abs(np.asarray(T(trunc, rows), dtype=float))
        bad = np.zeros(x.size, dtype=bool)
        bad[rows] = TQ > c_level * lam_Q
        cbad = np.concatenate([[0.0], np.cumsum(wts * bad)])
        children = []
        if rows.size > 1:
            frontier = Q.children()
            while frontier:
                P = frontier.pop()
                pr = P.node_indices(x)
                if pr.size == 0:
                    continue
                mP = cm[pr[-1] + 1] - cm[pr[0]]
                frac = (cbad[pr[-1] + 1] - cbad[pr[0]]) / mP
                if avg3(P) > alpha * aQ or frac > 0.5:
                    children.append(P)
                elif pr.size > 1:
                    frontier.extend(P.children())
        mQ = Q.measure(space)
        packed = sum(P.measure(space) for P in children)
        worst = max(worst, packed / mQ)
        eta_q[Q] = 1 - packed / mQ
        covered = np.zeros(x.size, dtype=bool)
        for P in children:
            covered[P.node_indices(x)] = True
        major[Q] = rows[~covered[rows]]
        for P in children:
            stack.append((P, None))
        if worst > 1 - params.eta_target:
            return None, worst
    eta = min(eta_q.values())
    fam = SparseFamily(cubes, major, eta, 1, dyadic, {"eta_q": eta_q})
    return fam, worst
