"""Geometric grids, grid functions, intervals and the measure x^{2 lambda} dx."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class TailWarning(UserWarning):
    """A truncated integral may be missing a non-negligible tail."""


@dataclass(frozen=True)
class LambdaSpace:
    lam: float

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lambda must be > 0, got {self.lam}")

    @property
    def nu(self) -> float:
        return self.lam - 0.5

    @property
    def dim(self) -> float:
        """Homogeneous dimension 2*lambda + 1."""
        return 2.0 * self.lam + 1.0


@dataclass(frozen=True, eq=False)
class LogGrid:
    """Geometric nodes x_min * r**i, i = 0..n-1, with the last node equal to x_max."""

    x_min: float
    x_max: float
    points_per_decade: float = 64
    nodes: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.x_min > 0 and self.x_max > self.x_min):
            raise ValueError("need 0 < x_min < x_max")
        if self.nodes is None:
            if self.points_per_decade < 16:
                raise ValueError("points_per_decade must be >= 16")
            decades = math.log10(self.x_max / self.x_min)
            n = max(int(round(decades * self.points_per_decade)), 1) + 1
            h = math.log(self.x_max / self.x_min) / (n - 1)
            nodes = self.x_min * np.exp(h * np.arange(n))
            nodes[0] = self.x_min
            nodes[-1] = self.x_max
            object.__setattr__(self, "nodes", nodes)
        self.nodes.setflags(write=False)

    @classmethod
    def from_nodes(cls, nodes) -> "LogGrid":
        nodes = np.array(nodes, dtype=float)
        if nodes.size < 2 or np.any(np.diff(nodes) <= 0) or nodes[0] <= 0:
            raise ValueError("nodes must be positive and strictly increasing")
        ratios = nodes[1:] / nodes[:-1]
        if np.max(np.abs(np.log(ratios) / np.log(ratios[0]) - 1.0)) > 1e-6:
            raise ValueError("nodes are not geometric")
        ppd = math.log(10.0) / math.log(ratios[0])
        return cls(float(nodes[0]), float(nodes[-1]), ppd, nodes)

    @classmethod
    def spanning(cls, x_min, x_max, points_per_decade=64):
        return cls(float(x_min), float(x_max), points_per_decade)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def h(self) -> float:
        """Step in log x."""
        return math.log(self.x_max / self.x_min) / (self.n - 1)

    @property
    def ratio(self) -> float:
        return math.exp(self.h)

    def log_trapezoid_weights(self) -> np.ndarray:
        """Weights c_i with sum_i c_i g(x_i) ~ int g(x) dx over [x_min, x_max]."""
        w = self.h * self.nodes.copy()
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def measure_weights(self, space: LambdaSpace) -> np.ndarray:
        """Quadrature weights for int g dm_lambda over the span."""
        return self.log_trapezoid_weights() * self.nodes ** (2 * space.lam)

    def refined(self, factor: int = 2) -> "LogGrid":
        return LogGrid(self.x_min, self.x_max, self.points_per_decade * factor)

    def __eq__(self, other):
        return isinstance(other, LogGrid) and np.array_equal(self.nodes, other.nodes)

    def __hash__(self):
        return hash((self.n, float(self.nodes[0]), float(self.nodes[-1])))


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: LogGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(float)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, grid: LogGrid, fn) -> "GridFunction":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float) + np.zeros(grid.n))

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def __call__(self, y):
        return interpolate(self, y)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def to_csv(self, path, space: LambdaSpace):
        write_csv(self, path, space)


def interpolate(f: GridFunction, y):
    """Linear interpolation in log x; zero outside the grid span."""
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape, dtype=f.values.dtype)
    inside = (y >= f.grid.x_min) & (y <= f.grid.x_max)
    if np.any(inside):
        s = np.log(y[inside] / f.grid.x_min) / f.grid.h
        i = np.clip(np.floor(s).astype(int), 0, f.grid.n - 2)
        frac = s - i
        out[inside] = (1 - frac) * f.values[i] + frac * f.values[i + 1]
    return out


@dataclass(frozen=True)
class Interval:
    left: float
    right: float

    def __post_init__(self):
        if not (self.left >= 0 and self.right > self.left):
            raise ValueError(f"invalid interval ({self.left}, {self.right})")

    def contains(self, x):
        x = np.asarray(x)
        return (x > self.left) & (x < self.right)

    @property
    def length(self) -> float:
        return self.right - self.left


def measure(space: LambdaSpace, I: Interval | None) -> float:
    """m_lambda(I) in closed form."""
    if I is None:
        return 0.0
    d = space.dim
    return (I.right ** d - I.left ** d) / d


def measure_between(space: LambdaSpace, a, b):
    """Vectorized m_lambda((a, b)) for arrays with 0 <= a <= b."""
    d = space.dim
    return (np.asarray(b, dtype=float) ** d - np.asarray(a, dtype=float) ** d) / d


def ball(x: float, r: float) -> Interval | None:
    """B(x, r) = (x - r, x + r) intersected with (0, inf); None when r = 0."""
    if r <= 0:
        return None
    return Interval(max(x - r, 0.0), x + r)


def lp_norm(space: LambdaSpace, f: GridFunction, p: float, w: GridFunction | np.ndarray | None = None,
            *, tail_tol: float = 1e-6) -> float:
    """L^p(w x^{2 lambda} dx) norm by log-trapezoid; p = inf returns max |f|."""
    if p < 1:
        raise ValueError("lp_norm requires p >= 1")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max(initial=0.0))
    wv = 1.0 if w is None else np.asarray(getattr(w, "values", w), dtype=float)
    integrand = a ** p * wv
    total = float(np.dot(f.grid.measure_weights(space), integrand))
    if total > 0:
        # edge mass over one grid cell, a proxy for what lies beyond the span
        edge = f.grid.h * max(integrand[0] * f.grid.x_min ** space.dim,
                              integrand[-1] * f.grid.x_max ** space.dim)
        if edge > tail_tol * total:
            warnings.warn(f"lp_norm: edge contribution {edge / total:.2e} of total", TailWarning,
                          stacklevel=2)
    return total ** (1.0 / p)


def write_csv(f: GridFunction, path, space: LambdaSpace):
    lines = [f"# lambda={float(space.lam)!r}", "x,value"]
    for x, v in zip(f.grid.nodes, f.values):
        lines.append(f"{float(x)!r},{float(v)!r}" if np.isrealobj(f.values) else f"{float(x)!r},{complex(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> tuple[LambdaSpace, GridFunction]:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# lambda="):
        raise ValueError("missing '# lambda=' header")
    space = LambdaSpace(float(text[0].split("=", 1)[1]))
    xs, vs = [], []
    for line in text[2:]:
        if not line.strip():
            continue
        x, v = line.split(",", 1)
        xs.append(float(x))
        vs.append(complex(v) if "j" in v else float(v))
    grid = LogGrid.from_nodes(xs)
    return space, GridFunction(grid, np.array(vs))
