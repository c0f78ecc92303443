"""Hankel transform, spectral multipliers and the Bessel operator.

h(f)(x) = int_0^inf (xy)^{-nu} J_nu(xy) f(y) y^{2 lam} dy with nu = lam - 1/2.
With this kernel h is its own inverse and an isometry of L^2(m_lam).

Two evaluation paths:

* grid samples: log-trapezoid quadrature against the samples (O(N^2), direct);
* callables / profiles: panel Gauss-Legendre quadrature in log y up to the
  first oscillation, half-period panels beyond, with the partial sums of the
  oscillating tail accelerated by the epsilon algorithm.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import roots_legendre

from .grid import GridFunction, LambdaSpace, LogGrid, TailWarning
from .kernels import make_kernel
from .profiles import Profile, gamma_ratio_constant
from .special import _reduced_bessel_unchecked, fast_reduced_bessel


class ResolutionError(ValueError):
    """The requested transform would not be resolved by the sample spacing."""


def hankel_kernel(space: LambdaSpace, x, y):
    """(xy)^{-nu} J_nu(xy)."""
    return _reduced_bessel_unchecked(space.nu, np.multiply.outer(np.asarray(x, float), np.asarray(y, float)))


def effective_support(space: LambdaSpace, f: GridFunction, rel=1e-12) -> float:
    """Largest node where |f| y^{2 lam + 1} is not negligible against its maximum."""
    g = np.abs(f.values) * f.x ** space.dim
    top = g.max() if g.size else 0.0
    if top == 0:
        return float(f.x[0])
    idx = np.nonzero(g > rel * top)[0]
    return float(f.x[idx[-1]])


def _grid_transform(space, f: GridFunction, x, check=True, max_phase=0.5):
    """Log-trapezoid quadrature of the kernel against f.

    f is smooth on the grid scale in s = log y while the kernel oscillates with
    local frequency x y in s; outputs with x * ysup * h > max_phase integrate a
    cubic spline of f (in s) on a sub-sampled grid, which keeps the kernel
    resolved without asking more of the samples.
    """
    y = f.x
    vals = np.asarray(f.values)
    if check:
        g = np.abs(vals) * y ** space.dim
        scale = g.max() if g.size else 0.0
        # the log-trapezoid integrand at both ends estimates the truncated mass
        if scale > 0 and max(g[0], g[-1]) > 1e-6 * scale:
            warnings.warn(f"hankel_transform: tail contribution {max(g[0], g[-1]) / scale:.2e} "
                          "of the result scale", TailWarning, stacklevel=3)
    h = f.grid.h
    # below the first node f is taken constant; the kernel integrates exactly:
    # int_0^a (xy)^{-nu} J_nu(xy) y^{2 lam} dy = a^{2 lam + 1} (xa)^{-nu-1} J_{nu+1}(xa)
    a = y[0]
    head = vals[0] * a ** space.dim * _reduced_bessel_unchecked(space.nu + 1.0, x * a)
    ysup = effective_support(space, f)
    top = min(int(np.searchsorted(y, ysup)) + 4, y.size - 1)
    sub = 2 ** np.ceil(np.log2(np.maximum(x * ysup * h / max_phase, 1.0))).astype(int)
    out = np.zeros(x.size, dtype=np.result_type(vals, float))
    spline = None
    for u in np.unique(sub):
        sel = sub == u
        if u == 1:
            w = f.grid.measure_weights(space)
            out[sel] = hankel_kernel(space, x[sel], y) @ (w * vals)
            continue
        if spline is None:
            from scipy.interpolate import CubicSpline
            spline = CubicSpline(np.log(y), vals)
        s = np.log(y[0]) + (h / u) * np.arange(top * u + 1)
        yf = np.exp(s)
        w = (h / u) * yf ** space.dim
        w[0] *= 0.5
        w[-1] *= 0.5
        fv = spline(s)
        xs = x[sel]
        # blocks keep the kernel matrix small
        step = max(1, int(4e6 // yf.size))
        res = np.empty(xs.size, dtype=out.dtype)
        for i in range(0, xs.size, step):
            kern = fast_reduced_bessel(space.nu, np.multiply.outer(xs[i:i + step], yf))
            res[i:i + step] = kern @ (w * fv)
        out[sel] = res
    return out + head


def hankel_transform(space: LambdaSpace, f, out_grid: LogGrid | np.ndarray, *, strict=True, **kw):
    """h(f) on out_grid.

    f may be a GridFunction (direct quadrature against its samples) or a
    Profile / callable (adaptive oscillatory quadrature, see hankel_at).
    For samples, max(x) * ysup <= 10 * points_per_decade is enforced where
    ysup is the effective support of f; with strict=False the unresolved
    outputs are returned as zeros with a warning instead.
    """
    if isinstance(out_grid, LogGrid):
        xs = out_grid.nodes
    else:
        xs = np.asarray(out_grid, dtype=float)
    if not isinstance(f, GridFunction):
        vals = hankel_at(space, f, xs, **kw)
        return GridFunction(out_grid, vals) if isinstance(out_grid, LogGrid) else vals
    ysup = effective_support(space, f)
    limit = 10.0 * f.grid.points_per_decade / ysup
    ok = xs <= limit * (1 + 1e-12)
    if not np.all(ok):
        if strict:
            raise ResolutionError(f"hankel_transform: max(x)={xs.max():.4g} times support {ysup:.4g} "
                                  f"exceeds 10 * points_per_decade")
        warnings.warn(f"hankel_transform: outputs above x={limit:.4g} are unresolved and set to 0",
                      TailWarning, stacklevel=2)
    out = np.zeros(xs.size, dtype=np.result_type(np.asarray(f.values), float))
    if np.any(ok):
        out[ok] = _grid_transform(space, f, xs[ok])
    return GridFunction(out_grid, out) if isinstance(out_grid, LogGrid) else out


# ---------------------------------------------------------------------------
# callables


def _wynn(seq):
    """Epsilon-algorithm limit of a sequence, and the size of its last correction."""
    s = np.asarray(seq, dtype=float)
    n = s.size
    e_prev = np.zeros(n + 1)
    e = s.copy()
    best, err = s[-1], abs(s[-1] - s[-2]) if n > 1 else math.inf
    for k in range(1, n):
        d = e[1:] - e[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = e_prev[1:e.size] + 1.0 / d
        if not np.all(np.isfinite(nxt)):
            break
        e_prev, e = e, nxt
        if k % 2 == 0 and e.size >= 2:
            best, err = e[-1], abs(e[-1] - e[-2])
    return best, err


_GL_CACHE: dict = {}


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = roots_legendre(n)
    return _GL_CACHE[n]


def _as_profile_like(f):
    if isinstance(f, Profile):
        return f, f.oscillation, f.decay
    osc = getattr(f, "oscillation", 0.0)
    decay = getattr(f, "decay", math.inf)
    return f, osc, decay


def hankel_at(space: LambdaSpace, f, x, *, rtol=1e-11, gl_n=16, y_min=1e-12, y_max=1e9,
              oscillation=None, decay=None):
    """h(f)(x) for a callable or Profile f at the points x >= 0.

    ``oscillation`` (angular frequency of f) and ``decay`` (power-law rate) are
    read off a Profile; for bare callables they default to 0 and inf.
    """
    fn, osc, dec = _as_profile_like(f)
    if oscillation is not None:
        osc = oscillation
    if decay is not None:
        dec = decay
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([_hankel_point(space, fn, float(xi), osc, dec, rtol, gl_n, y_min, y_max) for xi in x])
    return out


def _hankel_point(space, fn, x, osc, decay, rtol, gl_n, y_min, y_max):
    nu, d = space.nu, space.dim
    gx, gw = _gl(gl_n)

    def integrand(y):
        return np.asarray(fn(y), dtype=float) * fast_reduced_bessel(nu, x * y) * y ** (2 * space.lam)

    freq = x + osc
    # analytic head on (0, y_min): f(0) j(0) y^{2 lam} dy
    head = float(np.asarray(fn(np.array([0.0])))[0]) * float(_reduced_bessel_unchecked(nu, 0.0)) \
        * y_min ** d / d
    # log region up to where the integrand starts oscillating
    y1 = y_max if freq == 0 else min(y_max, 1.0 / freq)
    total = head
    if y1 > y_min:
        edges = np.linspace(math.log(y_min), math.log(y1), int(math.ceil(2 * math.log(y1 / y_min))) + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        s = 0.5 * (hi - lo) * gx[None, :] + 0.5 * (hi + lo)
        y = np.exp(s)
        total += float(np.sum(integrand(y) * y * (0.5 * (hi - lo)) * gw[None, :]))
    if y1 >= y_max:
        if not math.isinf(decay):
            # power-law tail g(y) ~ g(Y) (y / Y)^{-(decay - 2 lam)}
            p = decay - 2 * space.lam
            if p > 1:
                total += float(integrand(np.array([y_max]))[0]) * y_max / (p - 1)
        return total
    # oscillating region: half-period panels, summed in blocks, tail extrapolated
    width = math.pi / freq
    block = 64
    start = y1
    sums = []
    run = total
    scale = abs(total)
    prev_est = None
    for _ in range(4000):
        edges = start + width * np.arange(block + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        y = 0.5 * (hi - lo) * gx[None, :] + 0.5 * (hi + lo)
        panel = np.sum(integrand(y) * (0.5 * width) * gw[None, :], axis=1)
        part = run + np.cumsum(panel)
        run = float(part[-1])
        scale = max(scale, float(np.max(np.abs(part))))
        start = float(edges[-1])
        sums.extend(part.tolist())
        tail_small = np.max(np.abs(panel[-8:])) <= 1e-3 * rtol * max(scale, 1e-300)
        if tail_small:
            return run
        est, err = _wynn(sums[-30:])
        if prev_est is not None and abs(est - prev_est) <= rtol * max(scale, 1e-300) \
                and err <= rtol * max(scale, 1e-300):
            return est
        prev_est = est
        if start > y_max:
            break
    warnings.warn(f"hankel_at: oscillatory tail at x={x:g} did not settle", TailWarning, stacklevel=3)
    return prev_est if prev_est is not None else run


# ---------------------------------------------------------------------------
# multipliers and the Bessel operator


def spectral_multiplier(space: LambdaSpace, m, f: GridFunction, *, freq_grid: LogGrid | None = None,
                        noise_floor=1e-11):
    """T_m f = h(m(y^2) h(f)) on the grid of f.

    The intermediate transform lives on freq_grid (default: the nodes of f's
    grid inside the resolved range).  Outputs beyond the resolved range of the
    back transform are set to 0 with a TailWarning if they matter.
    """
    g = f.grid
    if freq_grid is None:
        ysup = effective_support(space, f)
        top = min(g.x_max, 10.0 * g.points_per_decade / ysup)
        freq_grid = LogGrid(g.x_min, top, g.points_per_decade) if top > g.x_min * 1.5 else g
    hf = hankel_transform(space, f, freq_grid, strict=False)
    y = freq_grid.nodes
    vals = np.asarray(m(y * y)) * hf.values
    # past the last frequency above the quadrature noise the content is noise,
    # which the back transform would amplify by y^{2 lam}
    mag = np.abs(hf.values)
    live = np.nonzero(mag > noise_floor * mag.max())[0] if mag.max() > 0 else np.array([0])
    vals[live[-1] + 1:] = 0.0
    mid = hf.with_values(vals)
    return hankel_transform(space, mid, g, strict=False)


def bochner_riesz_means(space: LambdaSpace, f: GridFunction, alpha: float, t: float) -> GridFunction:
    """B_t f = h((1 - (y/t)^2)_+^alpha h f), computed as (1/K) f # phi_{1/t}."""
    from .fields import convolve

    prof = make_kernel(space, f"bochner-riesz:{alpha}")
    out = convolve(space, f, prof, 1.0 / t)
    return out.with_values(out.values / gamma_ratio_constant(space))


def _fd_weights(offsets, order):
    """Finite-difference weights for the given derivative order at 0."""
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(A, rhs)


def apply_bessel_operator(space: LambdaSpace, f: GridFunction, *, return_mask=False):
    """Delta f = -f'' - (2 lam / x) f' by 4th-order differences in s = log x.

    With g(s) = f(e^s): Delta f = -(g'' + (2 lam - 1) g') / x^2.  The two nodes
    at each end use one-sided stencils and are flagged unreliable in the mask.
    """
    v = np.asarray(f.values)
    n = v.size
    if n < 6:
        raise ValueError("need at least 6 nodes")
    h = f.grid.h
    d1 = np.zeros_like(v)
    d2 = np.zeros_like(v)
    c1 = np.array([1, -8, 0, 8, -1]) / 12.0
    c2 = np.array([-1, 16, -30, 16, -1]) / 12.0
    for k in range(5):
        d1[2:-2] += c1[k] * v[k:n - 4 + k]
        d2[2:-2] += c2[k] * v[k:n - 4 + k]
    for i in (0, 1, n - 2, n - 1):
        off = np.arange(6) - i if i < 2 else np.arange(n - 6, n) - i
        d1[i] = _fd_weights(off, 1) @ v[i + off]
        d2[i] = _fd_weights(off, 2) @ v[i + off]
    x = f.x
    out = -(d2 / h ** 2 + (2 * space.lam - 1) * d1 / h) / x ** 2
    res = GridFunction(f.grid, out)
    if return_mask:
        mask = np.ones(n, dtype=bool)
        mask[[0, 1, n - 2, n - 1]] = False
        return res, mask
    return res
