"""Hankel translation of radial profiles.

tau_a(phi)(b) = c_lam * int_{-1}^{1} phi(sqrt(a^2 + b^2 - 2abu)) (1 - u^2)^{lam-1} du,
c_lam = Gamma(lam + 1/2) / (Gamma(lam) sqrt(pi)).

Two evaluation routes:

* when 2ab is small against a^2 + b^2 + 1 the integrand is analytic in u on a
  wide Bernstein ellipse and a plain Gauss-Jacobi rule converges geometrically;
* otherwise each half of the u-range is written with v = 1 - |u| as
  int_0^1 phi(sqrt(A +- P v)) v^{lam-1} (2 - v)^{lam-1} dv (A = (a -+ b)^2,
  P = 2ab) and integrated in sigma = log v, which resolves the narrow window
  near the singular point no matter how large ab is.  Oscillating profiles
  switch to linear panels in r = sqrt(A +- P v) once r has moved one radian.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .grid import GridFunction, LambdaSpace, LogGrid
from .profiles import Profile
from .special import gauss_jacobi, log_gamma


class QuadratureResolutionError(RuntimeError):
    """Doubling the quadrature changed the result beyond tolerance."""


def translation_constant(space: LambdaSpace) -> float:
    lam = space.lam
    return math.exp(log_gamma(lam + 0.5) - log_gamma(lam) - 0.5 * math.log(math.pi))


@lru_cache(maxsize=64)
def _gj(n, exponent):
    r = gauss_jacobi(n, exponent)
    return r.nodes, r.weights


@lru_cache(maxsize=16)
def _gl(n):
    return np.polynomial.legendre.leggauss(n)


_MAX_BLOCK = 1_500_000


def _gj_route(space, prof, a, b, n):
    u, w = _gj(n, space.lam - 1.0)
    out = np.empty(a.size)
    step = max(1, _MAX_BLOCK // n)
    for s in range(0, a.size, step):
        aa = a[s:s + step, None]
        bb = b[s:s + step, None]
        arg = np.sqrt(np.maximum(aa * aa + bb * bb - 2 * aa * bb * u[None, :], 0.0))
        out[s:s + step] = prof.phi(arg) @ w
    return out * translation_constant(space)


def _half_integral(space, prof, A, P, sign, r_cut, panel_width, gl_n, head_tol):
    """int_0^1 phi(sqrt(A + sign P v)) v^{lam-1} (2 - v)^{lam-1} dv for arrays A, P."""
    lam = space.lam
    osc = prof.oscillation
    n = A.size
    out = np.zeros(n)
    rA = np.sqrt(A)
    # restrict v to where r <= r_cut (only oscillating profiles carry a finite cut)
    if sign > 0:
        r_top = np.sqrt(A + P)
        v_top = np.where(r_top > r_cut, (r_cut ** 2 - A) / P, 1.0)
        v_bot = np.zeros(n)
    else:
        r_low = np.sqrt(np.maximum(A - P, 0.0))
        v_top = np.ones(n)
        v_bot = np.where(rA > r_cut, (A - r_cut ** 2) / P, 0.0)
        skip = r_low >= r_cut
        v_top = np.where(skip, 0.0, v_top)
    live = v_top > v_bot
    has_head = live & (v_bot == 0.0)
    v0 = np.minimum(1e-9, head_tol * np.maximum(A, 1.0) / np.maximum(P, 1e-300))
    v0 = np.minimum(v0, 0.5 * v_top)
    lo = np.where(has_head, v0, v_bot)
    # head: phi(sqrt(A)) * 2^{lam-1} v0^lam / lam
    head = np.where(has_head, prof.phi(rA) * 2.0 ** (lam - 1) * v0 ** lam / lam, 0.0)
    out += head
    if osc > 0:
        # log region while r moves by less than one radian / osc, linear-in-r afterwards
        dr = 1.0 / osc
        if sign > 0:
            v_switch = ((rA + dr) ** 2 - A) / np.maximum(P, 1e-300)
        else:
            v_switch = (A - np.maximum(rA - dr, 0.0) ** 2) / np.maximum(P, 1e-300)
        v_switch = np.where(v_bot > 0, lo, v_switch)
        v_switch = np.clip(v_switch, lo, v_top)
    else:
        v_switch = v_top
    gl_x, gl_w = _gl(gl_n)
    # sigma region [log lo, log v_switch]
    s_lo = np.log(np.maximum(lo, 1e-300))
    s_hi = np.log(np.maximum(v_switch, 1e-300))
    span = np.where(live & (v_switch > lo), s_hi - s_lo, 0.0)
    npan = np.maximum(np.ceil(span / panel_width).astype(int), 1)
    for cnt in np.unique(npan[span > 0]):
        idx = np.nonzero((npan == cnt) & (span > 0))[0]
        k = cnt * gl_n
        step = max(1, _MAX_BLOCK // k)
        t = ((np.arange(cnt)[:, None] + 0.5 * (gl_x[None, :] + 1.0)) / cnt).ravel()
        wt = np.tile(gl_w * 0.5, cnt) / cnt
        for s in range(0, idx.size, step):
            ii = idx[s:s + step]
            L = span[ii][:, None]
            sig = s_lo[ii][:, None] + L * t[None, :]
            v = np.exp(sig)
            r = np.sqrt(np.maximum(A[ii][:, None] + sign * P[ii][:, None] * v, 0.0))
            f = prof.phi(r) * np.exp(lam * sig) * (2.0 - v) ** (lam - 1.0)
            out[ii] += (f @ wt) * span[ii]
    if osc > 0:
        # linear region in r between r(v_switch) and r(v_top or v_bot)
        if sign > 0:
            r1 = np.sqrt(A + P * v_switch)
            r2 = np.sqrt(A + P * v_top)
        else:
            r1 = np.sqrt(np.maximum(A - P * v_top, 0.0))
            r2 = np.sqrt(np.maximum(A - P * v_switch, 0.0))
        span_r = np.where(live, r2 - r1, 0.0)
        width = 0.5 * math.pi / osc
        npan = np.ceil(span_r / width).astype(int)
        npan = np.where(span_r > 0, np.maximum(npan, 1), 0)
        buckets = np.where(npan > 0, 2 ** np.ceil(np.log2(np.maximum(npan, 1))).astype(int), 0)
        for cnt in np.unique(buckets[buckets > 0]):
            idx = np.nonzero(buckets == cnt)[0]
            k = cnt * gl_n
            step = max(1, _MAX_BLOCK // k)
            t = ((np.arange(cnt)[:, None] + 0.5 * (gl_x[None, :] + 1.0)) / cnt).ravel()
            wt = np.tile(gl_w * 0.5, cnt) / cnt
            for s in range(0, idx.size, step):
                ii = idx[s:s + step]
                L = span_r[ii][:, None]
                r = r1[ii][:, None] + L * t[None, :]
                if sign > 0:
                    v = (r * r - A[ii][:, None]) / P[ii][:, None]
                else:
                    v = (A[ii][:, None] - r * r) / P[ii][:, None]
                v = np.clip(v, 1e-300, 2.0)
                f = prof.phi(r) * v ** (lam - 1.0) * (2.0 - v) ** (lam - 1.0) * 2.0 * r / P[ii][:, None]
                out[ii] += (f @ wt) * span_r[ii]
    return out


def _negligible_radius(prof: Profile, rel: float) -> float:
    env0 = float(prof.envelope(np.array([0.0]))[0])
    rr = np.geomspace(1.0, 1e12, 1201)
    ok = prof.envelope(rr) <= rel * env0
    return float(rr[np.argmax(ok)]) if np.any(ok) else math.inf


def unit_translate(space: LambdaSpace, prof: Profile, a, b, *, panel_width=1.0, gl_n=8,
                   gj_base=32, tail_tol=1e-9, head_tol=1e-12, cutoff=1e-17):
    """tau_a(phi)(b), vectorized over broadcast arrays a, b >= 0."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    shape = a.shape
    a = a.ravel().copy()
    b = b.ravel().copy()
    out = np.zeros(a.size)
    s_m = a * a + b * b
    P = 2 * a * b
    d = np.abs(a - b)
    # pairs whose whole integration range sits where |phi| is negligible
    env0 = float(prof.envelope(np.array([0.0]))[0])
    alive = prof.envelope(d) > cutoff * env0
    if prof.even:
        easy = P <= 0.5 * (s_m + 1.0)
    else:
        easy = (P <= 0.5 * s_m) | (P <= 0.5 * (s_m + 1.0)) & (s_m > 4.0)
    # oscillating integrands needing long rules go to the panel route instead
    need_all = gj_base + np.ceil(2.0 * prof.oscillation * (a + b - d)).astype(int)
    easy &= need_all <= 8 * gj_base
    gj_mask = alive & easy
    if np.any(gj_mask):
        idx = np.nonzero(gj_mask)[0]
        need = need_all[idx]
        nb = 2 ** np.ceil(np.log2(need)).astype(int)
        for n in np.unique(nb):
            sel = idx[nb == n]
            out[sel] = _gj_route(space, prof, a[sel], b[sel], int(n))
    hard = alive & ~easy
    if np.any(hard):
        idx = np.nonzero(hard)[0]
        if prof.oscillation > 0 and prof.decay > space.dim - 1:
            r_cut = np.maximum(d[idx], 1.0) * tail_tol ** (-1.0 / (prof.decay - 2 * space.lam))
            # past r_abs the profile itself is negligible against phi(0)
            r_abs = _negligible_radius(prof, cutoff * 1e-1)
            r_cut = np.minimum(r_cut, np.maximum(r_abs, d[idx] + 50.0 / prof.oscillation))
        else:
            r_cut = np.full(idx.size, np.inf)
        Pn = P[idx]
        near = _half_integral(space, prof, d[idx] ** 2, Pn, +1, r_cut, panel_width, gl_n, head_tol)
        far = _half_integral(space, prof, (a[idx] + b[idx]) ** 2, Pn, -1, r_cut, panel_width, gl_n, head_tol)
        out[idx] = translation_constant(space) * (near + far)
    return out.reshape(shape)


def translate_values(space: LambdaSpace, prof: Profile, t: float, x, y, **kw):
    """tau_x(phi_t)(y) with phi_t(z) = t^{-2 lam - 1} phi(z / t)."""
    t = float(t)
    if not t > 0:
        raise ValueError("t must be > 0")
    return t ** (-space.dim) * unit_translate(space, prof, np.asarray(x) / t, np.asarray(y) / t, **kw)


def translate(space: LambdaSpace, prof: Profile, t: float, x: float, ygrid: LogGrid, *,
              rtol=1e-7) -> GridFunction:
    """tau_x(phi_t) sampled on ygrid, checked against a doubled quadrature."""
    y = ygrid.nodes
    coarse = translate_values(space, prof, t, x, y)
    fine = translate_values(space, prof, t, x, y, panel_width=0.5, gl_n=12, gj_base=64)
    scale = np.max(np.abs(fine)) if fine.size else 0.0
    bad = np.abs(fine - coarse) > rtol * np.abs(fine) + 1e-15 * scale
    if np.any(bad):
        i = int(np.argmax(bad))
        raise QuadratureResolutionError(
            f"translate: doubling changed value at y={y[i]:.6g} from {coarse[i]:.12g} to {fine[i]:.12g}")
    return GridFunction(ygrid, fine)


def convolve_profiles(space: LambdaSpace, f, s: float, g: Profile, t: float, x, *, gl_n=16,
                      log_width=0.25, span=1e-10):
    """(f_s #_lam g_t)(x) at points x by panel quadrature over y.

    f is any callable profile (dilated as f_s(y) = s^{-2 lam - 1} f(y / s)),
    g a Profile that is translated.  Panels are log spaced and refined around
    y = x on the scale of t, where tau_x(g_t) concentrates.
    """
    gx, gw = _gl(gl_n)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.size)
    for i, xi in enumerate(xs):
        scale = max(xi, s, t)
        lo, hi = span * min(xi, s, t), scale / span ** 0.6
        edges = np.exp(np.arange(math.log(lo), math.log(hi) + log_width, log_width))
        k = t * 2.0 ** np.arange(-4, 60)
        k = k[k < hi]
        near = np.concatenate([xi - k, xi + k, [xi]])
        edges = np.unique(np.concatenate([edges, near[(near > lo) & (near < hi)]]))
        a, b = edges[:-1, None], edges[1:, None]
        y = 0.5 * (b - a) * gx[None, :] + 0.5 * (b + a)
        wts = 0.5 * (b - a) * gw[None, :]
        fy = s ** (-space.dim) * np.asarray(f(y / s), dtype=float)
        ty = translate_values(space, g, t, xi, y)
        out[i] = float(np.sum(fy * ty * y ** (2 * space.lam) * wts))
    return out
