import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besselharm import (GridFunction, LambdaSpace, LogGrid, ResolutionError, apply_bessel_operator,
                        bochner_riesz_means, convolve, hankel_at, hankel_transform, lp_norm, make_kernel,
                        spectral_multiplier)
from besselharm.kernels import bochner_riesz_multiplier, heat_transform, poisson_transform
from besselharm.profiles import gamma_ratio_constant
from besselharm.special import log_gamma, reduced_bessel
from besselharm.translation import unit_translate

XS = np.linspace(0.0, 10.0, 41)


@pytest.mark.parametrize("lam", [0.6, 1.0, 2.0])
def test_heat_and_poisson_goldens(lam):
    sp = LambdaSpace(lam)
    c = 2 ** (0.5 - lam) / math.exp(log_gamma(lam + 0.5))
    assert heat_transform(sp, XS) == pytest.approx(c * np.exp(-XS ** 2 / 2), rel=1e-14)
    assert poisson_transform(sp, XS) == pytest.approx(c * np.exp(-XS), rel=1e-14)
    assert np.max(np.abs(hankel_at(sp, make_kernel(sp, "heat"), XS) - c * np.exp(-XS ** 2 / 2))) < 1e-7
    assert np.max(np.abs(hankel_at(sp, make_kernel(sp, "poisson"), XS) - c * np.exp(-XS))) < 1e-7


@pytest.mark.parametrize("lam,alpha", [(1.0, 4.0), (0.6, 2.0), (2.0, 1.5)])
def test_bochner_riesz_golden(lam, alpha):
    sp = LambdaSpace(lam)
    xs = XS[np.abs(XS - 1) > 0.05]
    got = hankel_at(sp, make_kernel(sp, f"bochner-riesz:{alpha}"), xs)
    assert np.max(np.abs(got - bochner_riesz_multiplier(alpha, xs))) < 1e-5


@pytest.mark.parametrize("lam", [0.6, 1.0, 2.0])
def test_plancherel_on_grid(lam):
    sp = LambdaSpace(lam)
    g = LogGrid(1e-4, 30, 128)
    f = GridFunction.sample(g, lambda x: np.exp(-x * x / 2) * (1 + x * x))
    hf = hankel_transform(sp, f, g)
    assert lp_norm(sp, hf, 2) == pytest.approx(lp_norm(sp, f, 2), rel=1e-6)


def test_transform_is_an_involution():
    sp = LambdaSpace(1.0)
    g = LogGrid(1e-3, 30, 96)
    f = GridFunction.sample(g, lambda x: x * x * np.exp(-x * x))
    back = hankel_transform(sp, hankel_transform(sp, f, g, strict=False), g, strict=False)
    assert np.max(np.abs(back.values - f.values)) < 1e-6


def test_unresolved_output_raises():
    sp = LambdaSpace(1.0)
    g = LogGrid(1e-2, 10, 16)
    f = GridFunction.sample(g, lambda x: np.exp(-x * x / 2))
    with pytest.raises(ResolutionError):
        hankel_transform(sp, f, LogGrid(1.0, 1e3, 16))


class TestSpectralMultiplier:
    sp = LambdaSpace(1.0)

    def test_identity(self):
        g = LogGrid(1e-3, 20, 64)
        f = GridFunction.sample(g, lambda x: np.exp(-x * x / 2))
        out = spectral_multiplier(self.sp, lambda s: np.ones_like(s), f)
        err = lp_norm(self.sp, out.with_values(out.values - f.values), 2)
        assert err <= 1e-6 * lp_norm(self.sp, f, 2)

    def test_matches_bochner_riesz_means(self):
        g = LogGrid(1e-3, 40, 128)
        f = GridFunction.sample(g, lambda x: np.exp(-x * x / 2))
        a, t = 2.0, 1.5
        m = spectral_multiplier(self.sp, lambda s: np.clip(1 - s / t ** 2, 0, None) ** a, f)
        assert np.max(np.abs(m.values - bochner_riesz_means(self.sp, f, a, t).values)) < 1e-6

    def test_heat_multiplier_matches_heat_convolution(self):
        g = LogGrid(1e-3, 20, 64)
        f = GridFunction.sample(g, lambda x: np.exp(-x * x / 2))
        m = spectral_multiplier(self.sp, lambda s: np.exp(-s), f)
        direct = convolve(self.sp, f, make_kernel(self.sp, "heat"), math.sqrt(2))
        assert np.max(np.abs(m.values - direct.values)) < 1e-6


class TestBesselOperator:
    sp = LambdaSpace(1.0)
    g = LogGrid(1e-2, 30, 128)

    def test_eigenfunction(self):
        e = GridFunction.sample(self.g, lambda x: reduced_bessel(self.sp.nu, x))
        d, mask = apply_bessel_operator(self.sp, e, return_mask=True)
        inner = mask & (self.g.nodes > 0.1) & (self.g.nodes < 20)
        rel = np.abs(d.values - e.values)[inner] / np.max(np.abs(e.values))
        assert rel.max() < 1e-4

    def test_constant_is_annihilated(self):
        c = GridFunction(self.g, np.ones(self.g.n))
        assert np.max(np.abs(apply_bessel_operator(self.sp, c).values)) < 1e-6

    def test_gaussian(self):
        x = self.g.nodes
        G = GridFunction(self.g, np.exp(-x * x / 2))
        d, mask = apply_bessel_operator(self.sp, G, return_mask=True)
        exact = (2 * self.sp.lam + 1 - x * x) * np.exp(-x * x / 2)
        assert np.max(np.abs(d.values - exact)[mask]) < 1e-5

    def test_eigen_relation_under_transform(self):
        g = LogGrid(1e-3, 30, 96)
        x = g.nodes
        G = GridFunction(g, np.exp(-x * x / 2))
        d, mask = apply_bessel_operator(self.sp, G, return_mask=True)
        lhs = hankel_transform(self.sp, d, g, strict=False).values
        rhs = x ** 2 * hankel_transform(self.sp, G, g, strict=False).values
        sel = x < 8
        assert np.max(np.abs(lhs - rhs)[sel]) < 1e-5


@settings(max_examples=8)
@given(st.sampled_from([0.6, 1.0, 2.0]), st.floats(0.2, 4.0))
def test_translation_multiplies_transform(lam, x0):
    # h(tau_x phi)(y) = K j(x y) h(phi)(y) with j the reduced Bessel function
    sp = LambdaSpace(lam)
    K = gamma_ratio_constant(sp)
    W = make_kernel(sp, "heat")
    ys = np.array([0.0, 0.5, 1.0, 3.0])
    lhs = hankel_at(sp, lambda z: unit_translate(sp, W, x0, z), ys)
    rhs = K * reduced_bessel(sp.nu, x0 * ys) * heat_transform(sp, ys)
    assert np.max(np.abs(lhs - rhs)) < 1e-7
