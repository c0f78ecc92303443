import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besselharm import (GridFunction, LambdaSpace, LogGrid, TimeGrid, check_variation_admissible, check_z_lambda,
                        convolution_field, convolve_profiles, custom_profile, make_kernel, translate)
from besselharm.admissibility import variation_tail_profile
from besselharm.kernels import KernelFamily, heat_constant, t_derivative_profile
from besselharm.translation import translate_values, unit_translate

SP = LambdaSpace(1.0)


def _zeros(x):
    return np.zeros_like(np.asarray(x, dtype=float))


CONSTANT = custom_profile(lambda x: np.ones_like(np.asarray(x, dtype=float)), _zeros, _zeros, "one",
                          decay=0.0, even=True)


def test_kernel_values_at_zero():
    assert make_kernel(SP, "poisson")(0.0) == pytest.approx(4 / math.pi, rel=1e-14)
    assert make_kernel(SP, "heat")(0.0) == pytest.approx(2 ** -0.5 * 2 / math.sqrt(math.pi), rel=1e-14)


def test_kernel_family_parsing():
    assert str(KernelFamily.parse("poisson-deriv:2")) == "poisson-deriv:2"
    with pytest.raises(ValueError):
        KernelFamily.parse("poisson-deriv:1.5")
    with pytest.raises(ValueError):
        KernelFamily.parse("bochner-riesz:-1")
    with pytest.raises(ValueError):
        KernelFamily.parse("laplace")


@pytest.mark.parametrize("lam", [0.6, 1.0])
def test_poisson_derivative_matches_dilation_finite_difference(lam):
    sp = LambdaSpace(lam)
    P = make_kernel(sp, "poisson")
    psi = make_kernel(sp, "poisson-deriv:1")
    x = np.array([0.05, 0.4, 1.0, 2.5, 9.0])
    h = 1e-5

    def Pt(t):
        return t ** (-sp.dim) * P(x / t)

    fd = (Pt(1 + h) - Pt(1 - h)) / (2 * h)
    assert psi(x) == pytest.approx(fd, rel=1e-7, abs=1e-12)
    assert psi(x) == pytest.approx(-sp.dim * P(x) - x * P.dphi(x), rel=1e-12)


def test_t_derivative_profile_sign_and_finite_difference():
    P = make_kernel(SP, "poisson")
    x = np.array([0.1, 1.0, 3.0])
    assert t_derivative_profile(SP, P)(x) == pytest.approx(-make_kernel(SP, "poisson-deriv:1")(x), rel=1e-12)
    W = make_kernel(SP, "heat")
    t, y, z = 0.8, 1.2, np.array([0.5, 1.1, 2.0])
    h = 1e-4 * t
    fd = (translate_values(SP, W, t + h, y, z) - translate_values(SP, W, t - h, y, z)) / (2 * h)
    exact = -translate_values(SP, t_derivative_profile(SP, W), t, y, z) / t
    assert np.max(np.abs(fd - exact)) < 1e-5


def test_scale_invariant_toy_has_only_boundary_terms():
    # phi = x^{-2 lam - 1} on a smooth window: Phi vanishes where the window is flat
    d = SP.dim

    def win(x):
        return np.exp(-(0.01 / x) ** 8) * np.exp(-(x / 100) ** 8)

    def phi(x):
        return x ** -d * win(x)

    def dphi(x, h=1e-6):
        return (phi(x * (1 + h)) - phi(x * (1 - h))) / (2 * h * x)

    prof = custom_profile(phi, dphi, _zeros, "toy", even=False)
    x = np.array([1.0, 2.0, 5.0])
    Phi = t_derivative_profile(SP, prof)(x)
    assert np.max(np.abs(Phi) / phi(x)) < 1e-6


class TestTranslation:
    def test_constant_profile_translates_to_one(self):
        a = np.array([0.3, 1.0, 5.0])
        b = np.array([2.0, 0.7, 4.0])
        assert unit_translate(SP, CONSTANT, a, b) == pytest.approx(1.0, rel=1e-12)

    @settings(max_examples=20)
    @given(st.floats(0.01, 5), st.floats(0.01, 5), st.sampled_from(["poisson", "heat"]))
    def test_commutative_and_positive(self, a, b, fam):
        prof = make_kernel(SP, fam)
        u = unit_translate(SP, prof, a, b)
        assert u == pytest.approx(unit_translate(SP, prof, b, a), rel=1e-12, abs=1e-300)
        assert u >= 0

    def test_translate_on_grid_is_resolution_checked(self):
        g = LogGrid(0.1, 10, 32)
        out = translate(SP, make_kernel(SP, "heat"), 0.5, 1.0, g)
        assert out.values.max() > 0
        assert np.all(out.values >= 0)

    @pytest.mark.parametrize("t1,t2", [(0.5, 1.0), (1.0, 1.0), (0.3, 2.0)])
    def test_semigroups(self, t1, t2):
        xs = np.array([0.05, 0.7, 2.0, 5.0])
        W = make_kernel(SP, "heat")
        P = make_kernel(SP, "poisson")
        lhs = convolve_profiles(SP, W, t1, W, t2, xs)
        t3 = math.hypot(t1, t2)
        assert lhs == pytest.approx(t3 ** -SP.dim * W(xs / t3), rel=1e-6)
        lhs = convolve_profiles(SP, P, t1, P, t2, xs)
        t3 = t1 + t2
        assert lhs == pytest.approx(t3 ** -SP.dim * P(xs / t3), rel=1e-6)

    def test_dilation_covariance(self):
        W = make_kernel(SP, "heat")
        P = make_kernel(SP, "poisson")
        xs = np.array([0.3, 1.5])
        a = 2.5
        lhs = convolve_profiles(SP, W, a * 0.7, P, a * 1.1, a * xs)
        rhs = a ** -SP.dim * convolve_profiles(SP, W, 0.7, P, 1.1, xs)
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_constant_input_gives_constant_field():
    g = LogGrid(1e-2, 1e2, 32)
    f = GridFunction(g, np.ones(g.n))
    F = convolution_field(SP, f, make_kernel(SP, "heat"), TimeGrid.aligned(g, 1e-2, 1.0))
    inner = (g.nodes > 0.1) & (g.nodes < 10)
    assert np.max(np.abs(F.values[inner] - 1.0)) < 1e-3


class TestZLambda:
    def test_poisson_passes(self):
        rep = check_z_lambda(SP, make_kernel(SP, "poisson"))
        assert rep.passed and all(math.isfinite(v) for v in rep.constants.values())

    def test_bochner_riesz_threshold(self):
        assert check_z_lambda(SP, make_kernel(SP, "bochner-riesz:4")).passed
        rep = check_z_lambda(SP, make_kernel(SP, "bochner-riesz:0.5"))
        assert not rep.passed and "i" in rep.violated

    def test_constant_fails_decay(self):
        rep = check_z_lambda(SP, CONSTANT)
        assert "i" in rep.violated


@pytest.mark.slow
class TestVariationAdmissible:
    def test_heat_all_finite(self):
        assert check_variation_admissible(SP, make_kernel(SP, "heat")).passed

    def test_power_profile_all_finite(self):
        q = 2 * SP.lam + 2
        prof = custom_profile(lambda x: (1 + x) ** -q, lambda x: -q * (1 + x) ** (-q - 1),
                              lambda x: q * (q + 1) * (1 + x) ** (-q - 2), "power", decay=q, even=False)
        assert check_variation_admissible(SP, prof).passed

    def test_slow_decay_fails_a(self):
        e = SP.lam / 2
        prof = custom_profile(lambda x: (1 + x * x) ** -e, lambda x: -2 * e * x * (1 + x * x) ** (-e - 1),
                              _zeros, "slow", decay=SP.lam)
        rep = check_variation_admissible(SP, prof, conditions="a")
        assert rep.results["a0"].status == "infinite"


def test_tail_profile_heat_at_zero():
    T = variation_tail_profile(SP, make_kernel(SP, "heat"))
    exact = heat_constant(SP) * math.gamma(SP.lam) * 2 ** SP.lam
    assert T(0.0)[0] == pytest.approx(exact, rel=1e-8)


def test_tail_profile_of_zero():
    T = variation_tail_profile(SP, custom_profile(_zeros, _zeros, _zeros, "zero"))
    assert np.all(T(np.array([0.0, 1.0, 3.0])) == 0.0)
