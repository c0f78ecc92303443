import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besselharm import GridFunction, LambdaSpace, LogGrid, Weight, a1_characteristic, ap_characteristic, bmo_norm
from besselharm import build_dyadic
from besselharm.weights import (Cube, ap_report, duality_gap, power_weight_anchored_ap, power_weight_in_ap)

SP = LambdaSpace(1.0)
G = LogGrid(1e-3, 1e3, 32)


def dense_power_oracle(lam, beta, p, n=100):
    """sup of the A_p product of x^beta over 10^4 intervals (a, b) in closed form."""
    d = 2 * lam + 1
    s = -beta / (p - 1)
    a = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, n - 1)])
    b = np.geomspace(1e-3, 1e3, n)
    A, B = np.meshgrid(a, b, indexing="ij")
    ok = B > A
    A, B = A[ok], B[ok]
    m = (B ** d - A ** d) / d
    iw = (B ** (beta + d) - A ** (beta + d)) / (beta + d)
    isg = (B ** (s + d) - A ** (s + d)) / (s + d)
    return float(np.max(iw / m * (isg / m) ** (p - 1)))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_constant_weight_has_characteristic_one(p):
    assert ap_characteristic(SP, Weight.constant(G), p) == 1.0
    assert a1_characteristic(SP, Weight.constant(G)) == pytest.approx(1.0, abs=1e-14)


def test_power_weight_matches_dense_scan():
    got = ap_characteristic(SP, Weight.power(G, 1.0), 2.0)
    oracle = dense_power_oracle(1.0, 1.0, 2.0)
    assert got == pytest.approx(oracle, rel=1e-3)
    # scale invariance: the sup is the origin-anchored limit
    assert got == pytest.approx(power_weight_anchored_ap(SP, 1.0, 2.0), rel=1e-9)


@pytest.mark.parametrize("beta", [-3.1, 3.0, 4.5])
def test_divergence_flags_outside_the_range(beta):
    rep = ap_report(SP, Weight.power(G, beta), 2.0)
    assert rep.diverges and math.isinf(rep.value)
    assert not power_weight_in_ap(SP, beta, 2.0)


@settings(max_examples=15)
@given(st.floats(-2.8, 2.8), st.sampled_from([1.5, 2.0, 3.0]))
def test_power_weight_properties(beta, p):
    if not power_weight_in_ap(SP, beta, p) or abs(beta) > 0.9 * SP.dim * min(1, p - 1):
        return
    w = Weight.power(G, beta)
    val = ap_characteristic(SP, w, p)
    assert val >= 1.0 - 1e-12
    # dilation: x -> (c x)^beta on the dilated grid gives the same product
    c = 7.0
    g2 = LogGrid(G.x_min * c, G.x_max * c, nodes=G.nodes * c)
    w2 = Weight(GridFunction(g2, (G.nodes * c) ** beta))
    assert ap_characteristic(SP, w2, p) == pytest.approx(val, rel=1e-10)
    assert duality_gap(SP, w, p) < 1e-8


def test_nonconstant_weight_above_one(rng):
    w = Weight(GridFunction(G, np.exp(0.3 * np.sin(np.log(G.nodes)))))
    assert ap_characteristic(SP, w, 2.0) > 1.0


def test_a1_power_weights():
    assert math.isinf(a1_characteristic(SP, Weight.power(G, 0.5)))
    assert a1_characteristic(SP, Weight.power(G, -1.0)) == pytest.approx(3 / 2, rel=1e-6)


class TestBMO:
    def test_constant(self):
        assert bmo_norm(SP, GridFunction(G, np.full(G.n, 2.0))) == pytest.approx(0.0, abs=1e-12)

    def test_log_is_stable_under_refinement(self):
        g1 = LogGrid(1e-3, 1e3, 32)
        g2 = LogGrid(1e-3, 1e3, 64)
        v1 = bmo_norm(SP, GridFunction.sample(g1, np.log))
        v2 = bmo_norm(SP, GridFunction.sample(g2, np.log))
        assert 0 < v1 < 1 and v2 == pytest.approx(v1, rel=0.02)

    def test_linear_grows_with_span(self):
        small = bmo_norm(SP, GridFunction.sample(LogGrid(1e-3, 10, 32), lambda x: x))
        large = bmo_norm(SP, GridFunction.sample(LogGrid(1e-3, 1e3, 32), lambda x: x))
        assert large > 50 * small


class TestDyadic:
    def test_partition_and_children(self):
        sys = build_dyadic(SP, (0.0, 10.0))
        assert sys.delta ** sys.top >= 10.0
        k = sys.top + 3
        L = 0.5 ** k
        x = np.linspace(0, 10, 1001)[:-1]
        cubes = {sys.cube_of(xi, k) for xi in x}
        for q in cubes:
            assert q.left == pytest.approx(q.index * L) and q.right == pytest.approx((q.index + 1) * L)
            kids = q.children()
            assert len(kids) == 2
            assert kids[0].left == q.left and kids[-1].right == pytest.approx(q.right)
            assert kids[0].parent() == q

    def test_axiom_iv_with_half_radius(self):
        q = Cube(3, 5, 0.5)
        L = 0.5 ** 3
        assert q.center == pytest.approx(5.5 * L)
        assert q.left == pytest.approx(q.center - L / 2) and q.right == pytest.approx(q.center + L / 2)

    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            build_dyadic(SP, (0.0, 1.0), delta=0.4)

    def test_cubes_with_nodes_contain_nodes(self):
        g = LogGrid(0.1, 10, 16)
        sys = build_dyadic(SP, (0.0, 10.0 * 1.0000001), xgrid=g)
        for q in sys.cubes_with_nodes(g.nodes)[:200]:
            assert q.node_indices(g.nodes).size > 0
