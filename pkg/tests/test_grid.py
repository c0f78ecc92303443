import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from besselharm import GridFunction, Interval, LambdaSpace, LogGrid, ball, lp_norm, measure, read_csv, write_csv
from besselharm.grid import measure_between


def test_measure_examples():
    assert measure(LambdaSpace(1.0), Interval(0, 1)) == pytest.approx(1 / 3, rel=1e-15)
    r = 2.7
    assert measure(LambdaSpace(0.5), Interval(0, r)) == pytest.approx(r * r / 2, rel=1e-15)
    assert measure(LambdaSpace(2.0), Interval(1, 2)) == pytest.approx(31 / 5, rel=1e-15)


def test_ball_examples():
    assert ball(1, 0.5) == Interval(0.5, 1.5)
    assert ball(1, 2) == Interval(0.0, 3.0)
    assert ball(3, 0) is None
    assert measure(LambdaSpace(1.0), ball(3, 0)) == 0.0


def test_lambda_must_be_positive():
    with pytest.raises(ValueError):
        LambdaSpace(0.0)


def test_lp_norm_examples():
    sp = LambdaSpace(1.0)
    g = LogGrid(1e-4, 1.0, 256)
    one = GridFunction(g, np.ones(g.n))
    assert lp_norm(sp, one, 1) == pytest.approx(1 / 3, rel=1e-4)
    zero = GridFunction(g, np.zeros(g.n))
    for p in (1, 2, 3.5, math.inf):
        assert lp_norm(sp, zero, p) == 0.0
    g2 = LogGrid(1.0, 2.0, 4096)
    f = GridFunction.sample(g2, lambda x: x ** -2.0)
    assert lp_norm(sp, f, 2) == pytest.approx(math.sqrt(0.5), rel=1e-6)


@given(st.floats(0.1, 4.0), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_doubling(lam, x, r):
    sp = LambdaSpace(lam)
    ratio = measure(sp, ball(x, 2 * r)) / measure(sp, ball(x, r))
    assert 1.0 <= ratio <= 2.0 ** sp.dim * (1 + 1e-12)


@given(st.floats(0.1, 4.0), st.floats(0, 10), st.floats(0.01, 10), st.floats(0.01, 10))
def test_additivity_and_monotonicity(lam, a, d1, d2):
    sp = LambdaSpace(lam)
    b, c = a + d1, a + d1 + d2
    whole = measure(sp, Interval(a, c))
    assert whole == pytest.approx(measure(sp, Interval(a, b)) + measure(sp, Interval(b, c)), rel=1e-12)
    assert measure(sp, Interval(a, b)) <= whole
    assert measure_between(sp, a, c) == pytest.approx(whole, rel=1e-14)


def test_csv_round_trip_is_bit_exact(tmp_path, rng):
    sp = LambdaSpace(0.6)
    g = LogGrid(1e-3, 50, 40)
    f = GridFunction(g, rng.standard_normal(g.n))
    write_csv(f, tmp_path / "f.csv", sp)
    sp2, f2 = read_csv(tmp_path / "f.csv")
    assert sp2 == sp
    assert np.array_equal(f2.values, f.values)
    assert np.array_equal(f2.x, f.x)


def test_log_linear_interpolation_and_outside_zero():
    g = LogGrid(1.0, 100.0, 16)
    f = GridFunction.sample(g, np.log)
    y = np.array([0.5, 3.3, 50.0, 200.0])
    v = f(y)
    assert v[0] == 0.0 and v[-1] == 0.0
    assert v[1:3] == pytest.approx(np.log(y[1:3]), rel=1e-12)


def test_measure_weights_integrate_power(rng):
    sp = LambdaSpace(1.0)
    g = LogGrid(1.0, 10.0, 128)
    w = g.measure_weights(sp)
    # int_1^10 x^{-1} x^2 dx
    assert np.dot(w, 1 / g.nodes) == pytest.approx(99 / 2, rel=3e-4)
