import math

import numpy as np
import pytest

from besselharm import LambdaSpace
from besselharm import experiments as ex

SP = LambdaSpace(1.0)


def test_allowed_exponent():
    assert ex.allowed_exponent(2.0) == 1.0
    assert ex.allowed_exponent(1.5) == 2.0
    assert ex.allowed_exponent(3.0) == 1.0


def test_fit_slope_recovers_power_law():
    x = np.geomspace(1, 1e3, 9)
    assert ex.fit_slope(x, 3 * x ** 1.7) == pytest.approx(1.7, rel=1e-12)
    # only the top decade counts
    y = np.where(x < 100, x ** 3, 1e6 * (x / 100) ** 0.5)
    assert ex.fit_slope(x, y) == pytest.approx(0.5, rel=1e-9)


def test_default_betas_approach_both_ends():
    b = ex.default_betas(SP, 2.0, 5)
    assert b["upper"][0] == 0.0 and b["lower"][0] == 0.0
    assert 0 < SP.dim - b["upper"][-1] < 0.05
    assert 0 < b["lower"][-1] + SP.dim < 0.05


def test_battery_contents():
    g = ex.GridConfig().xgrid()
    fs = ex.battery(SP, g)
    assert {"gauss:0.1", "gauss:1", "gauss:10", "chi:1-2", "two-bump"} <= set(fs)
    assert all(np.all(np.isfinite(f.values)) for f in fs.values())


def test_unknown_test_function():
    with pytest.raises(ValueError):
        ex.test_function(SP, ex.GridConfig().xgrid(), "sawtooth")


def test_resolve_kernel_lam_offset():
    prof = ex.resolve_kernel(SP, "bochner-riesz:lam+3")
    assert prof.label == "bochner-riesz:4"


class TestCorollaryKernels:
    def test_bochner_riesz_thresholds(self):
        cfg = ex.CorollaryConfig(corollary="bochner-riesz", alpha=2.0)
        assert set(ex.corollary_kernels(SP, cfg)) == {"maximal"}
        cfg = ex.CorollaryConfig(corollary="bochner-riesz", alpha=4.0)
        ks = ex.corollary_kernels(SP, cfg)
        assert ks["square"] == "stein-br:4" and "variation" in ks
        with pytest.raises(ValueError, match="lam \\+ 1"):
            ex.corollary_kernels(SP, ex.CorollaryConfig(corollary="bochner-riesz", alpha=1.5))

    def test_no_square_function_for_m_zero(self):
        ks = ex.corollary_kernels(SP, ex.CorollaryConfig(corollary="poisson-derivatives", m=0))
        assert "square" not in ks


def test_stein_multiplier_identity():
    assert ex.stein_identity_error(SP, SP.lam + 4) < 1e-5


def test_scan_t12_constant_symbol_rows_are_exact_zero():
    cfg = ex.ScanT12Config(grid=ex.GridConfig(grid_decades=3, points_per_decade=24), operators=("maximal",),
                           pairs=((0.0, 0.0),), symbol="const")
    rep = ex.cmd_scan_t12(cfg)
    ratio = rep.columns.index("ratio")
    assert all(r[ratio] == 0.0 for r in rep.rows)
