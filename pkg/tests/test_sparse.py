import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from besselharm import GridFunction, LambdaSpace, LogGrid, build_dyadic, extract_sparse, sparse_operator
from besselharm import experiments as ex
from besselharm.operators import hl_operator
from besselharm.sparse import SparseFamily, cube_average
from besselharm.weights import Cube

SP = LambdaSpace(1.0)
G = LogGrid(1e-2, 1e2, 32)
X = G.nodes


def family(cubes):
    return SparseFamily(cubes, {q: q.node_indices(X) for q in cubes}, 1.0, 1)


def test_single_cube_gives_indicator():
    q = Cube(-1, 0, 0.5)  # [0, 2)
    out = sparse_operator(SP, family([q]), GridFunction(G, np.ones(G.n)))
    assert out.values == pytest.approx((X < 2).astype(float), rel=1e-14)


def test_nested_cubes_add():
    big, small = Cube(-2, 0, 0.5), Cube(0, 1, 0.5)  # [0, 4) and [1, 2)
    out = sparse_operator(SP, family([big, small]), GridFunction(G, np.ones(G.n))).values
    assert out[(X >= 1) & (X < 2)] == pytest.approx(2.0, rel=1e-14)
    assert out[(X < 1) | ((X >= 2) & (X < 4))] == pytest.approx(1.0, rel=1e-14)
    assert np.all(out[X >= 4] == 0.0)


def test_cube_average_of_constant():
    assert cube_average(SP, GridFunction(G, np.full(G.n, 3.0)), 0.5, 7.0) == pytest.approx(3.0, rel=1e-14)


@settings(max_examples=20)
@given(arrays(np.float64, G.n, elements=st.floats(-3, 3)), arrays(np.float64, G.n, elements=st.floats(-3, 3)))
def test_sparse_form_is_symmetric(a, b):
    cubes = [Cube(-7, 0, 0.5), Cube(-1, 0, 0.5), Cube(0, 1, 0.5), Cube(2, 3, 0.5), Cube(3, 1, 0.5)]
    S = family(cubes)
    w = G.measure_weights(SP)
    f, g = GridFunction(G, a), GridFunction(G, b)
    lhs = np.dot(w, sparse_operator(SP, S, f).values * b)
    rhs = np.dot(w, a * sparse_operator(SP, S, g).values)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_zero_input_gives_trivial_family():
    fam = extract_sparse(SP, hl_operator(SP), GridFunction(G, np.zeros(G.n)))
    assert len(fam.cubes) == 1
    q0 = fam.cubes[0]
    assert np.array_equal(fam.major_sets[q0], q0.node_indices(X))
    assert fam.stats["C_dom"] == 0.0


def test_indicator_of_root_with_hl_maximal():
    fam = extract_sparse(SP, hl_operator(SP), GridFunction(G, np.ones(G.n)))
    assert fam.eta >= 0.5
    assert math.isfinite(fam.stats["C_dom"])


@pytest.fixture(scope="module")
def two_bump_square():
    gc = ex.GridConfig()
    g = gc.xgrid()
    T = ex.make_handle(SP, g, gc.tgrid(g), "square", None, 3.0)
    f = GridFunction(g, ex.two_bump(g.nodes))
    return g, T, f, extract_sparse(SP, T, f)


def test_two_bump_square_function_passes_gates(two_bump_square):
    g, T, f, fam = two_bump_square
    assert fam.eta >= 0.5
    assert fam.overlap_c >= 1
    C = fam.stats["C_dom"]
    assert math.isfinite(C)
    rows = fam.cubes[0].node_indices(g.nodes)
    Tf = np.abs(T(f, rows))
    S = sparse_operator(SP, fam, f, dilation=3.0, absolute=True).values[rows]
    assert np.all(Tf <= C * S * (1 + 1e-12))
    # the major sets are disjoint pieces of their cubes
    for q in fam.cubes:
        assert np.all(np.isin(fam.major_sets[q], q.node_indices(g.nodes)))


def test_jsonl_dump(tmp_path, two_bump_square):
    g, _, f, fam = two_bump_square
    fam.dump_jsonl(tmp_path / "s.jsonl", SP, f)
    recs = [json.loads(line) for line in (tmp_path / "s.jsonl").read_text().splitlines()]
    assert len(recs) == len(fam.cubes)
    assert {"level", "index", "left", "right", "measure", "avg"} <= set(recs[0])


def test_support_outside_3q0_is_rejected():
    sys = build_dyadic(SP, (0.0, 1e2 * 1.0000001), xgrid=G)
    q0 = Cube(sys.top + 4, 0, 0.5)
    with pytest.raises(ValueError):
        extract_sparse(SP, hl_operator(SP), GridFunction(G, np.ones(G.n)), Q0=q0, dyadic=sys)
