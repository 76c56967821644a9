from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from svetlab.simplex import LpCapError, LpProblem, solve


def test_small_lp():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    p = LpProblem([1, 1], a_ub=[[1, 2], [3, 1]], b_ub=[4, 6], sense="max")
    sol = solve(p)
    assert sol.optimal and sol.objective == pytest.approx(2.8)
    ex = solve(p, exact=True)
    assert ex.objective == Fraction(14, 5)


def test_infeasible_and_unbounded():
    p = LpProblem([1], a_eq=[[1]], b_eq=[-1])
    assert solve(p).status == "infeasible"
    p = LpProblem([-1, 0], a_eq=[[1, -1]], b_eq=[0])
    assert solve(p).status == "unbounded"


def test_redundant_rows_dropped():
    p = LpProblem([1, 2], a_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    sol = solve(p)
    assert sol.optimal and sol.objective == pytest.approx(1.0)
    assert sol.residuals["redundant_rows"] == 1


def test_degenerate_cycling_example():
    # Beale's classic cycling example; Bland's rule must terminate
    c = [-0.75, 150, -0.02, 6]
    a = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    sol = solve(LpProblem(c, a_ub=a, b_ub=[0, 0, 1]))
    assert sol.objective == pytest.approx(-0.05)


def test_certificate_residuals():
    p = LpProblem([1, 1], a_ub=[[1, 2], [3, 1]], b_ub=[4, 6], sense="max")
    res = solve(p).residuals
    assert res["feasibility"] < 1e-12
    assert res["duality_gap"] < 1e-9
    assert res["dual_infeasibility"] < 1e-9


def test_cap():
    with pytest.raises(LpCapError):
        solve(LpProblem(np.zeros(50)), cap=10)
    with pytest.raises(LpCapError):
        solve(LpProblem(np.zeros(3000)), exact=True)


def test_rejects_bad_data():
    with pytest.raises(ValueError):
        LpProblem([1, np.nan])
    with pytest.raises(ValueError):
        LpProblem([1, 1], sense="maximize")


def test_dump_format():
    text = LpProblem([1, 0], a_eq=[[1, 1]], b_eq=[1], labels=["x", "y"]).dump()
    assert text.splitlines() == ["# lp min vars=2 eq=1 ub=0", "labels x y", "obj 1.0 0.0", "eq 1.0 1.0 | 1.0"]


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(1, 4))
def test_agrees_with_scipy(seed, n, m):
    rng = np.random.default_rng(seed)
    c = rng.integers(-5, 6, n).astype(float)
    a_ub = rng.integers(-3, 6, (m, n)).astype(float)
    b_ub = rng.integers(0, 10, m).astype(float)
    a_eq = np.ones((1, n))
    b_eq = np.array([float(rng.integers(1, 5))])
    ours = solve(LpProblem(c, a_eq, b_eq, a_ub, b_ub))
    ref = linprog(c, a_ub, b_ub, a_eq, b_eq, bounds=(0, None), method="highs")
    if ref.status == 2:
        assert ours.status == "infeasible"
    else:
        assert ours.optimal and ours.objective == pytest.approx(ref.fun, abs=1e-8)
        exact = solve(LpProblem(c, a_eq, b_eq, a_ub, b_ub), exact=True)
        assert float(exact.objective) == pytest.approx(ref.fun, abs=1e-12)
