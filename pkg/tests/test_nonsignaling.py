from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from svetlab.core import Scenario, check_nonsignaling
from svetlab.functional import build_functional, evaluate
from svetlab.nonsignaling import (Layout, bell_problem, ideal_box, min_bell_ns, monogamy_probe,
                                  polytope_constraints, theorem1_probe, uniqueness_check)


@pytest.mark.parametrize("n,m,d", [(2, 2, 2), (2, 3, 2), (3, 2, 2), (2, 2, 3)])
def test_min_bell_is_zero(n, m, d):
    sol = min_bell_ns(Scenario(n, m, d))
    assert sol.optimal and abs(sol.objective) < 1e-8
    assert sol.residuals["nonsignaling"] < 1e-9
    assert sol.residuals["feasibility"] < 1e-9


def test_min_bell_exact():
    sol = min_bell_ns(Scenario(2, 2, 2), exact=True)
    assert sol.objective == 0 and isinstance(sol.objective, Fraction)


def test_min_bell_matches_scipy():
    sc = Scenario(2, 3, 2)
    p = bell_problem(sc)
    ref = linprog(p.c, A_eq=p.a_eq, b_eq=p.b_eq, bounds=(0, None), method="highs")
    assert ref.fun == pytest.approx(min_bell_ns(sc).objective, abs=1e-9)


def test_polytope_contains_quantum_behavior():
    from svetlab.quantum import QuantumModel, quantum_behavior
    sc = Scenario(3, 2, 2)
    a, b = polytope_constraints(Layout.of(sc))
    x = quantum_behavior(QuantumModel.ghz(sc)).probs.ravel()
    assert np.abs(a @ x - b).max() < 1e-12


def test_signaling_behavior_violates_constraints(s222):
    from svetlab.core import BehaviorTable
    b = BehaviorTable.from_function(s222, lambda s, r: 0.5 * (r[1] == s[0] - 1))
    a, rhs = polytope_constraints(Layout.of(s222))
    assert np.abs(a @ b.probs.ravel() - rhs).max() > 0.4


@pytest.mark.parametrize("n,m,d", [(2, 2, 2), (3, 2, 2), (3, 3, 2), (2, 3, 3)])
def test_ideal_box(n, m, d):
    sc = Scenario(n, m, d)
    f = build_functional(sc)
    box = ideal_box(sc, exact=True)
    assert evaluate(f, box) == 0
    full = ideal_box(sc, full_grid=True)
    assert full.full_grid and check_nonsignaling(full).max_violation < 1e-15
    assert evaluate(f, full) == 0


def test_ideal_box_support_is_bases_when_sparse():
    sc = Scenario(3, 3, 2)
    box = ideal_box(sc)
    assert not box.full_grid and len(box) == 18


@pytest.mark.parametrize("n", [2, 3])
def test_theorem1_probe(n):
    sc = Scenario(n, 2, 2)
    f = build_functional(sc)
    basis = f.bases()[0]
    pts = theorem1_probe(sc, list(range(n - 1)), basis, [0] * (n - 1), [0.0, 0.01, 0.05, 0.1])
    assert pts[0].value == pytest.approx(0.5 ** (n - 1), abs=1e-7)
    assert all(p.within_bound for p in pts)
    values = [p.value for p in pts]
    assert values == sorted(values)


def test_theorem1_probe_rejects_non_basis():
    sc = Scenario(3, 3, 2)
    with pytest.raises(ValueError, match="basis"):
        theorem1_probe(sc, [0, 1], (1, 2, 1), [0, 0], [0.0])


@pytest.mark.parametrize("n", [2, 3])
def test_monogamy(n):
    sc = Scenario(n, 2, 2)
    res = monogamy_probe(sc)
    assert res.guessing_probability == pytest.approx(0.5, abs=1e-7)


def test_monogamy_fails_for_local_box():
    from svetlab.core import BehaviorTable
    sc = Scenario(2, 2, 2)
    det = BehaviorTable.deterministic(sc, [[1, 0], [0, 1]])
    assert monogamy_probe(sc, fixed=det).guessing_probability == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("n,m,d", [(2, 2, 2), (3, 2, 2), (3, 3, 3)])
def test_uniqueness(n, m, d):
    sc = Scenario(n, m, d)
    f = build_functional(sc)
    for basis in f.bases()[:4]:
        res = uniqueness_check(sc, basis)
        assert res.unique and res.matches_ideal_box
        assert not uniqueness_check(sc, basis, include_marginals=False).unique
