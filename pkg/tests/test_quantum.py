import math

import numpy as np
import pytest

from svetlab.core import Scenario, check_nonsignaling
from svetlab.quantum import (QuantumModel, approximation_constant, asymptotic_constant, bell_value,
                             bell_value_closed_form, bell_value_vs_m, check_eq9_equality, conventions_for,
                             joint_probability, joint_probability_direct, loglog_slope, quantum_behavior,
                             term_distribution)


@pytest.mark.parametrize("n,m,d", [(2, 2, 2), (2, 8, 3), (3, 4, 2), (4, 2, 2)])
def test_closed_form_matches_state_vector(n, m, d, rng):
    qm = QuantumModel.ghz(Scenario(n, m, d))
    for _ in range(200):
        s = tuple(int(x) for x in rng.integers(1, m + 1, n))
        r = tuple(int(x) for x in rng.integers(0, d, n))
        assert abs(joint_probability(qm, s, r) - joint_probability_direct(qm, s, r)) < 1e-12


@pytest.mark.parametrize("n,m,d", [(2, 3, 3), (3, 2, 2), (3, 3, 3), (4, 2, 2)])
def test_behavior_normalized_and_nonsignaling(n, m, d):
    b = quantum_behavior(QuantumModel.ghz(Scenario(n, m, d)))
    assert b.normalization_error()[0] < 1e-12
    assert check_nonsignaling(b).max_violation < 1e-12


def test_vectorized_block_matches_scalar():
    sc = Scenario(3, 3, 3)
    qm = QuantumModel.ghz(sc)
    b = quantum_behavior(qm)
    for s in [(1, 2, 3), (3, 3, 1)]:
        for r in [(0, 0, 0), (2, 1, 0)]:
            assert b.prob(s, r) == pytest.approx(joint_probability(qm, s, r), abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_conventions_validated(n):
    convs = conventions_for(n)
    assert [c.phase_sign for c in convs] == [(-1) ** k for k in range(n)]
    QuantumModel.ghz(Scenario(n, 3, 2))


@pytest.mark.parametrize("d,m", [(2, 2), (2, 8), (3, 3), (4, 5)])
def test_term_distribution(d, m):
    p = term_distribution(d, m)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n,m,d", [(2, 2, 2), (2, 3, 3), (3, 4, 2), (3, 2, 3)])
def test_bell_value_matches_closed_form(n, m, d):
    assert bell_value(Scenario(n, m, d)) == pytest.approx(bell_value_closed_form(d, m), abs=1e-12)


def test_two_two_two_value():
    assert bell_value(Scenario(2, 2, 2)) == pytest.approx(2 - math.sqrt(2), abs=1e-12)


def test_approximation_examples():
    assert approximation_constant(2) / 16 == pytest.approx(math.pi ** 2 / 256)
    assert approximation_constant(2) / 16 == pytest.approx(0.03855, abs=1e-5)
    assert approximation_constant(3) == pytest.approx(math.pi ** 2 / 9)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_large_m_ratio_tends_to_two(d):
    m = 4096
    assert m * bell_value_closed_form(d, m) == pytest.approx(asymptotic_constant(d), rel=1e-3)
    assert asymptotic_constant(d) / approximation_constant(d) == pytest.approx(2.0)


@pytest.mark.parametrize("d,m,ns", [(2, 2, [2, 3, 4]), (3, 3, [2, 3]), (2, 8, [2, 3])])
def test_eq9_examples(d, m, ns):
    assert check_eq9_equality(d, m, ns) < 1e-9


def test_decreasing_and_slope():
    rows = bell_value_vs_m(2, 2, [8, 16, 32, 64])
    vals = [r.exact for r in rows]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert -1.05 <= loglog_slope(rows) <= -0.95


def test_invalid_support():
    with pytest.raises(ValueError):
        quantum_behavior(QuantumModel.ghz(Scenario(2, 2, 2)), "sparse")


def test_bases_support_matches_full():
    sc = Scenario(3, 3, 2)
    qm = QuantumModel.ghz(sc)
    full, bases = quantum_behavior(qm, "full"), quantum_behavior(qm, "bases")
    for s in bases.settings:
        assert np.allclose(full.row(s), bases.row(s), atol=0)
