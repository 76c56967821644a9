import itertools
from fractions import Fraction

import numpy as np
import pytest

from svetlab.classical import (EnumerationCapError, bilocal_count, bipartition_label, bipartitions, certify,
                               gap_report, min_bilocal, min_local)
from svetlab.core import BehaviorTable, Scenario
from svetlab.functional import build_functional, evaluate


def brute_local(f):
    """Oracle: evaluate every deterministic strategy through the behavior machinery."""
    sc = f.scenario
    best = None
    for flat in itertools.product(range(sc.d), repeat=sc.n * sc.m):
        strat = np.array(flat).reshape(sc.n, sc.m)
        v = evaluate(f, BehaviorTable.deterministic(sc, strat))
        best = v if best is None else min(best, v)
    return best


@pytest.mark.parametrize("n,m,d", [(2, 2, 2), (2, 3, 2), (2, 2, 3), (3, 2, 2)])
def test_local_minimum_matches_brute_force(n, m, d):
    f = build_functional(Scenario(n, m, d))
    assert float(min_local(f).minimum) == pytest.approx(brute_local(f), abs=1e-12)


@pytest.mark.parametrize("n,m,d", [(2, 2, 2), (2, 3, 2), (2, 2, 3), (2, 4, 3), (3, 2, 2), (3, 2, 3)])
def test_local_minimum_is_d_minus_one(n, m, d):
    res = certify(n, m, d, "local")
    assert res.minimum == d - 1 and isinstance(res.minimum, Fraction)


def test_local_bound_not_tight_beyond_small_cases():
    # the inequality holds but is not saturated by local models here
    assert certify(3, 3, 2, "local").minimum == Fraction(5, 3)
    assert certify(4, 2, 2, "local").minimum == Fraction(3, 2)


def test_bilocal_three_party():
    res = certify(3, 2, 2, "bilocal")
    assert res.minimum == 1
    assert set(res.per_bipartition) == {"A:BC", "AB:C", "AC:B"}
    assert all(v == 1 for v in res.per_bipartition.values())
    assert 2500 <= res.evaluations <= 3500
    assert certify(3, 2, 3, "bilocal").minimum == 2


def test_bilocal_not_above_local():
    for n, m, d in [(3, 2, 2), (3, 3, 2), (3, 2, 3)]:
        f = build_functional(Scenario(n, m, d))
        assert min_bilocal(f).minimum <= min_local(f).minimum
        assert min_bilocal(f).minimum >= d - 1


def test_witness_attains_minimum():
    sc = Scenario(2, 3, 3)
    f = build_functional(sc)
    res = min_local(f)
    strat = [res.witness["parties"][p] for p in "AB"]
    assert evaluate(f, BehaviorTable.deterministic(sc, strat)) == pytest.approx(float(res.minimum))


def test_bilocal_witness_attains_minimum():
    sc = Scenario(3, 2, 2)
    f = build_functional(sc)
    res = min_bilocal(f)
    groups = res.witness["groups"]
    names = "ABC"

    def outcome(s):
        r = [None] * 3
        for label, table in groups.items():
            idx = [names.index(c) for c in label]
            for row in table:
                if tuple(row["settings"]) == tuple(s[k] for k in idx):
                    for k, o in zip(idx, row["outcomes"]):
                        r[k] = o
        return tuple(r)

    probs = np.zeros((8, 2, 2, 2))
    for i, s in enumerate(sc.setting_tuples()):
        probs[(i,) + outcome(s)] = 1.0
    assert evaluate(f, BehaviorTable(sc, probs)) == pytest.approx(float(res.minimum))


def test_threads_do_not_change_result():
    f = build_functional(Scenario(3, 2, 3))
    a, b = min_bilocal(f, threads=1), min_bilocal(f, threads=4)
    assert a.minimum == b.minimum and a.witness == b.witness


def test_bipartitions():
    assert [bipartition_label(bp) for bp in bipartitions(3)] == ["A:BC", "AB:C", "AC:B"]
    assert len(bipartitions(4)) == 7


def test_caps():
    f = build_functional(Scenario(4, 2, 2))
    with pytest.raises(EnumerationCapError, match="cap"):
        min_bilocal(f)
    assert bilocal_count(f) > 10**8
    with pytest.raises(EnumerationCapError):
        min_local(build_functional(Scenario(2, 4, 4)), cap=1000)


def test_gap_report_ordering():
    from svetlab.quantum import bell_value
    sc = Scenario(3, 2, 2)
    rep = gap_report(build_functional(sc), bell_value(sc), 0.0)
    assert rep.ordered()
    assert rep.to_dict()["nonsignaling_minimum"] == 0.0
