"""Numerical checkers for the marginal-randomness theorem and its lemmas."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import BehaviorTable, Scenario, UnsupportedSettingError, marginalize, party_name
from .functional import BellFunctional, build_functional, evaluate

BEHAVIOR_TOL = 1e-9
IDENTITY_TOL = 1e-12


def theorem1_bound(scenario: Scenario, eps: float) -> float:
    return 1.0 / scenario.d ** (scenario.n - 1) + scenario.d * (scenario.n - 1) * eps / 4.0


@dataclass
class BasisMarginal:
    settings: tuple[int, ...]
    max_probability: float
    passed: bool


@dataclass
class MarginalReport:
    subset: tuple[int, ...]
    eps: float
    bound: float
    entries: list[BasisMarginal] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def max_probability(self) -> float:
        return max(e.max_probability for e in self.entries)

    def violations(self) -> list[BasisMarginal]:
        return [e for e in self.entries if not e.passed]

    def to_dict(self) -> dict:
        return {
            "subset": "".join(party_name(k) for k in self.subset),
            "eps": self.eps,
            "bound": self.bound,
            "max_probability": self.max_probability,
            "passed": self.passed,
            "tolerance": BEHAVIOR_TOL,
            "violations": [{"settings": list(v.settings), "max_probability": v.max_probability}
                           for v in self.violations()],
        }


def _require_bases(b: BehaviorTable, f: BellFunctional) -> None:
    for s in f.bases():
        if s not in b:
            raise UnsupportedSettingError(s)


def check_theorem1(b: BehaviorTable, f: BellFunctional | None = None,
                   tol: float = BEHAVIOR_TOL) -> list[MarginalReport]:
    """Largest (N-1)-party marginal probability per basis against the theorem's bound.

    The bound is evaluated at the behavior's own Bell value.
    """
    f = f or build_functional(b.scenario)
    _require_bases(b, f)
    n = b.scenario.n
    eps = float(evaluate(f, b))
    bound = theorem1_bound(b.scenario, eps)
    reports = []
    for drop in reversed(range(n)):
        subset = tuple(k for k in range(n) if k != drop)
        rep = MarginalReport(subset, eps, bound)
        for s in f.bases():
            top = float(np.max(marginalize(b, subset, s).astype(float)))
            rep.entries.append(BasisMarginal(s, top, top <= bound + tol))
        reports.append(rep)
    return reports


def check_eq13(dist: Sequence[float], tol: float = IDENTITY_TOL) -> tuple[float, float, bool]:
    """``sum_i i P(i) >= 1 - P(0)`` for a distribution over ``0..d-1``."""
    p = np.asarray(dist, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("need a one-dimensional distribution over at least two values")
    if (p < -tol).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"distribution is not normalized (sum {p.sum():.12g})")
    mean = float(np.arange(p.size) @ p)
    rhs = float(1.0 - p[0])
    return mean, rhs, mean >= rhs - tol


@dataclass(frozen=True)
class AppendixCResult:
    lhs: float
    rhs: float
    forced_outcome: int
    passed: bool

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "forced_outcome": self.forced_outcome,
                "passed": self.passed, "tolerance": IDENTITY_TOL}


def check_appendixC(b: BehaviorTable, settings: Sequence[int], anchor: Sequence[int],
                    f: BellFunctional | None = None, tol: float = IDENTITY_TOL) -> AppendixCResult:
    """Probability of satisfying a basis constraint against a marginal mismatch.

    ``anchor`` gives outcomes for parties 0..N-2.  The last party's outcome is
    the one the basis constraint forces from the anchor; the check is

        P(constraint) <= 1 - |P(r_0..r_{N-2} = anchor) - P(r_1..r_{N-2} = anchor[1:], r_{N-1} = z)|.
    """
    sc = b.scenario
    f = f or build_functional(sc)
    settings = sc.validate_settings(settings)
    term = f.term_for(settings)
    n, d = sc.n, sc.d
    anchor = tuple(int(a) for a in anchor)
    if len(anchor) != n - 1 or not all(0 <= a < d for a in anchor):
        raise ValueError(f"anchor must hold {n - 1} outcomes in 0..{d - 1}")
    z = term.forced_outcome(n - 1, anchor + (0,), d)
    row = b.row(settings).astype(float)
    lhs = float(row[term.weights(d) == 0].sum())
    first = float(marginalize(b, range(n - 1), settings).astype(float)[anchor])
    second = float(marginalize(b, range(1, n), settings).astype(float)[anchor[1:] + (z,)])
    rhs = 1.0 - abs(first - second)
    return AppendixCResult(lhs, rhs, z, lhs <= rhs + tol)


def grid_distance_sums(d: int) -> tuple[int, Fraction]:
    """Sum of distances ``|i|`` over the centred residue window and its closed form."""
    if d < 2:
        raise ValueError("d must be at least 2")
    if d % 2:
        lo, hi = -(d - 1) // 2, (d - 1) // 2
        expected = Fraction(d * d - 1, 4)
    else:
        lo, hi = -d // 2 + 1, d // 2
        expected = Fraction(d * d, 4)
    assert hi - lo + 1 == d
    return sum(abs(i) for i in range(lo, hi + 1)), expected


def check_eq10(b: BehaviorTable, f: BellFunctional | None = None):
    """Largest probability placed on constraint-violating outcomes over all bases."""
    f = f or build_functional(b.scenario)
    _require_bases(b, f)
    d = b.scenario.d
    worst = Fraction(0) if b.exact else 0.0
    for t in f.terms:
        row = b.row(t.settings)
        mask = t.weights(d) != 0
        mass = sum(row[mask].tolist(), Fraction(0)) if b.exact else float(row[mask].sum())
        worst = max(worst, mass)
    return worst


def random_deterministic(scenario: Scenario, rng: np.random.Generator) -> BehaviorTable:
    strategy = rng.integers(0, scenario.d, size=(scenario.n, scenario.m))
    return BehaviorTable.deterministic(scenario, strategy)


def random_polytope_behavior(scenario: Scenario, rng: np.random.Generator, n_points: int = 4,
                             box_weight: float | None = None) -> BehaviorTable:
    """Convex mixture of local deterministic points and the ideal box (full grid)."""
    from .nonsignaling import ideal_box

    scenario.check_full_grid()
    w = rng.dirichlet(np.ones(n_points + 1))
    if box_weight is not None:
        w[:-1] *= (1 - box_weight) / w[:-1].sum()
        w[-1] = box_weight
    probs = w[-1] * ideal_box(scenario, full_grid=True).probs
    for wi in w[:-1]:
        probs = probs + wi * random_deterministic(scenario, rng).probs
    return BehaviorTable(scenario, probs)


def random_behavior(scenario: Scenario, rng: np.random.Generator) -> BehaviorTable:
    """Arbitrary (generally signaling) behavior with Dirichlet rows."""
    scenario.check_full_grid()
    rows = rng.dirichlet(np.ones(scenario.n_outcome_tuples), size=scenario.n_setting_tuples)
    return BehaviorTable(scenario, rows)


@dataclass
class VerifyReport:
    checks: dict
    passed: bool

    def to_dict(self) -> dict:
        return {"checks": self.checks, "passed": self.passed}


def verify_behavior(b: BehaviorTable, tol_norm: float, tol_ns: float) -> VerifyReport:
    """Run the full checker battery on a behavior; failing checks are named in the report."""
    from .core import check_nonsignaling

    f = build_functional(b.scenario)
    checks: dict = {}
    dev, where = b.normalization_error()
    checks["normalization"] = {"max_deviation": dev, "settings": list(where) if where else None,
                               "tolerance": tol_norm, "passed": dev <= tol_norm}
    missing = [list(s) for s in f.bases() if s not in b]
    checks["bases_supported"] = {"missing": missing[:10], "n_missing": len(missing), "passed": not missing}
    if b.full_grid:
        ns = check_nonsignaling(b)
        checks["nonsignaling"] = {**ns.to_dict(), "tolerance": tol_ns, "passed": ns.ok(tol_ns)}
    if not missing:
        value = evaluate(f, b)
        checks["bell_value"] = {"value": float(value), "local_bound": f.local_bound,
                                "violates_local_bound": float(value) < f.local_bound}
        reps = check_theorem1(b, f)
        checks["marginal_bound"] = {"subsets": [r.to_dict() for r in reps], "passed": all(r.passed for r in reps)}
        mass = float(check_eq10(b, f))
        consistent = (mass <= IDENTITY_TOL) == (float(value) <= IDENTITY_TOL)
        checks["zero_pattern"] = {"max_violating_mass": mass, "consistent_with_bell_value": consistent,
                                  "tolerance": IDENTITY_TOL, "passed": consistent}
        results = [check_appendixC(b, s, a, f)
                   for s in f.bases()
                   for a in itertools.product(range(b.scenario.d), repeat=b.scenario.n - 1)]
        checks["overlap_bound"] = {"checked": len(results), "failures": sum(not r.passed for r in results),
                                "tolerance": IDENTITY_TOL, "passed": all(r.passed for r in results)}
    passed = all(c.get("passed", True) for c in checks.values())
    return VerifyReport(checks, passed)
