"""Linear programs over the nonsignaling polytope.

Variables are the entries ``P(r | s)`` of a full-grid table, flattened as
``row(s) * D + flat(r)`` with rows in row-major setting order.  Parties may
have different numbers of settings and outcomes, which the eavesdropper
extension of the monogamy probe needs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import BehaviorTable, Scenario, check_nonsignaling, marginalize
from .functional import BellFunctional, build_functional, linear_form
from .simplex import LpProblem, LpSolution, solve


@dataclass(frozen=True)
class Layout:
    settings_per_party: tuple[int, ...]
    outcomes_per_party: tuple[int, ...]

    @classmethod
    def of(cls, scenario: Scenario) -> "Layout":
        return cls((scenario.m,) * scenario.n, (scenario.d,) * scenario.n)

    @property
    def n(self) -> int:
        return len(self.settings_per_party)

    @property
    def n_rows(self) -> int:
        return int(np.prod(self.settings_per_party))

    @property
    def block(self) -> int:
        return int(np.prod(self.outcomes_per_party))

    @property
    def n_vars(self) -> int:
        return self.n_rows * self.block

    def settings(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(1, m + 1) for m in self.settings_per_party)))

    def outcomes(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(d) for d in self.outcomes_per_party)))

    def index(self, settings: Sequence[int], outcomes: Sequence[int]) -> int:
        row = int(np.ravel_multi_index(tuple(s - 1 for s in settings), self.settings_per_party))
        col = int(np.ravel_multi_index(tuple(outcomes), self.outcomes_per_party))
        return row * self.block + col

    def grid_shape(self) -> tuple[int, ...]:
        return self.settings_per_party + self.outcomes_per_party

    def label(self, i: int) -> str:
        row, col = divmod(i, self.block)
        s = np.unravel_index(row, self.settings_per_party)
        r = np.unravel_index(col, self.outcomes_per_party)
        return "P(" + ",".join(map(str, r)) + "|" + ",".join(str(int(x) + 1) for x in s) + ")"


def normalization_rows(layout: Layout) -> tuple[np.ndarray, np.ndarray]:
    a = np.zeros((layout.n_rows, layout.n_vars))
    for i in range(layout.n_rows):
        a[i, i * layout.block:(i + 1) * layout.block] = 1.0
    return a, np.ones(layout.n_rows)


def nonsignaling_rows(layout: Layout) -> tuple[np.ndarray, np.ndarray]:
    """One-party marginal equalities: party k at setting x against setting 1."""
    n = layout.n
    shape = layout.grid_shape()
    var_ids = np.arange(layout.n_vars).reshape(shape)
    rows = []
    for k in range(n):
        mk = layout.settings_per_party[k]
        for x in range(1, mk):
            lhs = np.take(var_ids, x, axis=k)
            rhs = np.take(var_ids, 0, axis=k)
            # after take, party k's outcome axis sits at n - 1 + k
            lhs = np.moveaxis(lhs, n - 1 + k, -1)
            rhs = np.moveaxis(rhs, n - 1 + k, -1)
            lhs = lhs.reshape(-1, layout.outcomes_per_party[k])
            rhs = rhs.reshape(-1, layout.outcomes_per_party[k])
            for li, ri in zip(lhs, rhs):
                row = np.zeros(layout.n_vars)
                row[li] += 1.0
                row[ri] -= 1.0
                rows.append(row)
    if not rows:
        return np.zeros((0, layout.n_vars)), np.zeros(0)
    return np.array(rows), np.zeros(len(rows))


def polytope_constraints(layout: Layout) -> tuple[np.ndarray, np.ndarray]:
    a1, b1 = normalization_rows(layout)
    a2, b2 = nonsignaling_rows(layout)
    return np.vstack([a1, a2]), np.concatenate([b1, b2])


def _behavior_from_x(scenario: Scenario, x) -> BehaviorTable:
    arr = np.asarray(x, dtype=object if x.dtype == object else float)
    if arr.dtype != object:
        arr = np.where(np.abs(arr) < 1e-14, 0.0, arr)
    return BehaviorTable(scenario, arr.reshape((scenario.n_setting_tuples,) + (scenario.d,) * scenario.n),
                         validate=False)


def _attach(sol: LpSolution, scenario: Scenario) -> LpSolution:
    if sol.optimal:
        sol.behavior = _behavior_from_x(scenario, sol.x)
        fb = sol.behavior.as_float()
        sol.residuals["normalization"] = fb.normalization_error()[0]
        sol.residuals["nonsignaling"] = check_nonsignaling(fb).max_violation
    return sol


def bell_problem(scenario: Scenario, f: BellFunctional | None = None) -> LpProblem:
    f = f or build_functional(scenario)
    layout = Layout.of(scenario)
    a, b = polytope_constraints(layout)
    c = linear_form(f, layout.settings())
    return LpProblem(c, a, b, sense="min", labels=[layout.label(i) for i in range(layout.n_vars)])


def min_bell_ns(scenario: Scenario, exact: bool = False) -> LpSolution:
    """Minimum of the functional over the nonsignaling polytope."""
    scenario.check_full_grid()
    return _attach(solve(bell_problem(scenario), exact=exact), scenario)


def ideal_box(scenario: Scenario, full_grid: bool = False, exact: bool = False) -> BehaviorTable:
    """Uniform over the constraint-satisfying outcomes of every inequality basis.

    With ``full_grid=True`` settings outside the inequality are filled with the
    uniform distribution, which keeps the table nonsignaling because every
    marginal of at most N-1 parties is uniform either way.
    """
    f = build_functional(scenario)
    n, d = scenario.n, scenario.d
    weight = Fraction(1, d ** (n - 1)) if exact else 1.0 / d ** (n - 1)
    uniform = Fraction(1, d ** n) if exact else 1.0 / d ** n
    grid = list(scenario.setting_tuples())
    if full_grid or len(f.terms) == len(grid):
        settings = grid
    else:
        settings = f.bases()
    shape = (len(settings),) + (d,) * n
    probs = np.empty(shape, dtype=object if exact else float)
    for i, s in enumerate(settings):
        if f.is_basis(s):
            w = f.term_for(s).weights(d)
            if exact:
                probs[i] = np.where(w == 0, weight, Fraction(0))
            else:
                probs[i] = np.where(w == 0, weight, 0.0)
        else:
            probs[i] = uniform
    return BehaviorTable(scenario, probs, None if settings is grid else settings)


def marginal_objective(layout: Layout, settings: Sequence[int], parties: Sequence[int],
                       outcomes: Sequence[int]) -> np.ndarray:
    c = np.zeros(layout.n_vars)
    for r in layout.outcomes():
        if all(r[k] == o for k, o in zip(parties, outcomes)):
            c[layout.index(settings, r)] = 1.0
    return c


@dataclass
class Theorem1Point:
    eps: float
    value: float | None
    bound: float
    status: str
    solution: LpSolution | None = field(default=None, repr=False)

    @property
    def within_bound(self) -> bool:
        return self.value is not None and self.value <= self.bound + 1e-7

    def to_dict(self) -> dict:
        return {"eps": self.eps, "value": self.value, "bound": self.bound, "status": self.status,
                "within_bound": self.within_bound, "tolerance": 1e-7}


def theorem1_bound(scenario: Scenario, eps: float) -> float:
    n, d = scenario.n, scenario.d
    return 1.0 / d ** (n - 1) + d * (n - 1) * eps / 4.0


def theorem1_probe(scenario: Scenario, parties: Sequence[int], settings: Sequence[int],
                   outcomes: Sequence[int], eps_grid: Sequence[float], exact: bool = False) -> list[Theorem1Point]:
    """Largest marginal probability compatible with a Bell value at most eps."""
    scenario.check_full_grid()
    f = build_functional(scenario)
    settings = scenario.validate_settings(settings)
    if not f.is_basis(settings):
        raise ValueError(f"{settings} is not an inequality basis")
    if len(parties) != scenario.n - 1 or len(outcomes) != len(parties):
        raise ValueError("need a subset of N-1 parties and one outcome per party")
    layout = Layout.of(scenario)
    a, b = polytope_constraints(layout)
    bell = linear_form(f, layout.settings())
    c = marginal_objective(layout, settings, parties, outcomes)
    out = []
    for eps in eps_grid:
        if eps < 0:
            raise ValueError(f"eps must be nonnegative, got {eps}")
        prob = LpProblem(c, a, b, bell[None, :], np.array([eps]), sense="max")
        sol = _attach(solve(prob, exact=exact), scenario)
        value = float(sol.objective) if sol.optimal else None
        out.append(Theorem1Point(float(eps), value, theorem1_bound(scenario, eps), sol.status, sol))
    return out


@dataclass
class MonogamyResult:
    guessing_probability: float | None
    solution: LpSolution

    def to_dict(self) -> dict:
        return {"guessing_probability": self.guessing_probability, **self.solution.to_dict()}


def monogamy_probe(scenario: Scenario, target_party: int = 0, target_settings: Sequence[int] | None = None,
                   fixed: BehaviorTable | None = None, eve_outcomes: int | None = None,
                   exact: bool = False) -> MonogamyResult:
    """Eavesdropper's best guess of one party's outcome over nonsignaling extensions.

    The extension adds a party with a single setting whose N-party marginal
    must reproduce ``fixed`` (the ideal box by default) on every setting the
    box supports.
    """
    n, m, d = scenario.n, scenario.m, scenario.d
    eve_outcomes = d if eve_outcomes is None else eve_outcomes
    fixed = ideal_box(scenario, exact=exact) if fixed is None else fixed
    if target_settings is None:
        target_settings = fixed.settings[0]
    target_settings = scenario.validate_settings(target_settings)
    layout = Layout((m,) * n + (1,), (d,) * n + (eve_outcomes,))
    a, b = polytope_constraints(layout)
    rows, rhs = [], []
    for s in fixed.settings:
        p = fixed.row(s)
        for r in scenario.outcome_tuples():
            row = np.zeros(layout.n_vars)
            for e in range(eve_outcomes):
                row[layout.index(s + (1,), r + (e,))] = 1.0
            rows.append(row)
            rhs.append(float(p[r]))
    a = np.vstack([a, np.array(rows)])
    b = np.concatenate([b, rhs])
    c = np.zeros(layout.n_vars)
    for r in layout.outcomes():
        if r[target_party] == r[-1]:
            c[layout.index(target_settings + (1,), r)] = 1.0
    sol = solve(LpProblem(c, a, b, sense="max"), exact=exact)
    value = float(sol.objective) if sol.optimal else None
    return MonogamyResult(value, sol)


@dataclass
class UniquenessResult:
    basis: tuple[int, ...]
    rank: int
    n_unknowns: int
    n_equations: int
    consistent: bool
    unique: bool
    solution: np.ndarray | None
    matches_ideal_box: bool

    def to_dict(self) -> dict:
        return {"basis": list(self.basis), "rank": self.rank, "unknowns": self.n_unknowns,
                "equations": self.n_equations, "consistent": self.consistent, "unique": self.unique,
                "matches_ideal_box": self.matches_ideal_box}


def uniqueness_check(scenario: Scenario, basis: Sequence[int], include_marginals: bool = True,
                     tol: float = 1e-10) -> UniquenessResult:
    """Is a single-basis distribution pinned by the zero pattern plus uniform (N-1)-marginals?"""
    f = build_functional(scenario)
    basis = scenario.validate_settings(basis)
    if not f.is_basis(basis):
        raise ValueError(f"{basis} is not an inequality basis")
    n, d = scenario.n, scenario.d
    outs = list(scenario.outcome_tuples())
    w = f.term_for(basis).weights(d)
    rows, rhs = [], []
    for i, r in enumerate(outs):
        if w[r] != 0:
            row = np.zeros(len(outs))
            row[i] = 1.0
            rows.append(row)
            rhs.append(0.0)
    if include_marginals:
        for drop in range(n):
            keep = [k for k in range(n) if k != drop]
            for sub in itertools.product(range(d), repeat=n - 1):
                row = np.array([1.0 if all(r[k] == o for k, o in zip(keep, sub)) else 0.0 for r in outs])
                rows.append(row)
                rhs.append(1.0 / d ** (n - 1))
    rows.append(np.ones(len(outs)))
    rhs.append(1.0)
    a, b = np.array(rows), np.array(rhs)
    rank = int(np.linalg.matrix_rank(a, tol=tol))
    aug = int(np.linalg.matrix_rank(np.column_stack([a, b]), tol=tol))
    consistent = rank == aug
    unique = consistent and rank == len(outs)
    solution = None
    matches = False
    if consistent:
        x, *_ = np.linalg.lstsq(a, b, rcond=None)
        solution = x.reshape((d,) * n)
        box = ideal_box(scenario).row(basis)
        matches = unique and bool(np.allclose(solution, box, atol=1e-12, rtol=0))
    return UniquenessResult(basis, rank, len(outs), len(rows), consistent, unique, solution, matches)


def marginal_max(b: BehaviorTable, parties: Sequence[int], settings: Sequence[int]) -> float:
    return float(np.max(marginalize(b, parties, settings).astype(float)))
