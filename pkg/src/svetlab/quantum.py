"""GHZ-state behaviors under the chained measurement bases.

Party k measures in a Fourier-type basis whose eigenvectors carry the phase
``exp(i * sign_k * 2 pi q (r - phi_k(s)) / d)`` on ``|q>``.  Signs alternate
``+, -, +, ...`` and the setting phase is ``(2s - shift_k) / (2M)`` with
shift 1 for the first party, 0 for the second and 2 for every later one.

All phases are kept as exact rationals (integer numerators over ``2 d M``)
and only reduced to floats inside a single trigonometric call.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import BehaviorTable, Scenario
from .functional import build_functional, evaluate


@dataclass(frozen=True)
class PartyBasisConvention:
    role: str
    phase_sign: int
    shift: int

    def phase_offset(self, setting: int, m: int) -> Fraction:
        return Fraction(2 * setting - self.shift, 2 * m)


def conventions_for(n: int) -> tuple[PartyBasisConvention, ...]:
    out = []
    for k in range(n):
        sign = 1 if k % 2 == 0 else -1
        if k == 0:
            role, shift = "first", 1
        elif k == n - 1:
            role, shift = "last", 0 if k == 1 else 2
        elif k == 1:
            role, shift = "middle-negative", 0
        else:
            role, shift = "middle-positive" if sign > 0 else "middle-negative", 2
        out.append(PartyBasisConvention(role, sign, shift))
    return tuple(out)


@dataclass(frozen=True)
class QuantumModel:
    scenario: Scenario
    conventions: tuple[PartyBasisConvention, ...]

    @classmethod
    def ghz(cls, scenario: Scenario) -> "QuantumModel":
        qm = cls(scenario, conventions_for(scenario.n))
        _validate_conventions(scenario.n, scenario.m)
        return qm

    def _check(self, settings, outcomes):
        return self.scenario.validate_settings(settings), self.scenario.validate_outcomes(outcomes)

    def phase_sum(self, settings: Sequence[int], outcomes: Sequence[int]) -> Fraction:
        """``sum_k sign_k (r_k - phi_k(s_k))`` as an exact rational."""
        m = self.scenario.m
        return sum((c.phase_sign * (r - c.phase_offset(s, m))
                    for c, s, r in zip(self.conventions, settings, outcomes)), Fraction(0))


@lru_cache(maxsize=None)
def _validate_conventions(n: int, m: int) -> None:
    """Every chained term must see the same total setting phase, -1/(2M) for J and +1/(2M) for H.

    This is what makes the distribution of each term argument independent of
    N (and hence the Bell value), and gives the per-term geometric-sum shape.
    """
    convs = conventions_for(n)
    f = build_functional(Scenario(n, m, 2))
    want = {"J": Fraction(-1, 2 * m), "H": Fraction(1, 2 * m)}
    for t in f.terms:
        total = sum((c.phase_sign * c.phase_offset(v.raw_setting, m)
                     for c, v in zip(convs, t.variables)), Fraction(0))
        if total != want[t.kind]:
            raise AssertionError(f"basis phases for N={n}, M={m} break term {t.kind}{t.sigma}: {total}")
        if any(v.sign * (1 if t.kind == "J" else -1) != c.phase_sign for c, v in zip(convs, t.variables)):
            raise AssertionError(f"term {t.kind}{t.sigma} sign pattern does not follow the basis signs")


def _frac_mod1(x: Fraction) -> Fraction:
    return x - math.floor(x)


def joint_probability_direct(qm: QuantumModel, settings, outcomes) -> float:
    """|<r_1| ... <r_N| GHZ>|^2 from the explicit eigenvector coefficients."""
    settings, outcomes = qm._check(settings, outcomes)
    d, m = qm.scenario.d, qm.scenario.m
    amp = 0j
    for q in range(d):
        term = 1 + 0j
        for c, s, r in zip(qm.conventions, settings, outcomes):
            phase = _frac_mod1(Fraction(c.phase_sign * q, d) * (r - c.phase_offset(s, m)))
            coeff = cmath.exp(2j * math.pi * float(phase)) / math.sqrt(d)
            term *= coeff.conjugate()
        amp += term
    amp /= math.sqrt(d)
    return abs(amp) ** 2


def _geometric_ratio(x: Fraction, d: int) -> float:
    """``|sum_{q<d} exp(-2 pi i q x / d)|^2`` via the closed form, resonant case -> d**2."""
    t = _frac_mod1(x / d)
    if t == 0:
        return float(d * d)
    return math.sin(math.pi * float(_frac_mod1(x))) ** 2 / math.sin(math.pi * float(t)) ** 2


def joint_probability(qm: QuantumModel, settings, outcomes) -> float:
    """Joint outcome probability through the geometric-sum closed form."""
    settings, outcomes = qm._check(settings, outcomes)
    d, n = qm.scenario.d, qm.scenario.n
    return _geometric_ratio(qm.phase_sum(settings, outcomes), d) / d ** (n + 1)


def _probability_block(qm: QuantumModel, settings: np.ndarray) -> np.ndarray:
    """Vectorized closed form for many setting tuples; shape ``(K, d**N)``."""
    sc = qm.scenario
    n, m, d = sc.n, sc.m, sc.d
    signs = np.array([c.phase_sign for c in qm.conventions], dtype=np.int64)
    shifts = np.array([c.shift for c in qm.conventions], dtype=np.int64)
    outs = np.indices((d,) * n).reshape(n, -1).T.astype(np.int64)
    # phase_sum * 2M as an integer
    s_part = (signs * (shifts - 2 * settings)).sum(axis=1)
    r_part = (signs * 2 * m * outs).sum(axis=1)
    num = s_part[:, None] + r_part[None, :]
    top = np.mod(num, 2 * m)
    bottom = np.mod(num, 2 * d * m)
    resonant = bottom == 0
    safe = np.where(resonant, 1, bottom)
    ratio = np.sin(np.pi * top / (2 * m)) ** 2 / np.sin(np.pi * safe / (2 * d * m)) ** 2
    ratio = np.where(resonant, float(d * d), ratio)
    return ratio / float(d) ** (n + 1)


def quantum_behavior(qm: QuantumModel, support: str = "full") -> BehaviorTable:
    """GHZ behavior on the full setting grid or only on the inequality bases."""
    sc = qm.scenario
    if support == "full":
        sc.check_full_grid()
        settings = list(sc.setting_tuples())
    elif support == "bases":
        settings = build_functional(sc).bases()
    else:
        raise ValueError(f"unknown support {support!r}; use 'full' or 'bases'")
    arr = np.array(settings, dtype=np.int64).reshape(len(settings), sc.n)
    probs = _probability_block(qm, arr)
    return BehaviorTable(sc, probs, None if support == "full" else settings)


def term_distribution(d: int, m: int) -> np.ndarray:
    """Distribution of a single term argument on the GHZ behavior (any N)."""
    n = np.arange(d)
    p = math.sin(math.pi / (2 * m)) ** 2 / (d * d * np.sin(np.pi * (2 * m * n + 1) / (2 * d * m)) ** 2)
    return p


def bell_value_closed_form(d: int, m: int) -> float:
    p = term_distribution(d, m)
    return 2 * m * math.fsum(i * p[i] for i in range(1, d))


def bell_value(scenario: Scenario) -> float:
    qm = QuantumModel.ghz(scenario)
    return evaluate(build_functional(scenario), quantum_behavior(qm, "bases"))


def approximation_constant(d: int) -> float:
    """Constant c in the printed large-M approximation ``c / M``."""
    return math.pi ** 2 / (4 * d * d) * math.fsum(i / math.sin(math.pi * i / d) ** 2 for i in range(1, d))


def asymptotic_constant(d: int) -> float:
    """Limit of ``M * I(M)`` obtained from the closed form."""
    return math.pi ** 2 / (2 * d * d) * math.fsum(i / math.sin(math.pi * i / d) ** 2 for i in range(1, d))


@dataclass(frozen=True)
class ConvergenceRow:
    m: int
    exact: float
    approximation: float

    @property
    def ratio(self) -> float:
        return self.exact / self.approximation

    def to_dict(self) -> dict:
        return {"M": self.m, "exact": self.exact, "approximation": self.approximation, "ratio": self.ratio}


def bell_value_vs_m(n: int, d: int, m_list: Sequence[int]) -> list[ConvergenceRow]:
    c = approximation_constant(d)
    return [ConvergenceRow(m, bell_value(Scenario(n, m, d)), c / m) for m in m_list]


def loglog_slope(rows: Sequence[ConvergenceRow]) -> float:
    x = np.log([r.m for r in rows])
    y = np.log([r.exact for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def fitted_constant(rows: Sequence[ConvergenceRow]) -> float:
    """Least-squares c in ``I ~ c / M``."""
    inv = np.array([1.0 / r.m for r in rows])
    vals = np.array([r.exact for r in rows])
    return float(inv @ vals / (inv @ inv))


def check_eq9_equality(d: int, m: int, n_list: Sequence[int]) -> float:
    """Largest gap between the bipartite GHZ Bell value and the N-party ones."""
    base = bell_value(Scenario(2, m, d))
    return max(abs(base - bell_value(Scenario(n, m, d))) for n in n_list)
