"""The regularized multipartite chained Svetlichny functional.

Each chained term is indexed by a tuple ``sigma = (s_1, ..., s_{N-1})`` in
``{1..M}^(N-1)`` and a kind, J or H.  Party 1 reads setting ``s_1`` (J) or
``s_1 + 1`` (H), party k in the middle reads ``s_{k-1} + s_k - 1`` and the
last party reads ``s_{N-1}``.  A raw setting above M wraps back into
``1..M`` while adding ``(raw - 1) // M`` to that party's outcome.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import BehaviorTable, Scenario, permute_parties


@dataclass(frozen=True)
class TermVariable:
    party: int
    raw_setting: int
    sign: int
    n_settings: int

    @property
    def effective_setting(self) -> int:
        return (self.raw_setting - 1) % self.n_settings + 1

    @property
    def outcome_offset(self) -> int:
        return (self.raw_setting - 1) // self.n_settings


@dataclass(frozen=True)
class ChainedTerm:
    kind: str
    sigma: tuple[int, ...]
    variables: tuple[TermVariable, ...]

    @property
    def settings(self) -> tuple[int, ...]:
        return tuple(v.effective_setting for v in self.variables)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(v.outcome_offset for v in self.variables)

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(v.sign for v in self.variables)

    def argument(self, outcomes: Sequence[int], d: int) -> int:
        """``[sum_k sign_k (r_k + offset_k)]`` reduced into ``0..d-1``."""
        return sum(v.sign * (r + v.outcome_offset) for v, r in zip(self.variables, outcomes)) % d

    def forced_outcome(self, party: int, outcomes: Sequence[int], d: int) -> int:
        """Outcome of ``party`` that makes the argument vanish given everybody else's.

        ``outcomes[party]`` is ignored.
        """
        rest = sum(v.sign * (r + v.outcome_offset)
                   for k, (v, r) in enumerate(zip(self.variables, outcomes)) if k != party)
        v = self.variables[party]
        # sign is +-1, so it is its own inverse
        return (-v.sign * rest - v.outcome_offset) % d

    def weights(self, d: int) -> np.ndarray:
        """Argument of the term on every outcome tuple, shape ``(d,) * N``."""
        return _weight_grid(self.signs, self.offsets, d)


@lru_cache(maxsize=4096)
def _weight_grid(signs: tuple[int, ...], offsets: tuple[int, ...], d: int) -> np.ndarray:
    n = len(signs)
    idx = np.indices((d,) * n)
    total = sum(s * (idx[k] + o) for k, (s, o) in enumerate(zip(signs, offsets)))
    grid = np.mod(total, d)
    grid.flags.writeable = False
    return grid


@dataclass(frozen=True)
class BellFunctional:
    scenario: Scenario
    terms: tuple[ChainedTerm, ...]

    @property
    def regularization(self) -> Fraction:
        return Fraction(1, self.scenario.m ** (self.scenario.n - 2)) if self.scenario.n >= 2 else Fraction(1)

    @property
    def local_bound(self) -> int:
        return self.scenario.d - 1

    def bases(self) -> list[tuple[int, ...]]:
        return [t.settings for t in self.terms]

    def term_for(self, settings: Sequence[int]) -> ChainedTerm:
        try:
            return self._by_setting()[tuple(settings)]
        except KeyError:
            raise KeyError(f"{tuple(settings)} is not an inequality basis") from None

    def is_basis(self, settings: Sequence[int]) -> bool:
        return tuple(settings) in self._by_setting()

    def _by_setting(self) -> dict[tuple[int, ...], ChainedTerm]:
        cache = self.__dict__.get("_by_setting_cache")
        if cache is None:
            cache = {t.settings: t for t in self.terms}
            object.__setattr__(self, "_by_setting_cache", cache)
        return cache


def _signs(n: int, kind: str) -> list[int]:
    j = [(-1) ** k for k in range(n)]  # (-1)^(k+1) with 1-based k
    return j if kind == "J" else [-s for s in j]


def _raw_settings(sigma: Sequence[int], kind: str) -> list[int]:
    n = len(sigma) + 1
    raw = [sigma[0] + (1 if kind == "H" else 0)]
    for k in range(1, n - 1):
        raw.append(sigma[k - 1] + sigma[k] - 1)
    raw.append(sigma[-1])
    return raw


def build_functional(scenario: Scenario) -> BellFunctional:
    n, m = scenario.n, scenario.m
    terms = []
    for sigma in itertools.product(range(1, m + 1), repeat=n - 1):
        for kind in ("J", "H"):
            variables = tuple(
                TermVariable(k, raw, sign, m)
                for k, (raw, sign) in enumerate(zip(_raw_settings(sigma, kind), _signs(n, kind))))
            terms.append(ChainedTerm(kind, tuple(sigma), variables))
    f = BellFunctional(scenario, tuple(terms))
    if n <= 3:
        _check_against_reference(f)
    return f


def _reference_terms(n: int, m: int) -> list[tuple[str, tuple[int, ...], dict[int, tuple[int, int]]]]:
    """Hand transcription of the two- and three-party chained forms.

    Returns, per term, party -> (raw setting, sign).
    """
    out = []
    if n == 2:
        for a in range(1, m + 1):
            out.append(("J", (a,), {0: (a, +1), 1: (a, -1)}))
            out.append(("H", (a,), {1: (a, +1), 0: (a + 1, -1)}))
    elif n == 3:
        for a, b in itertools.product(range(1, m + 1), repeat=2):
            out.append(("J", (a, b), {0: (a, +1), 1: (a + b - 1, -1), 2: (b, +1)}))
            out.append(("H", (a, b), {1: (a + b - 1, +1), 0: (a + 1, -1), 2: (b, -1)}))
    return out


def _check_against_reference(f: BellFunctional) -> None:
    n, m = f.scenario.n, f.scenario.m
    ref = _reference_terms(n, m)
    built = {(t.kind, t.sigma): t for t in f.terms}
    if len(ref) != len(built):
        raise AssertionError("term count disagrees with the reference chained form")
    for kind, sigma, parties in ref:
        term = built[(kind, sigma)]
        for v in term.variables:
            if parties[v.party] != (v.raw_setting, v.sign):
                raise AssertionError(f"term {kind}{sigma} party {v.party} disagrees with reference")


def term_expectation(term: ChainedTerm, b: BehaviorTable):
    """Average of the term argument under ``P(. | term settings)``."""
    row = b.row(term.settings)
    w = term.weights(b.scenario.d)
    if b.exact:
        return sum((int(wi) * p for wi, p in zip(w.flat, row.flat) if wi), Fraction(0))
    return math.fsum((w * row).ravel())


def evaluate(f: BellFunctional, b: BehaviorTable):
    """Regularized Bell value; a ``Fraction`` when ``b`` holds exact probabilities."""
    if b.exact:
        total = sum((term_expectation(t, b) for t in f.terms), Fraction(0))
        return f.regularization * total
    return float(f.regularization) * math.fsum(term_expectation(t, b) for t in f.terms)


def linear_form(f: BellFunctional, settings: Sequence[Sequence[int]], scale: bool = True) -> np.ndarray:
    """Coefficients of the Bell value over the flattened variables of a table.

    Variable ``i * d**N + flat(r)`` is ``P(r | settings[i])``.  Every basis
    must appear in ``settings``.
    """
    d, n = f.scenario.d, f.scenario.n
    index = {tuple(s): i for i, s in enumerate(settings)}
    block = d ** n
    coeffs = np.zeros(len(index) * block)
    for t in f.terms:
        i = index[t.settings]
        coeffs[i * block:(i + 1) * block] += t.weights(d).ravel()
    return coeffs * float(f.regularization) if scale else coeffs


def check_permutation_symmetry(f: BellFunctional, b: BehaviorTable, perm: Sequence[int]) -> float:
    return abs(evaluate(f, b) - evaluate(f, permute_parties(b, perm)))


def proved_symmetries(n: int) -> list[list[int]]:
    """Party exchanges under which the functional is known to be invariant."""
    out = []
    if n >= 3:
        swap = list(range(n))
        swap[n - 1], swap[n - 3] = swap[n - 3], swap[n - 1]
        out.append(swap)
        ac = list(range(n))
        ac[0], ac[2] = ac[2], ac[0]
        if ac not in out:
            out.append(ac)
    return out


def terms_csv(f: BellFunctional) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "sigma", "settings", "offsets", "signs"])
    for t in f.terms:
        writer.writerow([t.kind, ";".join(map(str, t.sigma)), ";".join(map(str, t.settings)),
                         ";".join(map(str, t.offsets)), ";".join(f"{s:+d}" for s in t.signs)])
    return buf.getvalue()
