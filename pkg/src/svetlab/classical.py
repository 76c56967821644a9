"""Exhaustive minimization over local and bilocal deterministic models.

A group of parties plays a deterministic strategy: a table from the group's
joint settings to the group's joint outcomes.  Strategies of a group are
numbered as mixed-radix integers whose digits are the joint outcome indices,
most significant digit first (joint setting ``(1, ..., 1)`` first), so that
numeric order is lexicographic order on tables.
"""

from __future__ import annotations

import itertools
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import party_name
from .functional import BellFunctional, build_functional

ENUM_CAP = int(float(os.environ.get("SVETLAB_ENUM_CAP", 10**8)))
_CHUNK_ELEMS = 1 << 22


class EnumerationCapError(ValueError):
    pass


@dataclass
class _Group:
    parties: tuple[int, ...]
    table: np.ndarray  # (n_strategies, n_terms) integer partial arguments
    radix: int
    n_digits: int

    @property
    def size(self) -> int:
        return self.table.shape[0]

    def strategy(self, index: int, m: int, d: int) -> dict[tuple[int, ...], tuple[int, ...]]:
        digits = []
        for _ in range(self.n_digits):
            digits.append(index % self.radix)
            index //= self.radix
        digits.reverse()
        settings = itertools.product(range(1, m + 1), repeat=len(self.parties))
        outcomes = list(itertools.product(range(d), repeat=len(self.parties)))
        return {s: outcomes[j] for s, j in zip(settings, digits)}


def _group_table(f: BellFunctional, parties: Sequence[int], cap: int) -> _Group:
    sc = f.scenario
    m, d = sc.m, sc.d
    g = len(parties)
    radix = d ** g
    n_digits = m ** g
    if n_digits * np.log(radix) > np.log(cap) + 1e-9:
        raise EnumerationCapError(
            f"group {''.join(party_name(k) for k in parties)} has {radix}^{n_digits} strategies, "
            f"above the enumeration cap {cap}")
    count = radix ** n_digits
    outs = np.array(list(itertools.product(range(d), repeat=g)), dtype=np.int64).reshape(radix, g)
    # per term: which digit (joint setting of the group) it reads and its contribution per joint outcome
    digit_of_term = np.empty(len(f.terms), dtype=np.int64)
    contrib = np.empty((len(f.terms), radix), dtype=np.int64)
    for t_i, t in enumerate(f.terms):
        pos = 0
        for k in parties:
            pos = pos * m + (t.settings[k] - 1)
        digit_of_term[t_i] = pos
        signs = np.array([t.variables[k].sign for k in parties])
        offs = np.array([t.variables[k].outcome_offset for k in parties])
        contrib[t_i] = (signs * (outs + offs)).sum(axis=1)
    idx = np.arange(count, dtype=np.int64)
    powers = radix ** np.arange(n_digits - 1, -1, -1, dtype=np.int64)
    digits = (idx[:, None] // powers[None, :]) % radix
    table = contrib[np.arange(len(f.terms))[None, :], digits[:, digit_of_term]]
    return _Group(tuple(parties), table, radix, n_digits)


def _minimize_product(groups: list[_Group], d: int, threads: int = 1) -> tuple[int, tuple[int, ...]]:
    """Minimum of sum_t (sum_g table_g[i_g, t] mod d) over all index tuples, first minimizer."""
    *head, last = groups
    partial = np.zeros((1, last.table.shape[1]), dtype=np.int64)
    for g in head:
        partial = (partial[:, None, :] + g.table[None, :, :]).reshape(-1, g.table.shape[1])
    per_row = last.size * last.table.shape[1]
    chunk = max(1, _CHUNK_ELEMS // per_row)
    starts = list(range(0, partial.shape[0], chunk))

    def run(start):
        block = partial[start:start + chunk]
        totals = np.mod(block[:, None, :] + last.table[None, :, :], d).sum(axis=2)
        flat = int(np.argmin(totals))
        return int(totals.flat[flat]), start * last.size + flat

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]
    best, pos = min(results)
    sizes = [g.size for g in groups]
    return best, tuple(int(i) for i in np.unravel_index(pos, sizes))


@dataclass
class MinimumResult:
    minimum: Fraction
    witness: dict
    evaluations: int
    seconds: float
    per_bipartition: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "minimum": float(self.minimum),
            "minimum_exact": str(self.minimum),
            "witness": self.witness,
            "evaluations": self.evaluations,
            "seconds": self.seconds,
        }
        if self.per_bipartition:
            out["per_bipartition"] = {k: float(v) for k, v in self.per_bipartition.items()}
        return out


def _strategy_json(table: dict) -> list:
    return [{"settings": list(s), "outcomes": list(r)} for s, r in table.items()]


def _check_cap(count: int, cap: int) -> None:
    if count > cap:
        raise EnumerationCapError(
            f"{count} strategy evaluations exceed the cap {cap}; try a smaller scenario or raise --enum-cap")


def min_local(f: BellFunctional, cap: int = ENUM_CAP, threads: int = 1) -> MinimumResult:
    sc = f.scenario
    count = sc.d ** (sc.n * sc.m)
    _check_cap(count, cap)
    t0 = time.perf_counter()
    groups = [_group_table(f, (k,), cap) for k in range(sc.n)]
    best, idx = _minimize_product(groups, sc.d, threads)
    witness = {
        "parties": {
            party_name(k): [r[0] for _, r in sorted(g.strategy(i, sc.m, sc.d).items())]
            for k, (g, i) in enumerate(zip(groups, idx))
        }
    }
    return MinimumResult(f.regularization * best, witness, count, time.perf_counter() - t0)


def bipartitions(n: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All splits into two nonempty groups, the first one holding party 0."""
    out = []
    rest = list(range(1, n))
    for size in range(0, n - 1):
        for extra in itertools.combinations(rest, size):
            g = (0,) + extra
            out.append((g, tuple(k for k in range(n) if k not in g)))
    return sorted(out)


def bipartition_label(bp) -> str:
    return ":".join("".join(party_name(k) for k in g) for g in bp)


def bilocal_count(f: BellFunctional, parts=None) -> int:
    sc = f.scenario
    parts = bipartitions(sc.n) if parts is None else parts
    total = 0
    for g, h in parts:
        total += (sc.d ** len(g)) ** (sc.m ** len(g)) * (sc.d ** len(h)) ** (sc.m ** len(h))
    return total


def min_bilocal(f: BellFunctional, parts=None, cap: int = ENUM_CAP, threads: int = 1) -> MinimumResult:
    """Exact minimum over deterministic models local across some bipartition.

    Within a group the strategy may depend on all of the group's settings.
    """
    sc = f.scenario
    parts = bipartitions(sc.n) if parts is None else [tuple(map(tuple, p)) for p in parts]
    count = bilocal_count(f, parts)
    _check_cap(count, cap)
    t0 = time.perf_counter()
    best = None
    per = {}
    for bp in parts:
        groups = [_group_table(f, g, cap) for g in bp]
        value, idx = _minimize_product(groups, sc.d, threads)
        per[bipartition_label(bp)] = f.regularization * value
        if best is None or value < best[0]:
            best = (value, bp, groups, idx)
    value, bp, groups, idx = best
    witness = {
        "bipartition": bipartition_label(bp),
        "groups": {
            "".join(party_name(k) for k in g.parties): _strategy_json(g.strategy(i, sc.m, sc.d))
            for g, i in zip(groups, idx)
        },
    }
    return MinimumResult(f.regularization * value, witness, count, time.perf_counter() - t0, per)


@dataclass
class GapReport:
    local_minimum: float
    bilocal_minimum: float
    quantum_value: float
    nonsignaling_minimum: float | None = None

    def ordered(self) -> bool:
        """Quantum value strictly inside (0, bilocal minimum)."""
        return 0 < self.quantum_value < self.bilocal_minimum

    def to_dict(self) -> dict:
        out = {"local_minimum": self.local_minimum, "bilocal_minimum": self.bilocal_minimum,
               "quantum_value": self.quantum_value}
        if self.nonsignaling_minimum is not None:
            out["nonsignaling_minimum"] = self.nonsignaling_minimum
        return out


def gap_report(f: BellFunctional, quantum_value: float, nonsignaling_minimum: float | None = None,
               cap: int = ENUM_CAP) -> GapReport:
    loc = min_local(f, cap)
    bil = min_bilocal(f, cap=cap)
    return GapReport(float(loc.minimum), float(bil.minimum), quantum_value, nonsignaling_minimum)


def certify(n: int, m: int, d: int, model: str = "local", cap: int = ENUM_CAP, threads: int = 1) -> MinimumResult:
    from .core import Scenario
    f = build_functional(Scenario(n, m, d))
    if model == "local":
        return min_local(f, cap, threads)
    if model == "bilocal":
        return min_bilocal(f, cap=cap, threads=threads)
    raise ValueError(f"unknown model {model!r}")
