"""Scenarios, behavior tables and the nonsignaling machinery they share.

Settings are 1-based and outcomes 0-based throughout the public API; party
indices are 0-based (party 0 is Alice).  A behavior is stored densely as an
array of shape ``(K,) + (d,) * N`` where the K rows are the supported setting
tuples, either the full grid in row-major order or an explicit sparse list.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import string
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

TAU_NORM = 1e-9
TAU_NS = 1e-9


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    return int(float(raw)) if raw else default


# Cap on the number of entries of the smallest table a scenario needs
# (the inequality bases times d**N).  Full-grid tables are checked separately.
TABLE_CAP = _env_int("SVETLAB_TABLE_CAP", 10**7)


class ScenarioError(ValueError):
    pass


class BehaviorError(ValueError):
    pass


class UnsupportedSettingError(BehaviorError):
    def __init__(self, settings):
        self.settings = tuple(settings)
        super().__init__(f"setting tuple {self.settings} is not supported by this behavior")


def party_name(k: int) -> str:
    return string.ascii_uppercase[k] if k < 26 else f"P{k}"


@dataclass(frozen=True)
class Scenario:
    """N parties, each choosing one of M settings with d outcomes."""

    n_parties: int
    n_settings: int
    n_outcomes: int
    cap: int = field(default=TABLE_CAP, compare=False, repr=False)

    def __post_init__(self):
        for name in ("n_parties", "n_settings", "n_outcomes"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ScenarioError(f"{name} must be an integer, got {value!r}")
            if value < 2:
                raise ScenarioError(f"{name} must be >= 2, got {value}")
        # log-space check first so absurd inputs never build big integers
        n, m, d = self.n_parties, self.n_settings, self.n_outcomes
        log_size = math.log(2) + (n - 1) * math.log(m) + n * math.log(d)
        if log_size > math.log(self.cap) + 1e-9 or self.basis_table_size > self.cap:
            raise ScenarioError(
                f"scenario (N={n}, M={m}, d={d}) needs {2 * m ** (n - 1) * d ** n} "
                f"table entries, above the cap {self.cap}")

    @property
    def n(self) -> int:
        return self.n_parties

    @property
    def m(self) -> int:
        return self.n_settings

    @property
    def d(self) -> int:
        return self.n_outcomes

    @property
    def n_setting_tuples(self) -> int:
        return self.m ** self.n

    @property
    def n_outcome_tuples(self) -> int:
        return self.d ** self.n

    @property
    def full_table_size(self) -> int:
        return self.n_setting_tuples * self.n_outcome_tuples

    @property
    def basis_table_size(self) -> int:
        return 2 * self.m ** (self.n - 1) * self.n_outcome_tuples

    def check_full_grid(self, cap: int | None = None) -> None:
        cap = self.cap if cap is None else cap
        if self.full_table_size > cap:
            raise ScenarioError(
                f"full-grid table for {self.label()} has {self.full_table_size} entries, "
                f"above the cap {cap}")

    def setting_tuples(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(range(1, self.m + 1), repeat=self.n)

    def outcome_tuples(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(range(self.d), repeat=self.n)

    def setting_index(self, settings: Sequence[int]) -> int:
        """Row-major index of a setting tuple in the full grid."""
        self.validate_settings(settings)
        idx = 0
        for s in settings:
            idx = idx * self.m + (s - 1)
        return idx

    def validate_settings(self, settings: Sequence[int]) -> tuple[int, ...]:
        settings = tuple(int(s) for s in settings)
        if len(settings) != self.n or not all(1 <= s <= self.m for s in settings):
            raise ScenarioError(f"invalid setting tuple {settings} for {self.label()}")
        return settings

    def validate_outcomes(self, outcomes: Sequence[int]) -> tuple[int, ...]:
        outcomes = tuple(int(r) for r in outcomes)
        if len(outcomes) != self.n or not all(0 <= r < self.d for r in outcomes):
            raise ScenarioError(f"invalid outcome tuple {outcomes} for {self.label()}")
        return outcomes

    def label(self) -> str:
        return f"(N={self.n}, M={self.m}, d={self.d})"

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "d": self.d}


class BehaviorTable:
    """Conditional distribution P(outcomes | settings) on a set of setting tuples.

    Parameters
    ----------
    scenario : Scenario
    probs : array_like
        Shape ``(K,) + (d,) * N`` or ``(K, d**N)``.  An object array of
        ``Fraction`` is accepted for exact work.
    settings : sequence of tuples, optional
        The K supported setting tuples.  ``None`` means the full grid in
        row-major order.
    validate : bool
        Check normalization, NaNs and negativity.  Entries in ``[-tol, 0)``
        are clamped to zero either way.
    """

    def __init__(self, scenario: Scenario, probs, settings: Iterable[Sequence[int]] | None = None,
                 *, validate: bool = True, tol: float = TAU_NORM):
        self.scenario = scenario
        n, d = scenario.n, scenario.d
        if settings is None:
            scenario.check_full_grid()
            settings = list(scenario.setting_tuples())
        else:
            settings = [scenario.validate_settings(s) for s in settings]
        self.settings: tuple[tuple[int, ...], ...] = tuple(settings)
        self._index = {s: i for i, s in enumerate(self.settings)}
        if len(self._index) != len(self.settings):
            raise BehaviorError("duplicate setting tuples in support")
        self.full_grid = (len(self.settings) == scenario.n_setting_tuples
                          and all(self.settings[i] == s for i, s in enumerate(scenario.setting_tuples())))

        arr = np.array(probs, dtype=object if _is_object(probs) else float, copy=True)
        arr = arr.reshape((len(self.settings),) + (d,) * n)
        self.exact = arr.dtype == object
        if not self.exact:
            if validate and np.isnan(arr).any():
                raise BehaviorError("behavior contains NaN entries")
            if validate and (arr < -tol).any():
                bad = np.unravel_index(np.argmin(arr), arr.shape)
                raise BehaviorError(
                    f"negative probability {arr[bad]:.3g} at settings {self.settings[bad[0]]}")
            arr[(arr < 0) & (arr >= -tol)] = 0.0
        self.tol = tol
        self.probs = arr
        self.probs.flags.writeable = False
        if validate:
            worst, where = self.normalization_error()
            if worst > tol:
                raise BehaviorError(
                    f"probabilities for settings {where} deviate from normalization by "
                    f"{worst:.3g} > {tol:g}")

    # --- constructors -------------------------------------------------

    @classmethod
    def uniform(cls, scenario: Scenario, settings=None) -> "BehaviorTable":
        k = scenario.n_setting_tuples if settings is None else len(list(settings))
        probs = np.full((k,) + (scenario.d,) * scenario.n, 1.0 / scenario.n_outcome_tuples)
        return cls(scenario, probs, settings)

    @classmethod
    def deterministic(cls, scenario: Scenario, strategy, settings=None) -> "BehaviorTable":
        """Local deterministic behavior; ``strategy[k][s - 1]`` is party k's outcome at setting s."""
        if settings is None:
            settings = list(scenario.setting_tuples())
        settings = [tuple(s) for s in settings]
        probs = np.zeros((len(settings),) + (scenario.d,) * scenario.n)
        for i, s in enumerate(settings):
            r = tuple(int(strategy[k][s[k] - 1]) for k in range(scenario.n))
            probs[(i,) + r] = 1.0
        return cls(scenario, probs, settings)

    @classmethod
    def from_function(cls, scenario: Scenario, fn, settings=None) -> "BehaviorTable":
        if settings is None:
            settings = list(scenario.setting_tuples())
        settings = [tuple(s) for s in settings]
        probs = np.zeros((len(settings),) + (scenario.d,) * scenario.n)
        for i, s in enumerate(settings):
            for r in scenario.outcome_tuples():
                probs[(i,) + r] = fn(s, r)
        return cls(scenario, probs, settings)

    # --- access -------------------------------------------------------

    def __contains__(self, settings) -> bool:
        return tuple(settings) in self._index

    def __len__(self) -> int:
        return len(self.settings)

    def row_index(self, settings: Sequence[int]) -> int:
        try:
            return self._index[tuple(int(s) for s in settings)]
        except KeyError:
            raise UnsupportedSettingError(settings) from None

    def row(self, settings: Sequence[int]) -> np.ndarray:
        return self.probs[self.row_index(settings)]

    def prob(self, settings: Sequence[int], outcomes: Sequence[int]):
        return self.row(settings)[tuple(outcomes)]

    def normalization_error(self) -> tuple[float, tuple[int, ...] | None]:
        axes = tuple(range(1, self.scenario.n + 1))
        if self.exact:
            sums = [sum(self.probs[i].flat) for i in range(len(self.settings))]
            devs = [abs(float(s - 1)) for s in sums]
        else:
            devs = list(np.abs(self.probs.sum(axis=axes) - 1.0))
        if not devs:
            return 0.0, None
        i = int(np.argmax(devs))
        return float(devs[i]), self.settings[i]

    def as_float(self) -> "BehaviorTable":
        if not self.exact:
            return self
        return BehaviorTable(self.scenario, self.probs.astype(float), self.settings,
                             validate=False, tol=self.tol)

    def grid_array(self) -> np.ndarray:
        """Full-grid view of shape ``(M,) * N + (d,) * N``."""
        if not self.full_grid:
            raise BehaviorError("operation requires a full-grid behavior; this one is sparse")
        sc = self.scenario
        return self.probs.reshape((sc.m,) * sc.n + (sc.d,) * sc.n)

    def allclose(self, other: "BehaviorTable", atol: float = 1e-12) -> bool:
        if self.settings != other.settings:
            return False
        return bool(np.allclose(self.probs.astype(float), other.probs.astype(float), atol=atol, rtol=0))

    # --- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        entries = []
        for i, s in enumerate(self.settings):
            row = self.probs[i]
            for r in self.scenario.outcome_tuples():
                p = float(row[r])
                if p != 0.0:
                    entries.append({"settings": list(s), "outcomes": list(r), "p": p})
        return {"scenario": self.scenario.to_dict(), "entries": entries}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict, *, validate: bool = True, tol: float = TAU_NORM) -> "BehaviorTable":
        sc = data["scenario"]
        scenario = Scenario(int(sc["n"]), int(sc["m"]), int(sc["d"]))
        rows: dict[tuple[int, ...], np.ndarray] = {}
        for e in data["entries"]:
            s = scenario.validate_settings(e["settings"])
            r = scenario.validate_outcomes(e["outcomes"])
            row = rows.setdefault(s, np.zeros((scenario.d,) * scenario.n))
            row[r] = float(e["p"])
        grid = list(scenario.setting_tuples())
        if len(rows) == len(grid):
            settings = grid
        else:
            settings = sorted(rows)
        probs = np.stack([rows[s] for s in settings]) if settings else np.zeros((0,) + (scenario.d,) * scenario.n)
        return cls(scenario, probs, None if settings is grid else settings, validate=validate, tol=tol)

    @classmethod
    def from_json(cls, text: str, **kwargs) -> "BehaviorTable":
        return cls.from_dict(json.loads(text), **kwargs)

    def __repr__(self) -> str:
        kind = "full" if self.full_grid else f"{len(self.settings)} settings"
        return f"BehaviorTable({self.scenario.label()}, {kind})"


def _is_object(probs) -> bool:
    return isinstance(probs, np.ndarray) and probs.dtype == object


def marginalize(b: BehaviorTable, keep: Sequence[int], settings: Sequence[int]) -> np.ndarray:
    """Distribution of the outcomes of parties ``keep`` at the setting tuple ``settings``.

    The result has one axis per kept party, in the order given.
    """
    n = b.scenario.n
    keep = list(keep)
    if len(set(keep)) != len(keep) or not all(0 <= k < n for k in keep):
        raise ValueError(f"invalid party subset {keep} for N={n}")
    row = b.row(settings)
    drop = tuple(k for k in range(n) if k not in keep)
    if b.exact:
        marg = np.empty((b.scenario.d,) * len(keep), dtype=object)
        marg[...] = 0
        for r in itertools.product(range(b.scenario.d), repeat=n):
            marg[tuple(r[k] for k in keep)] += row[r]
        return marg
    marg = row.sum(axis=drop) if drop else row
    # sum() leaves kept axes in increasing order
    order = sorted(keep)
    return np.transpose(marg, [order.index(k) for k in keep])


@dataclass(frozen=True)
class NonsignalingReport:
    max_violation: float
    party: int | None = None
    settings: tuple[int, ...] | None = None
    compared_setting: int | None = None

    def ok(self, tol: float = TAU_NS) -> bool:
        return self.max_violation <= tol

    def to_dict(self) -> dict:
        out = {"max_violation": self.max_violation}
        if self.party is not None:
            out.update(party=party_name(self.party), settings=list(self.settings),
                       compared_setting=self.compared_setting)
        return out


def check_nonsignaling(b: BehaviorTable) -> NonsignalingReport:
    """Largest dependence of the other parties' marginal on any single party's setting."""
    sc = b.scenario
    n = sc.n
    grid = b.grid_array()
    if grid.dtype == object:
        grid = grid.astype(float)
    if np.isnan(grid).any():
        raise BehaviorError("behavior contains NaN entries")
    worst = NonsignalingReport(0.0)
    for k in range(n):
        q = grid.sum(axis=n + k)
        ref = np.take(q, [0], axis=k)
        dev = np.abs(q - ref)
        idx = np.unravel_index(int(np.argmax(dev)), dev.shape)
        v = float(dev[idx])
        if v > worst.max_violation:
            settings = tuple(int(i) + 1 for i in idx[:n])
            worst = NonsignalingReport(v, k, settings, 1)
    return worst


def permute_parties(b: BehaviorTable, perm: Sequence[int]) -> BehaviorTable:
    """Relabel parties so that new party ``i`` is old party ``perm[i]``."""
    n = b.scenario.n
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of {n} parties")
    grid = b.grid_array()
    moved = np.transpose(grid, perm + [n + p for p in perm])
    return BehaviorTable(b.scenario, moved.reshape(b.probs.shape), validate=False, tol=b.tol)


def compose_permutations(first: Sequence[int], second: Sequence[int]) -> list[int]:
    """Permutation equivalent to applying ``first`` and then ``second``."""
    return [first[j] for j in second]


def transposition(n: int, i: int, j: int) -> list[int]:
    perm = list(range(n))
    perm[i], perm[j] = perm[j], perm[i]
    return perm
