"""Dense two-phase tableau simplex with Bland's rule.

Works on floats (pivot tolerance 1e-9) or, with ``exact=True``, on
``fractions.Fraction`` entries held in object arrays, in which case every
comparison is exact.  Problems are

    min / max  c @ x   s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

LP_CAP = int(float(os.environ.get("SVETLAB_LP_CAP", 20_000)))
EXACT_CAP = 2_000
PIVOT_TOL = 1e-9


class LpCapError(ValueError):
    pass


class LpStallError(RuntimeError):
    pass


@dataclass
class LpProblem:
    c: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    sense: str = "min"
    labels: list[str] | None = None
    row_labels_eq: list[str] | None = None
    row_labels_ub: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        if self.a_eq is None:
            self.a_eq, self.b_eq = np.zeros((0, n)), np.zeros(0)
        if self.a_ub is None:
            self.a_ub, self.b_ub = np.zeros((0, n)), np.zeros(0)
        self.a_eq = np.atleast_2d(np.asarray(self.a_eq, dtype=float)).reshape(-1, n)
        self.a_ub = np.atleast_2d(np.asarray(self.a_ub, dtype=float)).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        self.b_ub = np.asarray(self.b_ub, dtype=float).ravel()
        if self.a_eq.shape[0] != self.b_eq.size or self.a_ub.shape[0] != self.b_ub.size:
            raise ValueError("constraint matrix and right-hand side sizes disagree")
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        for arr in (self.c, self.a_eq, self.b_eq, self.a_ub, self.b_ub):
            if not np.isfinite(arr).all():
                raise ValueError("LP data contains non-finite entries")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def dump(self) -> str:
        """Plain-text matrix form: one row per line, ``kind coeffs... | rhs``."""
        fmt = lambda v: repr(float(v))
        lines = [f"# lp {self.sense} vars={self.n_vars} eq={self.b_eq.size} ub={self.b_ub.size}"]
        if self.labels:
            lines.append("labels " + " ".join(self.labels))
        lines.append("obj " + " ".join(map(fmt, self.c)))
        for row, rhs in zip(self.a_eq, self.b_eq):
            lines.append("eq " + " ".join(map(fmt, row)) + " | " + fmt(rhs))
        for row, rhs in zip(self.a_ub, self.b_ub):
            lines.append("le " + " ".join(map(fmt, row)) + " | " + fmt(rhs))
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: str
    objective: Any = None
    x: np.ndarray | None = None
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    duals: np.ndarray | None = None
    behavior: Any = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def to_dict(self) -> dict:
        out = {"status": self.status, "iterations": self.iterations, "residuals": self.residuals}
        if self.objective is not None:
            out["objective"] = float(self.objective)
            if isinstance(self.objective, Fraction):
                out["objective_exact"] = str(self.objective)
        return out


def _to_exact(arr: np.ndarray) -> np.ndarray:
    out = np.empty(arr.shape, dtype=object)
    flat = out.reshape(-1)
    for i, v in enumerate(np.asarray(arr, dtype=float).reshape(-1)):
        flat[i] = Fraction(v).limit_denominator(10**12) if v != int(v) else Fraction(int(v))
    return out


class _Tableau:
    def __init__(self, a, b, exact: bool, tol: float):
        m, n = a.shape
        self.exact = exact
        self.tol = 0 if exact else tol
        dtype = object if exact else float
        t = np.zeros((m + 1, n + m + 1), dtype=dtype)
        if exact:
            t[...] = Fraction(0)
        t[:m, :n] = a
        for i in range(m):
            t[i, n + i] = 1
        t[:m, -1] = b
        self.t = t
        self.m, self.n = m, n
        self.basis = [n + i for i in range(m)]
        self.iterations = 0

    def set_cost(self, cost):
        t = self.t
        t[-1, :] = 0
        t[-1, :cost.size] = cost
        for i, j in enumerate(self.basis):
            if t[-1, j] != 0:
                t[-1] = t[-1] - t[-1, j] * t[i]

    def pivot(self, r: int, j: int):
        t = self.t
        t[r] = t[r] / t[r, j]
        col = t[:, j].copy()
        col[r] = 0
        t -= np.outer(col, t[r])
        if not self.exact:
            t[:, j] = 0.0
            t[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed: np.ndarray, max_iter: int) -> str:
        t = self.t
        tol = self.tol
        while True:
            if self.iterations >= max_iter:
                return "stall"
            red = t[-1, :-1]
            cand = np.nonzero((red < -tol) & allowed)[0]
            if cand.size == 0:
                return "optimal"
            j = int(cand[0])  # Bland: lowest index entering
            colj = t[:-1, j]
            rows = np.nonzero(colj > tol)[0]
            if rows.size == 0:
                return "unbounded"
            ratios = [t[i, -1] / colj[i] for i in rows]
            best = min(ratios)
            if not self.exact:
                scale = max(1.0, abs(float(best)))
                ties = [i for i, q in zip(rows, ratios) if q <= best + 1e-12 * scale]
            else:
                ties = [i for i, q in zip(rows, ratios) if q == best]
            r = min(ties, key=lambda i: self.basis[i])  # Bland: lowest index leaving
            self.pivot(int(r), j)


def solve(p: LpProblem, exact: bool = False, cap: int = LP_CAP, tol: float = PIVOT_TOL,
          max_iter: int | None = None) -> LpSolution:
    n = p.n_vars
    if n > cap:
        raise LpCapError(f"LP has {n} columns, above the cap {cap}")
    if exact and n > EXACT_CAP:
        raise LpCapError(f"exact mode is limited to {EXACT_CAP} variables, LP has {n}")
    m_eq, m_ub = p.b_eq.size, p.b_ub.size
    a = np.zeros((m_eq + m_ub, n + m_ub))
    a[:m_eq, :n] = p.a_eq
    a[m_eq:, :n] = p.a_ub
    a[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([p.b_eq, p.b_ub])
    cost = np.concatenate([p.c if p.sense == "min" else -p.c, np.zeros(m_ub)])
    flip = b < 0
    a[flip] *= -1
    b[flip] *= -1
    if exact:
        a, b, cost = _to_exact(a), _to_exact(b), _to_exact(cost)
    rows, cols = a.shape
    max_iter = max_iter or 50 * (rows + cols) + 1000

    tab = _Tableau(a, b, exact, tol)
    phase1 = np.concatenate([np.zeros(cols), np.ones(rows)])
    tab.set_cost(_to_exact(phase1) if exact else phase1)
    allowed = np.ones(cols + rows, dtype=bool)
    status = tab.run(allowed, max_iter)
    if status == "stall":
        raise LpStallError(_stall_message(tab, a, "phase 1"))
    infeas = -tab.t[-1, -1]
    feas_tol = 0 if exact else 1e-9 * max(1.0, float(np.abs(b).max(initial=0.0)))
    if infeas > feas_tol:
        return LpSolution("infeasible", iterations=tab.iterations,
                          residuals={"phase1_infeasibility": float(infeas)})

    # drive artificials out of the basis; rows where that is impossible are redundant
    keep = []
    for i in range(rows):
        if tab.basis[i] >= cols:
            row = tab.t[i, :cols]
            nz = np.nonzero(np.abs(row) > tab.tol)[0] if not exact else np.nonzero(row != 0)[0]
            if nz.size:
                tab.pivot(i, int(nz[0]))
                keep.append(i)
        else:
            keep.append(i)
    tab.t = np.vstack([tab.t[keep], tab.t[-1:]])
    tab.t = np.delete(tab.t, np.s_[cols:cols + rows], axis=1)
    tab.basis = [tab.basis[i] for i in keep]
    tab.m = len(keep)
    redundant = rows - len(keep)

    tab.set_cost(cost)
    status = tab.run(np.ones(cols, dtype=bool), max_iter)
    if status == "stall":
        raise LpStallError(_stall_message(tab, a, "phase 2"))
    if status == "unbounded":
        return LpSolution("unbounded", iterations=tab.iterations)

    x_full = np.zeros(cols, dtype=object if exact else float)
    if exact:
        x_full[...] = Fraction(0)
    for i, j in enumerate(tab.basis):
        x_full[j] = tab.t[i, -1]
    if not exact:
        x_full = _polish(a, b, tab.basis, x_full)
    x = x_full[:n]
    obj = sum((ci * xi for ci, xi in zip(_to_exact(p.c), x)), Fraction(0)) if exact else float(p.c @ x)
    residuals = _certificate(a, b, cost, tab.basis, x_full)
    residuals["redundant_rows"] = redundant
    return LpSolution("optimal", obj, x, tab.iterations, residuals, residuals.pop("_duals"))


def _polish(a, b, basis, x_full):
    """Recompute basic values from the original data to shed pivoting drift."""
    bm = a[:, basis].astype(float)
    try:
        xb, *_ = np.linalg.lstsq(bm, b.astype(float), rcond=None)
    except np.linalg.LinAlgError:
        return x_full
    out = np.zeros_like(x_full, dtype=float)
    out[basis] = xb
    if np.abs(a.astype(float) @ out - b.astype(float)).max(initial=0) <= \
            np.abs(a.astype(float) @ x_full - b.astype(float)).max(initial=0):
        out[np.abs(out) < 1e-15] = 0.0
        return out
    return x_full


def _certificate(a, b, cost, basis, x_full) -> dict:
    af, bf, cf = a.astype(float), b.astype(float), cost.astype(float)
    xf = np.asarray(x_full, dtype=float)
    bm = af[:, basis]
    y, *_ = np.linalg.lstsq(bm.T, cf[basis], rcond=None)
    reduced = cf - af.T @ y
    return {
        "feasibility": float(np.abs(af @ xf - bf).max(initial=0.0)),
        "min_variable": float(xf.min(initial=0.0)),
        "dual_infeasibility": float(max(0.0, -reduced.min(initial=0.0))),
        "complementary_slackness": float(np.abs(xf * reduced).max(initial=0.0)),
        "duality_gap": float(abs(cf @ xf - bf @ y)),
        "_duals": y,
    }


def _stall_message(tab: _Tableau, a, phase: str) -> str:
    basis = [j for j in tab.basis if j < a.shape[1]]
    cond = float(np.linalg.cond(a[:, basis].astype(float))) if basis else float("nan")
    return (f"simplex made no progress within {tab.iterations} pivots in {phase}; "
            f"basis condition number {cond:.3g}, {len(basis)}/{tab.m} structural basics")
