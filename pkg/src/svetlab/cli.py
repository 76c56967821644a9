"""Command-line front end: ``svetlab <subcommand> [options]``.

Every run prints (or writes with ``--out``) one JSON report with a fixed
schema tag, the full run configuration, the tolerances in force, the result
and a separate ``timing`` block.  Exit status: 0 success, 1 a check failed,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import classical, core, simplex
from .core import BehaviorTable, Scenario

SCHEMA = "svetlichny-lab/1"


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--enum-cap", type=int, default=classical.ENUM_CAP)
    g.add_argument("--lp-cap", type=int, default=simplex.LP_CAP)
    g.add_argument("--table-cap", type=int, default=core.TABLE_CAP)
    g.add_argument("--tol-norm", type=float, default=core.TAU_NORM)
    g.add_argument("--tol-ns", type=float, default=core.TAU_NS)
    g.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    g.add_argument("--csv", type=Path, help="also write tabular output as CSV")

    def scenario_args(p, n=True, m=True, d=True):
        if n:
            p.add_argument("--n", type=int, required=True, help="number of parties")
        if m:
            p.add_argument("--m", type=int, required=True, help="settings per party")
        if d:
            p.add_argument("--d", type=int, required=True, help="outcomes per setting")

    parser = argparse.ArgumentParser(prog="svetlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("terms", parents=[common], help="list the chained terms of the functional")
    scenario_args(p)

    p = sub.add_parser("quantum", parents=[common], help="GHZ Bell values against M")
    scenario_args(p, m=False)
    p.add_argument("--m-list", type=_int_list, required=True)

    p = sub.add_parser("bound", parents=[common], help="exhaustive local or bilocal minimum")
    scenario_args(p)
    p.add_argument("--model", choices=["local", "bilocal"], required=True)

    p = sub.add_parser("ns", parents=[common], help="linear programs over the nonsignaling polytope")
    scenario_args(p)
    p.add_argument("--task", choices=["min-bell", "theorem1", "monogamy", "uniqueness"], required=True)
    p.add_argument("--exact", action="store_true", help="rational arithmetic in the simplex")
    p.add_argument("--eps", type=_float_list, default=[0.0, 0.01, 0.05, 0.1])
    p.add_argument("--basis", type=_int_list, help="setting tuple (default: first basis)")
    p.add_argument("--outcomes", type=_int_list, help="theorem1 target outcomes (default: zeros)")
    p.add_argument("--dump", type=Path, help="write the LP in plain-text matrix form")

    p = sub.add_parser("verify", parents=[common], help="run the checker battery on a behavior file")
    p.add_argument("--behavior", type=Path, required=True)

    p = sub.add_parser("share", parents=[common], help="simulate the secret-sharing protocol")
    scenario_args(p)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--source", choices=["quantum", "ideal-box", "deterministic", "file"], default="quantum")
    p.add_argument("--behavior", type=Path, help="behavior file for --source file")

    p = sub.add_parser("asymptotics", parents=[common], help="large-M ratio and equality across N")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m-list", type=_int_list, default=[8, 16, 32, 64, 128])
    p.add_argument("--n-list", type=_int_list, default=[3, 4])
    p.add_argument("--equality-m-list", type=_int_list, default=[2, 4, 8])
    return parser


def _scenario(args) -> Scenario:
    return Scenario(args.n, args.m, args.d, cap=args.table_cap)


def _write_csv(path: Path | None, header: list[str], rows: list[list]) -> None:
    if path is None:
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


# --- subcommands -------------------------------------------------------
# Each returns (result dict, passed flag, tolerances dict).

def cmd_terms(args):
    from .functional import build_functional, terms_csv
    sc = _scenario(args)
    f = build_functional(sc)
    if args.csv:
        args.csv.write_text(terms_csv(f))
    terms = [{"kind": t.kind, "sigma": list(t.sigma), "settings": list(t.settings),
              "offsets": list(t.offsets), "signs": list(t.signs)} for t in f.terms]
    result = {"n_terms": len(terms), "n_bases": len(set(f.bases())),
              "regularization": str(f.regularization), "local_bound": f.local_bound, "terms": terms}
    return result, len(set(f.bases())) == len(terms), {}


def cmd_quantum(args):
    from .quantum import bell_value_vs_m, fitted_constant, loglog_slope
    for m in args.m_list:
        Scenario(args.n, m, args.d, cap=args.table_cap)
    rows = bell_value_vs_m(args.n, args.d, args.m_list)
    exact = [r.exact for r in rows]
    below = all(v < args.d - 1 for v in exact)
    decreasing = all(a > b for a, b in zip(exact, exact[1:]))
    _write_csv(args.csv, ["M", "exact", "approximation", "ratio"],
               [[r.m, repr(r.exact), repr(r.approximation), repr(r.ratio)] for r in rows])
    result = {
        "table": [r.to_dict() for r in rows],
        "below_bilocal_bound": below,
        "strictly_decreasing": decreasing,
        "loglog_slope": loglog_slope(rows) if len(rows) > 1 else None,
        "fitted_constant": fitted_constant(rows),
    }
    return result, below and decreasing, {}


def cmd_bound(args):
    from .functional import build_functional
    sc = _scenario(args)
    f = build_functional(sc)
    if args.model == "local":
        res = classical.min_local(f, cap=args.enum_cap, threads=args.threads)
    else:
        res = classical.min_bilocal(f, cap=args.enum_cap, threads=args.threads)
    out = res.to_dict()
    seconds = out.pop("seconds")
    out["model"] = args.model
    out["local_bound"] = f.local_bound
    # the inequality can hold without being tight (e.g. local models at N=3, M=3)
    out["respects_bound"] = res.minimum >= f.local_bound
    out["equals_local_bound"] = res.minimum == f.local_bound
    return out, res.minimum >= f.local_bound, {"comparison": "exact rational"}, {"search_seconds": seconds}


def cmd_ns(args):
    from . import nonsignaling as ns
    from .functional import build_functional
    sc = _scenario(args)
    sc.check_full_grid(args.table_cap)
    f = build_functional(sc)
    basis = tuple(args.basis) if args.basis else f.bases()[0]
    tol = {"lp_pivot": simplex.PIVOT_TOL}
    if args.task == "min-bell":
        prob = ns.bell_problem(sc, f)
        if args.dump:
            args.dump.write_text(prob.dump())
        sol = ns._attach(simplex.solve(prob, exact=args.exact, cap=args.lp_cap), sc)
        value = float(sol.objective) if sol.optimal else None
        box = ns.ideal_box(sc, exact=True)
        from .functional import evaluate
        box_value = evaluate(f, box)
        result = {**sol.to_dict(), "ideal_box_value_exact": str(box_value)}
        tol["objective_zero"] = 1e-8
        return result, sol.optimal and abs(value) <= 1e-8 and box_value == 0, tol
    if args.task == "theorem1":
        parties = list(range(sc.n - 1))
        outcomes = args.outcomes or [0] * (sc.n - 1)
        pts = ns.theorem1_probe(sc, parties, basis, outcomes, args.eps, exact=args.exact)
        _write_csv(args.csv, ["eps", "value", "bound", "status"],
                   [[repr(p.eps), repr(p.value), repr(p.bound), p.status] for p in pts])
        result = {"basis": list(basis), "parties": parties, "outcomes": list(outcomes),
                  "points": [p.to_dict() for p in pts]}
        tol["bound_slack"] = 1e-7
        return result, all(p.within_bound for p in pts), tol
    if args.task == "monogamy":
        res = ns.monogamy_probe(sc, target_settings=basis, exact=args.exact)
        result = {"basis": list(basis), **res.to_dict(), "uniform_guess": 1.0 / sc.d}
        tol["guess_vs_uniform"] = 1e-7
        ok = res.guessing_probability is not None and abs(res.guessing_probability - 1.0 / sc.d) <= 1e-7
        return result, ok, tol
    res = ns.uniqueness_check(sc, basis)
    tol["rank"] = 1e-10
    return res.to_dict(), res.unique and res.matches_ideal_box, tol


def _load_behavior(path: Path):
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read behavior file {path}: {exc}") from None
    return data


def cmd_verify(args):
    from .theorems import verify_behavior
    data = _load_behavior(args.behavior)
    tol = {"normalization": args.tol_norm, "nonsignaling": args.tol_ns}
    try:
        b = BehaviorTable.from_dict(data, validate=False)
    except (KeyError, TypeError, ValueError) as exc:
        return {"checks": {"parse": {"passed": False, "error": str(exc)}}, "failed": ["parse"]}, False, tol
    rep = verify_behavior(b, args.tol_norm, args.tol_ns)
    result = rep.to_dict()
    result["failed"] = [k for k, v in rep.checks.items() if not v.get("passed", True)]
    return result, rep.passed, tol


def cmd_share(args):
    from .sharing import ProtocolConfig, run_protocol, security_report, InsufficientRoundsError
    sc = _scenario(args)
    behavior = None
    if args.source == "file":
        if args.behavior is None:
            raise UsageError("--source file needs --behavior")
        behavior = BehaviorTable.from_dict(_load_behavior(args.behavior), tol=args.tol_norm)
    cfg = ProtocolConfig(sc, args.rounds, args.seed, args.source, behavior, threads=args.threads)
    t = run_protocol(cfg, behavior)
    if args.csv:
        args.csv.write_bytes(t.to_bytes())
    result = t.summary()
    try:
        result["security"] = security_report(t)
    except InsufficientRoundsError as exc:
        result["security"] = {"error": str(exc)}
    return result, True, {"frequency_sigma": 3.0, "uniformity_alpha": result["security"].get("uniformity_alpha")}


def cmd_asymptotics(args):
    from .quantum import (approximation_constant, asymptotic_constant, bell_value_closed_form,
                          check_eq9_equality)
    c = approximation_constant(args.d)
    rows = []
    for m in args.m_list:
        exact = bell_value_closed_form(args.d, m)
        rows.append({"M": m, "exact": exact, "approximation": c / m, "ratio": exact / (c / m)})
    ratios = [r["ratio"] for r in rows]
    rel = abs(ratios[-1] - ratios[-2]) / abs(ratios[-2]) if len(ratios) > 1 else None
    limit = asymptotic_constant(args.d) / c
    equal = {str(m): check_eq9_equality(args.d, m, args.n_list) for m in args.equality_m_list}
    _write_csv(args.csv, ["M", "exact", "approximation", "ratio"],
               [[r["M"], repr(r["exact"]), repr(r["approximation"]), repr(r["ratio"])] for r in rows])
    result = {
        "table": rows,
        "ratio_last": ratios[-1],
        "ratio_relative_change": rel,
        "ratio_limit": limit,
        "limit_constant": asymptotic_constant(args.d),
        "approximation_constant": c,
        "cross_n_max_difference": equal,
    }
    ok = (rel is None or rel < 0.01) and all(v < 1e-9 for v in equal.values())
    return result, ok, {"ratio_relative_change": 0.01, "cross_n_difference": 1e-9}


COMMANDS = {
    "terms": cmd_terms,
    "quantum": cmd_quantum,
    "bound": cmd_bound,
    "ns": cmd_ns,
    "verify": cmd_verify,
    "share": cmd_share,
    "asymptotics": cmd_asymptotics,
}


def _config(args) -> dict:
    cfg = {}
    for k, v in sorted(vars(args).items()):
        cfg[k] = str(v) if isinstance(v, Path) else v
    return cfg


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        out = COMMANDS[args.command](args)
    except (UsageError, core.ScenarioError, classical.EnumerationCapError, simplex.LpCapError,
            argparse.ArgumentTypeError, ValueError) as exc:
        print(f"svetlab {args.command}: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    result, passed, tolerances, *extra = out
    timing = {"seconds": time.perf_counter() - t0, **(extra[0] if extra else {})}
    report = {
        "schema": SCHEMA,
        "command": args.command,
        "config": _config(args),
        "tolerances": tolerances,
        "result": result,
        "passed": bool(passed),
        "timing": timing,
    }
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    if not passed:
        failed = result.get("failed") if isinstance(result, dict) else None
        print(f"svetlab {args.command}: check failed" + (f": {', '.join(failed)}" if failed else ""),
              file=sys.stderr)
    return 0 if passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
