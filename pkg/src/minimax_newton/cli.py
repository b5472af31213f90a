"""Command line interface.

Exit codes: 0 converged (grad_tol or dist_tol), 1 stopped at max_iter,
2 numerical failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import classify_point, refine_stationary_point, theoretical_rates
from .errors import ConfigError, MinimaxError
from .harness.config import load_config
from .harness.runner import OUT_DIR_ENV, compare_algorithms, exit_code_for, run_experiment
from .oracle import Point, check_derivatives
from .problems import PROBLEMS, make_problem, make_rng

EXIT_CONFIG = 3
EXIT_FAILURE = 2


def _clean(o):
    # JSON has no inf/nan
    if isinstance(o, float):
        return o if math.isfinite(o) else str(o)
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def _print_json(obj):
    print(json.dumps(_clean(obj), indent=2, sort_keys=True))


def _problem(args):
    try:
        params = json.loads(args.params) if args.params else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--params is not valid JSON: {exc}") from None
    return make_problem(args.problem, params, args.seed)


def _parse_point(text, oracle):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--point must be comma-separated numbers, got {text!r}") from None
    if len(vals) != oracle.n + oracle.m:
        raise ConfigError(f"--point needs {oracle.n + oracle.m} values (n={oracle.n}, m={oracle.m}), got {len(vals)}")
    return Point.from_vector(np.array(vals), oracle.n)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    res = run_experiment(cfg, out_dir=args.out_dir)
    _print_json({
        "termination_reason": res.trace.termination_reason,
        "message": res.trace.message,
        "iterations": res.trace.rows[-1].iter,
        "trace": str(res.trace_path),
        "report": str(res.report_path),
        "rates": res.report["rates"],
    })
    return res.exit_code


def cmd_compare(args) -> int:
    configs = [load_config(p) for p in args.configs]
    out = Path(args.out)
    if not out.is_absolute():
        out = Path(args.out_dir or os.environ.get(OUT_DIR_ENV, ".")) / out
    res = compare_algorithms(configs, out)
    _print_json({"csv": str(res.csv_path), "runs": res.summary})
    return max(exit_code_for(r["termination_reason"]) for r in res.summary)


def cmd_classify(args) -> int:
    oracle = _problem(args)
    z = _parse_point(args.point, oracle)
    _print_json(classify_point(oracle, z, args.grad_tol, args.eig_tol).to_dict())
    return 0


def cmd_rates(args) -> int:
    oracle = _problem(args)
    if args.point:
        z = _parse_point(args.point, oracle)
    else:
        z = oracle.known_solution()
        if z is None:
            raise ConfigError(f"problem {args.problem!r} has no known solution; pass --point")
    z = refine_stationary_point(oracle, z)
    _print_json(theoretical_rates(oracle, z, args.alpha_l, args.alpha_f).to_dict())
    return 0


def cmd_check_derivatives(args) -> int:
    oracle = _problem(args)
    rng = make_rng(args.seed)
    reports = []
    worst = 0.0
    for i in range(args.points):
        z = Point(rng.standard_normal(oracle.n), rng.standard_normal(oracle.m))
        rep = check_derivatives(oracle, z, args.h, seed=args.seed + i)
        worst = max(worst, rep.max_error)
        reports.append(rep.errors)
    _print_json({"problem": args.problem, "h": args.h, "max_error": worst, "points": reports,
                 "passed": worst < args.threshold})
    return 0 if worst < args.threshold else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minimax-newton", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_DIR_ENV} or .)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run several configs on one problem and align traces")
    c.add_argument("--configs", nargs="+", required=True)
    c.add_argument("--out", default="compare.csv")
    c.add_argument("--out-dir", default=None)
    c.set_defaults(func=cmd_compare)

    def problem_args(sp):
        sp.add_argument("--problem", required=True, choices=sorted(PROBLEMS))
        sp.add_argument("--params", default=None, help="problem parameters as JSON")
        sp.add_argument("--seed", type=int, default=0)

    k = sub.add_parser("classify", help="classify a point (stationary / SLmM / strict Nash)")
    problem_args(k)
    k.add_argument("--point", required=True, help="comma-separated x then y")
    k.add_argument("--grad-tol", type=float, default=1e-8)
    k.add_argument("--eig-tol", type=float, default=1e-8)
    k.set_defaults(func=cmd_classify)

    t = sub.add_parser("rates", help="theoretical rates at the known (or given) solution")
    problem_args(t)
    t.add_argument("--alpha-l", type=float, required=True)
    t.add_argument("--alpha-f", type=float, required=True)
    t.add_argument("--point", default=None)
    t.set_defaults(func=cmd_rates)

    d = sub.add_parser("check-derivatives", help="finite-difference check of a problem's oracle")
    problem_args(d)
    d.add_argument("--points", type=int, default=5)
    d.add_argument("--h", type=float, default=1e-5)
    d.add_argument("--threshold", type=float, default=1e-5)
    d.set_defaults(func=cmd_check_derivatives)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {str(exc).splitlines()[0]}", file=sys.stderr)
        for prob in exc.problems:
            print(f"  {prob}", file=sys.stderr)
        return EXIT_CONFIG
    except MinimaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
