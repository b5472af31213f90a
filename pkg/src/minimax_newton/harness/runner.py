"""Run configured experiments and write traces, rate reports and comparisons."""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..analysis import asymptotic_rate, empirical_rate, refine_stationary_point, theoretical_rates
from ..errors import AnalysisError, ConfigError, MinimaxError
from ..oracle import MinimaxOracle, Point
from ..problems import make_problem, make_rng
from ..solvers import Algorithm, SolverSpec, StopRule, Trace, run
from .config import ExperimentConfig, dump_config

__all__ = [
    "TRACE_HEADER",
    "OUT_DIR_ENV",
    "ExperimentResult",
    "ComparisonResult",
    "initial_point",
    "run_experiment",
    "compare_algorithms",
    "exit_code_for",
    "write_trace_csv",
]

TRACE_HEADER = "iter,wall_time_s,f,grad_x_norm,grad_y_norm,dist_x,dist_y,cg_iters_x,cg_iters_y"
OUT_DIR_ENV = "MINIMAX_NEWTON_OUT_DIR"

EXIT_CODES = {"grad_tol": 0, "dist_tol": 0, "max_iter": 1, "numerical_failure": 2}

# Newton-type leaders; their linear rate is zero
_SUPERLINEAR = {Algorithm.CN, Algorithm.CN_TOTAL, Algorithm.EVTUSHENKO_CN}


def exit_code_for(reason: str) -> int:
    return EXIT_CODES.get(reason, 2)


def _fmt(v, precision: Optional[int]) -> str:
    if v is None:
        return ""
    v = float(v)
    return repr(v) if precision is None else format(v, f".{precision}g")


def write_trace_csv(trace: Trace, path: Union[str, Path, None] = None, precision=None, wall_time=False) -> str:
    """Serialize a trace (UTF-8, LF endings); returns the CSV text."""
    buf = io.StringIO()
    buf.write(TRACE_HEADER + "\n")
    for r in trace.rows:
        cells = [
            str(r.iter),
            _fmt(r.wall_time, precision) if wall_time else "",
            _fmt(r.f, precision),
            _fmt(r.grad_x_norm, precision),
            _fmt(r.grad_y_norm, precision),
            _fmt(r.dist_x, precision),
            _fmt(r.dist_y, precision),
            str(r.cg_iters_x),
            str(r.cg_iters_y),
        ]
        buf.write(",".join(cells) + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def initial_point(config: ExperimentConfig, oracle: MinimaxOracle) -> Point:
    init = config.init
    n, m = oracle.n, oracle.m
    if init.mode == "seeded_gaussian":
        rng = make_rng(init.seed)
        return Point(init.stddev * rng.standard_normal(n), init.stddev * rng.standard_normal(m))
    x0 = np.zeros(n) if init.x0 is None else np.asarray(init.x0, dtype=float)
    y0 = np.zeros(m) if init.y0 is None else np.asarray(init.y0, dtype=float)
    bad = []
    if x0.shape != (n,):
        bad.append(f"init.x0: expected {n} entries, got {x0.size}")
    if y0.shape != (m,):
        bad.append(f"init.y0: expected {m} entries, got {y0.size}")
    if bad:
        raise ConfigError("initial point does not match problem dimensions", bad)
    return Point(x0, y0)


def _theoretical_linear_rate(spec: SolverSpec, report, fd_rate: float) -> tuple[float, str]:
    """The rate the theory predicts for ``spec`` and where it comes from."""
    a = spec.algorithm
    if a in _SUPERLINEAR:
        return 0.0, "superlinear"
    if a in (Algorithm.GDN, Algorithm.TGD_NEWTON) or (a is Algorithm.GDA_K and spec.k > 1):
        return report.rho_L, "rho_L"
    if a in (Algorithm.TGDA, Algorithm.FR):
        return max(report.rho_L, report.rho_F), "max(rho_L, rho_F)"
    if (
        a is Algorithm.GDN_MOMENTUM
        and math.isclose(spec.alpha_L, report.momentum_alpha, rel_tol=1e-9)
        and math.isclose(spec.beta, report.momentum_beta, rel_tol=1e-9)
    ):
        return report.momentum_rate, "momentum"
    return fd_rate, "jacobian_spectral_radius"


def rate_report(
    oracle: MinimaxOracle, spec: SolverSpec, trace: Trace, burn_in: int, tolerance: float
) -> dict:
    """Compare the measured rate of a run with the theory at the reference point.

    The reference is the oracle's known solution, refined by Newton on
    ``grad f = 0`` when sampling noise moves the stationary point.
    """
    known = oracle.known_solution()
    row = {"algorithm": spec.algorithm.value, "mode": spec.mode.value}
    if known is None:
        return {**row, "status": "N/A", "reason": "no known solution"}
    try:
        ref = refine_stationary_point(oracle, known)
        rep = theoretical_rates(oracle, ref, spec.alpha_L, spec.alpha_F)
        fd = asymptotic_rate(spec, oracle, ref, extrapolate=spec.algorithm in _SUPERLINEAR)
    except MinimaxError as exc:
        return {**row, "status": "N/A", "reason": f"theory unavailable: {exc}"}
    theo, source = _theoretical_linear_rate(spec, rep, fd)
    row.update(theoretical=theo, theory_source=source, jacobian_spectral_radius=fd)
    dists = [float(np.linalg.norm(p.vector - ref.vector)) for p in trace.points]
    try:
        est = empirical_rate(dists, burn_in=burn_in)
    except AnalysisError as exc:
        return {**row, "status": "N/A", "reason": str(exc)}
    row.update(empirical=est.linear_rate, order_estimate=est.order_estimate)
    if source == "superlinear":
        ok = est.linear_rate < 0.1
        row["criterion"] = "empirical linear rate < 0.1"
    else:
        rel = abs(est.linear_rate - theo) / theo if theo > 0 else math.inf
        ok = rel <= tolerance
        row["relative_error"] = rel
        row["criterion"] = f"relative error <= {tolerance:g}"
    row["status"] = "PASS" if ok else "FAIL"
    return row


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trace: Trace
    trace_path: Optional[Path]
    report_path: Optional[Path]
    report: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return exit_code_for(self.trace.termination_reason)


def _resolve(path: str, out_dir: Optional[Union[str, Path]]) -> Path:
    p = Path(path)
    if p.is_absolute():
        return p
    base = out_dir if out_dir is not None else os.environ.get(OUT_DIR_ENV, ".")
    return Path(base) / p


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def run_experiment(
    config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None, write: bool = True
) -> ExperimentResult:
    """Build the problem and solver, run, then write the trace CSV and the JSON report.

    Relative output paths resolve against ``out_dir``, else the
    ``MINIMAX_NEWTON_OUT_DIR`` environment variable, else the working
    directory.  Numerical failures still write the partial trace.
    """
    oracle = make_problem(config.problem.name, config.problem.params, config.problem.seed)
    spec = config.solver.to_spec()
    z0 = initial_point(config, oracle)
    stop = StopRule(config.run.max_iter, config.run.grad_tol, config.run.dist_tol)
    trace = run(oracle, spec, z0, stop, record_points=True)
    out = config.output
    report = {
        "schema_version": config.schema_version,
        "name": config.name,
        "problem": config.problem.name,
        "algorithm": spec.algorithm.value,
        "mode": spec.mode.value,
        "termination_reason": trace.termination_reason,
        "message": trace.message,
        "iterations": trace.rows[-1].iter,
        "exit_code": exit_code_for(trace.termination_reason),
        "final": {
            "x": trace.final_state.z.x.tolist(),
            "y": trace.final_state.z.y.tolist(),
            "grad_x_norm": trace.rows[-1].grad_x_norm,
            "grad_y_norm": trace.rows[-1].grad_y_norm,
        },
        "rates": [rate_report(oracle, spec, trace, out.rate_burn_in, out.rate_tolerance)],
        "config": json.loads(dump_config(config)),
    }
    trace_path = report_path = None
    if write:
        trace_path = _resolve(out.trace_path, out_dir)
        report_path = _resolve(out.report_path, out_dir)
        write_trace_csv(trace, trace_path, out.float_precision, out.record_wall_time)
        report_path.parent.mkdir(parents=True, exist_ok=True)
        with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n")
    return ExperimentResult(config, trace, trace_path, report_path, report)


@dataclass
class ComparisonResult:
    labels: list[str]
    results: list[ExperimentResult]
    csv_text: str
    summary: list[dict]
    csv_path: Optional[Path] = None


COMPARE_FIELDS = ("f", "grad_x_norm", "grad_y_norm", "dist")


def compare_algorithms(
    configs: Sequence[ExperimentConfig],
    out_path: Optional[Union[str, Path]] = None,
    precision: Optional[int] = None,
) -> ComparisonResult:
    """Run several configs on one problem and align their traces by iteration.

    The CSV has an ``iter`` column and, per run, ``<label>.f``,
    ``<label>.grad_x_norm``, ``<label>.grad_y_norm`` and ``<label>.dist``;
    cells past the end of a shorter run are empty.
    """
    if not configs:
        raise ConfigError("compare needs at least one config", ["configs: empty"])
    ref = configs[0]
    bad = []
    for i, c in enumerate(configs[1:], start=1):
        if c.problem != ref.problem:
            bad.append(f"configs[{i}].problem differs from configs[0].problem")
        if c.init != ref.init:
            bad.append(f"configs[{i}].init differs from configs[0].init")
    if bad:
        raise ConfigError("compared configs must share problem and init", bad)

    results = [run_experiment(c, write=False) for c in configs]
    labels = []
    for c, r in zip(configs, results):
        base = c.name or r.report["algorithm"]
        label, j = base, 2
        while label in labels:
            label, j = f"{base}#{j}", j + 1
        labels.append(label)

    length = max(len(r.trace.rows) for r in results)
    buf = io.StringIO()
    buf.write(",".join(["iter"] + [f"{l}.{f}" for l in labels for f in COMPARE_FIELDS]) + "\n")
    for i in range(length):
        cells = [str(i)]
        for r in results:
            if i < len(r.trace.rows):
                row = r.trace.rows[i]
                vals = (row.f, row.grad_x_norm, row.grad_y_norm, row.dist)
                cells += [_fmt(v, precision) for v in vals]
            else:
                cells += [""] * len(COMPARE_FIELDS)
        buf.write(",".join(cells) + "\n")
    text = buf.getvalue()

    summary = []
    for label, r in zip(labels, results):
        summary.append({
            "label": label,
            "algorithm": r.report["algorithm"],
            "termination_reason": r.trace.termination_reason,
            "iterations": r.trace.rows[-1].iter,
            "final_grad_x_norm": r.trace.rows[-1].grad_x_norm,
            "final_grad_y_norm": r.trace.rows[-1].grad_y_norm,
            "final_dist": r.trace.rows[-1].dist,
        })
    path = None
    if out_path is not None:
        path = Path(out_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return ComparisonResult(labels, results, text, summary, path)
