"""One-step update maps for every algorithm and a run loop producing traces.

Every step takes ``(oracle, StepState, SolverSpec)`` and returns a new
``StepState``.  In ``alternating`` mode the follower rule sees the freshly
updated leader ``x_{t+1}``; in ``simultaneous`` mode it sees ``x_t``.
"""

from __future__ import annotations

import enum
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError, NumericalFailure, SingularityWarning
from .oracle import (
    CgBudget,
    MinimaxOracle,
    Point,
    total_grad_x,
    xx_total_newton_direction,
    yy_newton_direction,
)
from .linalg import LinearOperator, cg_normal_solve

__all__ = [
    "Algorithm",
    "Mode",
    "SolverSpec",
    "StepState",
    "StopRule",
    "TraceRow",
    "Trace",
    "step",
    "step_gda",
    "step_gda_k",
    "step_tgda",
    "step_fr",
    "step_gdn",
    "step_cn",
    "step_gdn_momentum",
    "step_tgd_newton",
    "step_cn_total",
    "step_evtushenko",
    "run",
    "DIVERGENCE_NORM",
]

DIVERGENCE_NORM = 1e12


class Algorithm(str, enum.Enum):
    GDA = "GDA"
    GDA_K = "GDA_K"
    TGDA = "TGDA"
    FR = "FR"
    GDN = "GDN"
    CN = "CN"
    GDN_MOMENTUM = "GDN_MOMENTUM"
    TGD_NEWTON = "TGD_NEWTON"
    CN_TOTAL = "CN_TOTAL"
    EVTUSHENKO_CN = "EVTUSHENKO_CN"


class Mode(str, enum.Enum):
    SIMULTANEOUS = "simultaneous"
    ALTERNATING = "alternating"


DEFAULT_MODE = {
    Algorithm.GDN: Mode.ALTERNATING,
    Algorithm.CN: Mode.ALTERNATING,
    Algorithm.GDA_K: Mode.ALTERNATING,
    Algorithm.GDN_MOMENTUM: Mode.ALTERNATING,
}

# algorithms whose leader takes a plain or total gradient step of size alpha_L
_NEEDS_ALPHA_L = {
    Algorithm.GDA, Algorithm.GDA_K, Algorithm.TGDA, Algorithm.FR,
    Algorithm.GDN, Algorithm.GDN_MOMENTUM, Algorithm.TGD_NEWTON,
}
_NEEDS_ALPHA_F = {Algorithm.GDA, Algorithm.GDA_K, Algorithm.TGDA, Algorithm.FR}


@dataclass(frozen=True)
class SolverSpec:
    """Algorithm choice plus every step size, damping and CG budget.

    ``mode=None`` resolves to the algorithm's default: alternating for GDN,
    CN, GDA-k and GDN with momentum, simultaneous for the rest.
    """

    algorithm: Algorithm
    mode: Optional[Mode] = None
    alpha_L: float = 0.0
    alpha_F: float = 0.0
    k: int = 1
    beta: float = 0.0
    gamma_x: float = 1.0
    gamma_y: float = 1.0
    lambda_x: float = 0.0
    lambda_y: float = 0.0
    budget: CgBudget = field(default_factory=CgBudget)

    def __post_init__(self):
        try:
            algo = Algorithm(self.algorithm)
        except ValueError:
            raise ArgumentError(f"unknown algorithm {self.algorithm!r}") from None
        object.__setattr__(self, "algorithm", algo)
        mode = DEFAULT_MODE.get(algo, Mode.SIMULTANEOUS) if self.mode is None else Mode(self.mode)
        object.__setattr__(self, "mode", mode)
        problems = []
        if self.alpha_L < 0 or self.alpha_F < 0:
            problems.append("step sizes must be >= 0")
        if algo in _NEEDS_ALPHA_L and not self.alpha_L > 0:
            problems.append(f"{algo.value} requires alpha_L > 0")
        if algo in _NEEDS_ALPHA_F and not self.alpha_F > 0:
            problems.append(f"{algo.value} requires alpha_F > 0")
        if algo is Algorithm.GDA_K and int(self.k) < 1:
            problems.append("GDA_K requires k >= 1")
        if not 0 <= self.beta < 1:
            problems.append("beta must lie in [0, 1)")
        for name in ("gamma_x", "gamma_y"):
            if not 0 < getattr(self, name) <= 1:
                problems.append(f"{name} must lie in (0, 1]")
        for name in ("lambda_x", "lambda_y"):
            if not getattr(self, name) >= 0:
                problems.append(f"{name} must be >= 0")
        if problems:
            raise ArgumentError("; ".join(problems))

    @property
    def alternating(self) -> bool:
        return self.mode is Mode.ALTERNATING


@dataclass(frozen=True)
class StepState:
    """Current iterate, the previous one (momentum history) and the CG
    iterations spent by the step that produced it."""

    z: Point
    z_prev: Optional[Point] = None
    cg_iters_x: int = 0
    cg_iters_y: int = 0

    def __post_init__(self):
        if self.z_prev is None:
            object.__setattr__(self, "z_prev", self.z)

    @classmethod
    def initial(cls, z: Point) -> "StepState":
        return cls(z, z)


def _checked(v, what, iteration=None):
    if not np.all(np.isfinite(v)):
        raise NumericalFailure(f"non-finite {what}", iteration=iteration)
    return v


def _gx(oracle, z):
    return _checked(oracle.grad_x(z), "leader gradient")


def _gy(oracle, z):
    return _checked(oracle.grad_y(z), "follower gradient")


def _follower_x(spec, x, x_new):
    return x_new if spec.alternating else x


def _newton_follower(oracle, spec, x_eval, y):
    d = yy_newton_direction(oracle, Point(x_eval, y), spec.budget, shift=spec.lambda_y)
    return y - spec.gamma_y * _checked(d.direction, "follower Newton direction"), d.cg.iterations


def _new_state(state, x, y, cx=0, cy=0):
    return StepState(Point(x, y), state.z, cx, cy)


def step_gda(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """``x' = x - a_L d_x f(x, y)``, ``y' = y + a_F d_y f(x~, y)``."""
    x, y = state.z.x, state.z.y
    x_new = x - spec.alpha_L * _gx(oracle, state.z)
    y_new = y + spec.alpha_F * _gy(oracle, Point(_follower_x(spec, x, x_new), y))
    return _new_state(state, x_new, y_new)


def step_gda_k(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """One leader descent step followed by ``k`` follower ascent steps."""
    x, y = state.z.x, state.z.y
    x_new = x - spec.alpha_L * _gx(oracle, state.z)
    xf = _follower_x(spec, x, x_new)
    for _ in range(int(spec.k)):
        y = y + spec.alpha_F * _gy(oracle, Point(xf, y))
    return _new_state(state, x_new, y)


def step_tgda(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """Leader descends the total gradient ``D_x f``; follower ascends."""
    x, y = state.z.x, state.z.y
    dx, res = total_grad_x(oracle, state.z, spec.budget, full_output=True)
    x_new = x - spec.alpha_L * _checked(dx, "total gradient")
    y_new = y + spec.alpha_F * _gy(oracle, Point(_follower_x(spec, x, x_new), y))
    return _new_state(state, x_new, y_new, 0, res.iterations)


def step_fr(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """Follow the ridge: ``y' = y + a_F d_y f + a_L d_yy^-1 d_yx d_x f``.

    The ridge correction is always evaluated at ``z_t``; the mode only
    changes where the follower gradient is taken.
    """
    z = state.z
    x, y = z.x, z.y
    gx = _gx(oracle, z)
    x_new = x - spec.alpha_L * gx
    op = LinearOperator.symmetric(oracle.m, lambda v: oracle.hvp_yy(z, v))
    res = cg_normal_solve(op, oracle.hvp_yx(z, gx), spec.budget.max_iter_y, spec.budget.tol)
    y_new = (
        y
        + spec.alpha_F * _gy(oracle, Point(_follower_x(spec, x, x_new), y))
        + spec.alpha_L * _checked(res.solution, "ridge correction")
    )
    return _new_state(state, x_new, y_new, 0, res.iterations)


def step_gdn(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """Leader gradient descent, follower (damped, regularized) Newton."""
    x, y = state.z.x, state.z.y
    x_new = x - spec.alpha_L * _gx(oracle, state.z)
    y_new, cy = _newton_follower(oracle, spec, _follower_x(spec, x, x_new), y)
    return _new_state(state, x_new, y_new, 0, cy)


def step_cn(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """Complete Newton: ``x' = x - g_x (D_xx + l_x I)^-1 d_x f`` then a follower Newton step."""
    x, y = state.z.x, state.z.y
    d = xx_total_newton_direction(oracle, state.z, spec.budget, reg=spec.lambda_x)
    x_new = x - spec.gamma_x * _checked(d.direction, "leader Newton direction")
    y_new, cy = _newton_follower(oracle, spec, _follower_x(spec, x, x_new), y)
    return _new_state(state, x_new, y_new, d.cg.iterations, cy)


def step_gdn_momentum(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """GDN with heavy-ball leader: ``x' = x - a d_x f + beta (x - x_prev)``."""
    x, y = state.z.x, state.z.y
    x_new = x - spec.alpha_L * _gx(oracle, state.z) + spec.beta * (x - state.z_prev.x)
    y_new, cy = _newton_follower(oracle, spec, _follower_x(spec, x, x_new), y)
    return _new_state(state, x_new, y_new, 0, cy)


def step_tgd_newton(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """Total gradient descent for the leader, Newton for the follower."""
    x, y = state.z.x, state.z.y
    dx, res = total_grad_x(oracle, state.z, spec.budget, full_output=True)
    x_new = x - spec.alpha_L * _checked(dx, "total gradient")
    y_new, cy = _newton_follower(oracle, spec, _follower_x(spec, x, x_new), y)
    return _new_state(state, x_new, y_new, 0, res.iterations + cy)


def step_cn_total(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """``x' = x - D_xx^-1 D_x f`` together with a follower Newton step."""
    x, y = state.z.x, state.z.y
    d = xx_total_newton_direction(oracle, state.z, spec.budget, reg=spec.lambda_x, total=True)
    x_new = x - spec.gamma_x * _checked(d.direction, "leader Newton direction")
    y_new, cy = _newton_follower(oracle, spec, _follower_x(spec, x, x_new), y)
    return _new_state(state, x_new, y_new, d.cg.iterations, cy)


def step_evtushenko(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """Leader as in CN-total; follower ``y' = y - d_yy^-1 (d_y f + d_yx (x' - x))``.

    The correction term linearly predicts the follower gradient at ``x'``.
    In alternating mode the gradient is evaluated at ``(x', y)`` directly and
    the correction is dropped, since it would count the leader move twice.
    """
    z = state.z
    x, y = z.x, z.y
    d = xx_total_newton_direction(oracle, z, spec.budget, reg=spec.lambda_x, total=True)
    x_new = x - spec.gamma_x * _checked(d.direction, "leader Newton direction")
    if spec.alternating:
        y_new, cy = _newton_follower(oracle, spec, x_new, y)
    else:
        rhs = _gy(oracle, z) + oracle.hvp_yx(z, x_new - x)
        if spec.lambda_y:
            def apply(v):
                return oracle.hvp_yy(z, v) - spec.lambda_y * v
        else:
            def apply(v):
                return oracle.hvp_yy(z, v)
        res = cg_normal_solve(LinearOperator.symmetric(oracle.m, apply), rhs,
                              spec.budget.max_iter_y, spec.budget.tol)
        y_new = y - spec.gamma_y * _checked(res.solution, "follower Newton direction")
        cy = res.iterations
    return _new_state(state, x_new, y_new, d.cg.iterations, cy)


STEP_FUNCTIONS: dict[Algorithm, Callable[[MinimaxOracle, StepState, SolverSpec], StepState]] = {
    Algorithm.GDA: step_gda,
    Algorithm.GDA_K: step_gda_k,
    Algorithm.TGDA: step_tgda,
    Algorithm.FR: step_fr,
    Algorithm.GDN: step_gdn,
    Algorithm.CN: step_cn,
    Algorithm.GDN_MOMENTUM: step_gdn_momentum,
    Algorithm.TGD_NEWTON: step_tgd_newton,
    Algorithm.CN_TOTAL: step_cn_total,
    Algorithm.EVTUSHENKO_CN: step_evtushenko,
}


def step(oracle: MinimaxOracle, state: StepState, spec: SolverSpec) -> StepState:
    """Dispatch on ``spec.algorithm``."""
    oracle.check_point(state.z)
    return STEP_FUNCTIONS[spec.algorithm](oracle, state, spec)


# ---------------------------------------------------------------------------
# run loop


@dataclass(frozen=True)
class StopRule:
    max_iter: int = 100
    grad_tol: Optional[float] = None
    dist_tol: Optional[float] = None
    known_solution: Optional[Point] = None

    def __post_init__(self):
        if int(self.max_iter) < 0:
            raise ArgumentError("max_iter must be >= 0")
        for name in ("grad_tol", "dist_tol"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ArgumentError(f"{name} must be >= 0")


@dataclass(frozen=True)
class TraceRow:
    iter: int
    wall_time: float
    f: float
    grad_x_norm: float
    grad_y_norm: float
    dist_x: Optional[float]
    dist_y: Optional[float]
    cg_iters_x: int
    cg_iters_y: int

    @property
    def dist(self) -> Optional[float]:
        if self.dist_x is None:
            return None
        return math.hypot(self.dist_x, self.dist_y)


@dataclass
class Trace:
    rows: list[TraceRow] = field(default_factory=list)
    termination_reason: str = "max_iter"
    message: str = ""
    final_state: Optional[StepState] = None
    points: list[Point] = field(default_factory=list)

    @property
    def distances(self) -> list[Optional[float]]:
        return [r.dist for r in self.rows]

    @property
    def converged(self) -> bool:
        return self.termination_reason in ("grad_tol", "dist_tol")

    def __len__(self):
        return len(self.rows)


def _record(oracle, state, it, t0, known) -> TraceRow:
    z = state.z
    if known is not None:
        dx = float(np.linalg.norm(z.x - known.x))
        dy = float(np.linalg.norm(z.y - known.y))
    else:
        dx = dy = None
    return TraceRow(
        it,
        time.perf_counter() - t0,
        float(oracle.value(z)),
        float(np.linalg.norm(oracle.grad_x(z))),
        float(np.linalg.norm(oracle.grad_y(z))),
        dx,
        dy,
        state.cg_iters_x,
        state.cg_iters_y,
    )


def _satisfied(row: TraceRow, stop: StopRule, dist_floor: float) -> Optional[str]:
    if stop.grad_tol is not None and row.grad_x_norm <= stop.grad_tol and row.grad_y_norm <= stop.grad_tol:
        return "grad_tol"
    if stop.dist_tol is not None and row.dist is not None and row.dist <= max(stop.dist_tol, dist_floor):
        return "dist_tol"
    return None


def run(
    oracle: MinimaxOracle,
    spec: SolverSpec,
    z0: Point,
    stop: StopRule = StopRule(),
    record_points: bool = False,
) -> Trace:
    """Iterate the selected step from ``z0``.

    A row is recorded for ``z0`` and after every step; the loop stops at the
    first satisfied criterion.  Numerical failures (including the divergence
    guard ``||z|| > 1e12``) end the run with reason ``numerical_failure`` and
    the partial trace.  Distances use ``stop.known_solution`` or else the
    oracle's own known solution; problems with sampling noise may declare a
    ``distance_floor`` below which ``dist_tol`` is not enforced.
    """
    z0 = oracle.check_point(z0)
    known = stop.known_solution if stop.known_solution is not None else oracle.known_solution()
    floor = float(getattr(oracle, "distance_floor", 0.0))
    trace = Trace()
    state = StepState.initial(z0)
    t0 = time.perf_counter()

    def record(it):
        row = _record(oracle, state, it, t0, known)
        trace.rows.append(row)
        if record_points:
            trace.points.append(state.z)
        return _satisfied(row, stop, floor)

    reason = record(0)
    it = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularityWarning)
        while reason is None and it < int(stop.max_iter):
            it += 1
            try:
                new_state = step(oracle, state, spec)
            except NumericalFailure as exc:
                trace.termination_reason = "numerical_failure"
                trace.message = f"iteration {it}: {exc}"
                trace.final_state = state
                return trace
            nz = new_state.z.norm()
            if not math.isfinite(nz):
                trace.termination_reason = "numerical_failure"
                trace.message = f"iteration {it}: non-finite iterate"
                trace.final_state = state
                return trace
            state = new_state
            reason = record(it)
            if nz > DIVERGENCE_NORM:
                trace.termination_reason = "numerical_failure"
                trace.message = f"iteration {it}: divergence guard, ||z|| = {nz:.3e}"
                trace.final_state = state
                return trace
    trace.termination_reason = reason or "max_iter"
    trace.final_state = state
    return trace


def with_mode(spec: SolverSpec, mode) -> SolverSpec:
    return replace(spec, mode=Mode(mode))
