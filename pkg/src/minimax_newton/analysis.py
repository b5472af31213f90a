"""Fixed-point and spectral analysis of the update maps.

Jacobians are central finite differences of the real step implementations,
so every rate computed here also checks the solver code itself.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import AnalysisError, ArgumentError, PreconditionError, SingularityError
from .linalg import dense_solve, eig_general, eig_symmetric, spectral_radius
from .oracle import CgBudget, MinimaxOracle, Point, hessian_blocks
from .problems import QuadraticMinimax
from .solvers import Algorithm, SolverSpec, StepState, Trace, step

__all__ = [
    "PointClassification",
    "SpectralReport",
    "TransposeReport",
    "RateEstimate",
    "classify_point",
    "step_map",
    "step_jacobian_fd",
    "asymptotic_rate",
    "theoretical_rates",
    "theoretical_rates_from_blocks",
    "verify_transpose_relation",
    "empirical_rate",
    "refine_stationary_point",
    "schur_complement",
]

FIXED_POINT_TOL = 1e-8


def _sym(M):
    return 0.5 * (M + M.T)


def schur_complement(xx, xy, yx, yy) -> np.ndarray:
    """``xx - xy yy^-1 yx`` by a dense solve; raises on singular ``yy``."""
    return _sym(xx - xy @ dense_solve(yy, yx, name="yy"))


@dataclass(frozen=True)
class PointClassification:
    grad_norms: tuple[float, float]
    yy_max_eig: float
    dxx_min_eig: float
    xx_min_eig: float
    eig_xx: list[float]
    eig_yy: list[float]
    eig_dxx: list[float]
    is_stationary: bool
    is_slmm: bool
    is_strict_local_nash: bool
    grad_tol: float
    eig_tol: float

    def to_dict(self) -> dict:
        return asdict(self)


def classify_point(
    oracle: MinimaxOracle, z: Point, grad_tol: float = 1e-8, eig_tol: float = 1e-8
) -> PointClassification:
    """Stationarity, strict local minimax and strict local Nash tests at ``z``.

    SLmM needs ``d_yy < 0`` and ``D_xx > 0``; strict local Nash needs
    ``d_yy < 0`` and ``d_xx > 0``, each with margin ``eig_tol``.
    """
    if not (grad_tol > 0 and eig_tol > 0):
        raise ArgumentError("tolerances must be > 0")
    z = oracle.check_point(z)
    gx = float(np.linalg.norm(oracle.grad_x(z)))
    gy = float(np.linalg.norm(oracle.grad_y(z)))
    hb = hessian_blocks(oracle, z)
    eig_xx = eig_symmetric(_sym(hb.xx))
    eig_yy = eig_symmetric(_sym(hb.yy))
    try:
        eig_dxx = eig_symmetric(schur_complement(hb.xx, hb.xy, hb.yx, hb.yy))
    except SingularityError:
        eig_dxx = np.full(oracle.n, np.nan)
    stationary = gx <= grad_tol and gy <= grad_tol
    yy_neg = bool(eig_yy[-1] <= -eig_tol)
    slmm = stationary and yy_neg and bool(eig_dxx[0] >= eig_tol)
    nash = stationary and yy_neg and bool(eig_xx[0] >= eig_tol)
    return PointClassification(
        (gx, gy),
        float(eig_yy[-1]),
        float(eig_dxx[0]),
        float(eig_xx[0]),
        eig_xx.tolist(),
        eig_yy.tolist(),
        eig_dxx.tolist(),
        stationary,
        slmm,
        nash,
        grad_tol,
        eig_tol,
    )


# ---------------------------------------------------------------------------
# step maps and Jacobians

StepLike = Union[SolverSpec, Callable[[np.ndarray], np.ndarray]]


def step_map(oracle: MinimaxOracle, spec: SolverSpec) -> tuple[Callable[[np.ndarray], np.ndarray], int]:
    """The update as a map on flat state vectors.

    The state is ``(x, y)``, or ``(x, y, x_prev)`` for momentum, whose
    update also depends on the previous leader iterate.
    """
    n, m = oracle.n, oracle.m
    if spec.algorithm is Algorithm.GDN_MOMENTUM:
        def T(v):
            z = Point(v[:n], v[n : n + m])
            prev = Point(v[n + m :], v[n : n + m])
            s = step(oracle, StepState(z, prev), spec)
            return np.concatenate([s.z.x, s.z.y, z.x])
        return T, 2 * n + m

    def T(v):
        s = step(oracle, StepState.initial(Point(v[:n], v[n:])), spec)
        return s.z.vector
    return T, n + m


def _state_vector(oracle, spec, z: Point) -> np.ndarray:
    if isinstance(spec, SolverSpec) and spec.algorithm is Algorithm.GDN_MOMENTUM:
        return np.concatenate([z.x, z.y, z.x])
    return z.vector


def default_fd_step(oracle: MinimaxOracle) -> float:
    return 1e-6 if isinstance(oracle, QuadraticMinimax) else 1e-5


def _as_map(step_like: StepLike, oracle):
    if isinstance(step_like, SolverSpec):
        return step_map(oracle, step_like)[0]
    return step_like


def step_jacobian_fd(
    step_like: StepLike,
    oracle: MinimaxOracle,
    z: Point,
    h: Optional[float] = None,
    extrapolate: bool = False,
) -> np.ndarray:
    """Central-difference Jacobian of the one-step map at ``z``.

    ``step_like`` is a :class:`SolverSpec` or any callable on flat state
    vectors.  For momentum the Jacobian is taken on ``(x, y, x_prev)`` with
    ``x_prev = x``.  With ``extrapolate`` the columns are Richardson
    combinations ``(4 D(h/2) - D(h)) / 3`` whose truncation error is
    ``O(h^4)``; this matters for nilpotent Jacobians, whose eigenvalues
    react to an entry error ``e`` like ``sqrt(e)``.
    """
    h = default_fd_step(oracle) if h is None else h
    if not h > 0:
        raise ArgumentError("h must be > 0")
    T = _as_map(step_like, oracle)
    v0 = _state_vector(oracle, step_like, z)
    d = v0.size

    def central(hh):
        cols = []
        for j in range(d):
            e = np.zeros(d)
            e[j] = hh
            cols.append((np.asarray(T(v0 + e)) - np.asarray(T(v0 - e))) / (2 * hh))
        return np.column_stack(cols)

    J = (4.0 * central(h / 2) - central(h)) / 3.0 if extrapolate else central(h)
    if not np.all(np.isfinite(J)):
        raise AnalysisError("non-finite Jacobian entries")
    return J


def fixed_point_residual(step_like: StepLike, oracle: MinimaxOracle, z: Point) -> float:
    T = _as_map(step_like, oracle)
    v0 = _state_vector(oracle, step_like, z)
    return float(np.linalg.norm(np.asarray(T(v0)) - v0))


def asymptotic_rate(
    step_like: StepLike,
    oracle: MinimaxOracle,
    z_star: Point,
    h: Optional[float] = None,
    extrapolate: bool = False,
) -> float:
    """Spectral radius of the FD Jacobian at a fixed point of the step."""
    res = fixed_point_residual(step_like, oracle, z_star)
    if not res <= FIXED_POINT_TOL:
        raise PreconditionError(f"z_star is not a fixed point of the step (displacement {res:.3e})")
    return spectral_radius(step_jacobian_fd(step_like, oracle, z_star, h, extrapolate))


# ---------------------------------------------------------------------------
# theoretical rates


@dataclass
class SpectralReport:
    """Eigenvalues at a SLmM and the rate formulas they imply.

    ``lambda_1 >= lambda_n`` are extreme eigenvalues of ``D_xx`` and
    ``mu_1 >= mu_m`` those of ``-d_yy``.
    """

    eig_xx: list[float]
    eig_yy: list[float]
    eig_dxx: list[float]
    alpha_L: float
    alpha_F: float
    lambda_1: float
    lambda_n: float
    mu_1: float
    mu_m: float
    kappa_L: float
    kappa_F: float
    rho_L: float
    rho_F: float
    alpha_L_opt: float
    rho_L_opt: float
    gda_inf_alpha_bound: float
    gda_inf_rate: Optional[float]
    momentum_alpha: float
    momentum_beta: float
    momentum_rate: float
    jacobian_spectral_radius: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def theoretical_rates_from_blocks(xx, xy, yx, yy, alpha_L: float, alpha_F: float) -> SpectralReport:
    xx, xy, yx, yy = (np.asarray(a, dtype=float) for a in (xx, xy, yx, yy))
    eig_xx = eig_symmetric(_sym(xx))
    eig_yy = eig_symmetric(_sym(yy))
    eig_dxx = eig_symmetric(schur_complement(xx, xy, yx, yy))
    lam1, lamn = float(eig_dxx[-1]), float(eig_dxx[0])
    mu = np.sort(-eig_yy)
    mu1, mum = float(mu[-1]), float(mu[0])
    kL = lam1 / lamn if lamn > 0 else math.inf
    kF = mu1 / mum if mum > 0 else math.inf
    rho_L = max(abs(1 - alpha_L * lam1), abs(1 - alpha_L * lamn))
    rho_F = max(abs(1 - alpha_F * mu1), abs(1 - alpha_F * mum))
    a_opt = 2.0 / (lam1 + lamn)
    rho_opt = (kL - 1) / (kL + 1) if math.isfinite(kL) else 1.0
    bound = 2.0 / mu1 if mu1 > 0 else math.inf
    inf_rate = 1.0 - 2.0 * lamn / mu1 if mu1 >= lam1 + lamn else None
    sk = math.sqrt(kL) if math.isfinite(kL) else math.inf
    m_alpha = 4.0 / (math.sqrt(lam1) + math.sqrt(lamn)) ** 2 if lamn > 0 else math.nan
    m_beta = ((sk - 1) / (sk + 1)) ** 2 if math.isfinite(sk) else 1.0
    m_rate = 1.0 - 2.0 / (sk + 1) if math.isfinite(sk) else 1.0
    return SpectralReport(
        eig_xx.tolist(), eig_yy.tolist(), eig_dxx.tolist(), alpha_L, alpha_F,
        lam1, lamn, mu1, mum, kL, kF, rho_L, rho_F, a_opt, rho_opt,
        bound, inf_rate, m_alpha, m_beta, m_rate,
    )


def theoretical_rates(
    oracle: MinimaxOracle,
    z_star: Point,
    alpha_L: float,
    alpha_F: float,
    grad_tol: float = 1e-8,
    specs: Sequence[SolverSpec] = (),
    h: Optional[float] = None,
) -> SpectralReport:
    """Rate formulas at a stationary point, optionally with measured FD
    spectral radii for each spec in ``specs``."""
    z_star = oracle.check_point(z_star)
    g = max(float(np.linalg.norm(oracle.grad_x(z_star))), float(np.linalg.norm(oracle.grad_y(z_star))))
    if not g <= grad_tol:
        raise PreconditionError(f"z_star is not stationary (gradient norm {g:.3e})")
    hb = hessian_blocks(oracle, z_star)
    report = theoretical_rates_from_blocks(hb.xx, hb.xy, hb.yx, hb.yy, alpha_L, alpha_F)
    for spec in specs:
        report.jacobian_spectral_radius[spec.algorithm.value] = asymptotic_rate(spec, oracle, z_star, h)
    return report


@dataclass(frozen=True)
class TransposeReport:
    moduli_tgda: list[float]
    moduli_fr: list[float]
    dense_discrepancy: float
    fd_moduli_tgda: list[float]
    fd_moduli_fr: list[float]
    fd_discrepancy: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.dense_discrepancy <= self.tol and self.fd_discrepancy <= self.tol


def _moduli(M):
    return np.sort(np.abs(eig_general(M)))


def preconditioner(hb, alpha_L, alpha_F) -> np.ndarray:
    """``P = [[-a_L I, a_L d_xy d_yy^-1], [0, a_F I]]``."""
    n, m = hb.xx.shape[0], hb.yy.shape[0]
    top = np.hstack([-alpha_L * np.eye(n), alpha_L * dense_solve(hb.yy, hb.xy.T, name="yy").T])
    bottom = np.hstack([np.zeros((m, n)), alpha_F * np.eye(m)])
    return np.vstack([top, bottom])


def verify_transpose_relation(
    oracle: MinimaxOracle,
    z_star: Point,
    alpha_L: float,
    alpha_F: float,
    budget: CgBudget = CgBudget(),
    h: Optional[float] = None,
    tol: float = 1e-7,
) -> TransposeReport:
    """Check that ``I + P H`` (TGDA) and ``I + P' H`` (FR) share eigenvalue moduli,
    both densely and against the FD Jacobians of the actual steps."""
    z_star = oracle.check_point(z_star)
    g = max(float(np.linalg.norm(oracle.grad_x(z_star))), float(np.linalg.norm(oracle.grad_y(z_star))))
    if not g <= 1e-8:
        raise PreconditionError(f"z_star is not stationary (gradient norm {g:.3e})")
    hb = hessian_blocks(oracle, z_star)
    H = hb.full
    P = preconditioner(hb, alpha_L, alpha_F)
    I = np.eye(H.shape[0])
    mt, mf = _moduli(I + P @ H), _moduli(I + P.T @ H)
    tg = SolverSpec(Algorithm.TGDA, alpha_L=alpha_L, alpha_F=alpha_F, budget=budget)
    fr = SolverSpec(Algorithm.FR, alpha_L=alpha_L, alpha_F=alpha_F, budget=budget)
    ft = _moduli(step_jacobian_fd(tg, oracle, z_star, h))
    ff = _moduli(step_jacobian_fd(fr, oracle, z_star, h))
    fd_disc = max(float(np.max(np.abs(ft - mt))), float(np.max(np.abs(ff - mf))), float(np.max(np.abs(ft - ff))))
    return TransposeReport(
        mt.tolist(), mf.tolist(), float(np.max(np.abs(mt - mf))), ft.tolist(), ff.tolist(), fd_disc, tol
    )


# ---------------------------------------------------------------------------
# empirical rates


@dataclass(frozen=True)
class RateEstimate:
    linear_rate: float
    order_estimate: float
    used: int


def empirical_rate(
    source: Union[Trace, Sequence[float]],
    burn_in: int = 0,
    stride: int = 1,
    floor: float = 1e-14,
) -> RateEstimate:
    """Linear rate and convergence order from distances to the solution.

    ``linear_rate`` is the geometric mean of successive distance ratios
    after ``burn_in``, expressed per iteration.  ``order_estimate`` is the
    median of ``log(e[t+1]/e[t]) / log(e[t]/e[t-1])``.  With ``stride > 1``
    both use every ``stride``-th distance, which exposes the order of
    methods whose error only drops every few steps.  The sequence is cut at
    the first distance below ``floor``.
    """
    if isinstance(source, Trace):
        dists = source.distances
        if any(d is None for d in dists):
            raise AnalysisError("trace has no distances; the problem has no known solution")
    else:
        dists = list(source)
    if burn_in < 0 or stride < 1:
        raise ArgumentError("burn_in must be >= 0 and stride >= 1")
    tail = [float(d) for d in dists[burn_in:]]
    usable = []
    for d in tail[::stride]:
        if not (math.isfinite(d) and d >= floor):
            break
        usable.append(d)
    if len(usable) < 3:
        raise AnalysisError(f"only {len(usable)} usable distances after burn-in; need at least 3")
    e = np.asarray(usable)
    if np.any(e <= 0):
        raise AnalysisError("distances must be positive")
    steps = (len(e) - 1) * stride
    linear = float(np.exp((math.log(e[-1]) - math.log(e[0])) / steps))
    orders = []
    for t in range(1, len(e) - 1):
        den = math.log(e[t] / e[t - 1])
        if den != 0.0:
            orders.append(math.log(e[t + 1] / e[t]) / den)
    order = float(np.median(orders)) if orders else math.nan
    return RateEstimate(linear, order, len(e))


def refine_stationary_point(
    oracle: MinimaxOracle, z0: Point, tol: float = 1e-12, max_iter: int = 50
) -> Point:
    """Full Newton on ``grad f = 0`` with the densely assembled Hessian."""
    z = oracle.check_point(z0)
    n = oracle.n
    for _ in range(max_iter + 1):
        g = np.concatenate([oracle.grad_x(z), oracle.grad_y(z)])
        if float(np.linalg.norm(g)) <= tol:
            return z
        H = hessian_blocks(oracle, z).full
        z = Point.from_vector(z.vector - dense_solve(H, g, name="H"), n)
    raise AnalysisError(f"Newton refinement did not reach gradient norm {tol:g} in {max_iter} steps")
