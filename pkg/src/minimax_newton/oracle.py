"""Problem interface and the derivative machinery built on it.

Solvers never see a Hessian matrix.  They ask an oracle for gradients and
Hessian-vector products and combine them with matrix-free CG solves:

* ``total_grad_x``            ``D_x f = d_x f - d_xy d_yy^-1 d_y f``
* ``total_hvp_xx``            ``D_xx f v = d_xx v - d_xy d_yy^-1 d_yx v``
* ``yy_newton_direction``     ``(d_yy - shift I)^-1 d_y f``
* ``xx_total_newton_direction``  ``(D_xx + reg I)^-1 d_x f`` via one augmented solve
"""

from __future__ import annotations

import abc
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ArgumentError, ConvergenceError, SingularityError, SingularityWarning
from .linalg import CgResult, LinearOperator, as_vector, cg_normal_solve

__all__ = [
    "Point",
    "MinimaxOracle",
    "CgBudget",
    "NewtonDirection",
    "DerivativeReport",
    "HessianBlocks",
    "total_grad_x",
    "total_hvp_xx",
    "yy_newton_direction",
    "xx_total_newton_direction",
    "check_derivatives",
    "best_response",
    "hessian_blocks",
    "dense_total_hessian_xx",
]


@dataclass(frozen=True)
class Point:
    """A leader/follower pair ``z = (x, y)``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_vector(self.x, "x"))
        object.__setattr__(self, "y", as_vector(self.y, "y"))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_vector(cls, v, n: int) -> "Point":
        v = np.asarray(v, dtype=float)
        return cls(v[:n], v[n:])

    def norm(self) -> float:
        return float(np.sqrt(self.x @ self.x + self.y @ self.y))

    def __eq__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    def __hash__(self):
        return hash((self.x.tobytes(), self.y.tobytes()))


class MinimaxOracle(abc.ABC):
    """``min_x max_y f(x, y)`` exposed through values, gradients and HVPs.

    Subclasses must be re-entrant: no query may mutate problem data.
    """

    name: str = "oracle"

    @property
    @abc.abstractmethod
    def n(self) -> int: ...

    @property
    @abc.abstractmethod
    def m(self) -> int: ...

    def dims(self) -> tuple[int, int]:
        return self.n, self.m

    @abc.abstractmethod
    def value(self, z: Point) -> float: ...

    @abc.abstractmethod
    def grad_x(self, z: Point) -> np.ndarray: ...

    @abc.abstractmethod
    def grad_y(self, z: Point) -> np.ndarray: ...

    @abc.abstractmethod
    def hvp_xx(self, z: Point, v: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def hvp_xy(self, z: Point, v: np.ndarray) -> np.ndarray:
        """``d_xy f(z) v`` for ``v`` in R^m, result in R^n."""

    @abc.abstractmethod
    def hvp_yx(self, z: Point, v: np.ndarray) -> np.ndarray:
        """``d_yx f(z) v`` for ``v`` in R^n, result in R^m."""

    @abc.abstractmethod
    def hvp_yy(self, z: Point, v: np.ndarray) -> np.ndarray: ...

    def known_solution(self) -> Optional[Point]:
        return None

    def check_point(self, z: Point) -> Point:
        if not isinstance(z, Point):
            raise ArgumentError(f"expected a Point, got {type(z).__name__}")
        if z.x.shape[0] != self.n or z.y.shape[0] != self.m:
            raise ArgumentError(
                f"point dims ({z.x.shape[0]}, {z.y.shape[0]}) do not match problem ({self.n}, {self.m})"
            )
        return z


@dataclass(frozen=True)
class CgBudget:
    """Inner CG budgets: ``max_iter_y`` for solves with ``d_yy``, ``max_iter_x``
    for the augmented leader system."""

    max_iter_x: int = 32
    max_iter_y: int = 32
    tol: float = 0.0

    def __post_init__(self):
        if int(self.max_iter_x) < 1 or int(self.max_iter_y) < 1:
            raise ArgumentError("CG iteration budgets must be >= 1")
        if not self.tol >= 0:
            raise ArgumentError("CG tol must be >= 0")


@dataclass(frozen=True)
class NewtonDirection:
    direction: np.ndarray
    cg: CgResult


def _yy_operator(oracle: MinimaxOracle, z: Point, shift: float = 0.0) -> LinearOperator:
    m = oracle.m
    if shift:
        def apply(v):
            return oracle.hvp_yy(z, v) - shift * v
    else:
        def apply(v):
            return oracle.hvp_yy(z, v)
    return LinearOperator.symmetric(m, apply)


def _augmented_operator(oracle: MinimaxOracle, z: Point, reg: float) -> LinearOperator:
    n, m = oracle.n, oracle.m

    def apply(w):
        a, b = w[:n], w[n:]
        top = oracle.hvp_xx(z, a) + oracle.hvp_xy(z, b)
        if reg:
            top = top + reg * a
        return np.concatenate([top, oracle.hvp_yx(z, a) + oracle.hvp_yy(z, b)])

    return LinearOperator.symmetric(n + m, apply)


def total_grad_x(oracle: MinimaxOracle, z: Point, budget: CgBudget = CgBudget(), full_output=False):
    """Total derivative ``D_x f`` at ``z``.

    With ``full_output`` the inner :class:`CgResult` is returned as well; its
    ``suspect_singular`` flag is set (and a :class:`SingularityWarning`
    emitted) when ``d_yy`` looks singular.
    """
    z = oracle.check_point(z)
    gy = oracle.grad_y(z)
    res = cg_normal_solve(_yy_operator(oracle, z), gy, budget.max_iter_y, budget.tol)
    d = oracle.grad_x(z) - oracle.hvp_xy(z, res.solution)
    return (d, res) if full_output else d


def total_hvp_xx(oracle: MinimaxOracle, z: Point, v, budget: CgBudget = CgBudget()) -> np.ndarray:
    """Matrix-free ``D_xx f(z) v`` using one inner CG solve on ``d_yy``."""
    z = oracle.check_point(z)
    v = as_vector(v, "v")
    if v.shape[0] != oracle.n:
        raise ArgumentError(f"v has dim {v.shape[0]}, expected {oracle.n}")
    res = cg_normal_solve(_yy_operator(oracle, z), oracle.hvp_yx(z, v), budget.max_iter_y, budget.tol)
    return oracle.hvp_xx(z, v) - oracle.hvp_xy(z, res.solution)


def yy_newton_direction(
    oracle: MinimaxOracle, z: Point, budget: CgBudget = CgBudget(), shift: float = 0.0
) -> NewtonDirection:
    """``dy`` solving ``(d_yy f - shift I) dy = d_y f`` in the least-squares sense.

    ``y - dy`` is the (regularized) Newton follower update.
    """
    z = oracle.check_point(z)
    res = cg_normal_solve(_yy_operator(oracle, z, shift), oracle.grad_y(z), budget.max_iter_y, budget.tol)
    return NewtonDirection(res.solution, res)


def xx_total_newton_direction(
    oracle: MinimaxOracle,
    z: Point,
    budget: CgBudget = CgBudget(),
    reg: float = 0.0,
    total: bool = False,
) -> NewtonDirection:
    """``dx = (D_xx f + reg I)^-1 g`` from one solve with the augmented matrix.

    The system ``[[d_xx + reg I, d_xy], [d_yx, d_yy]] [dx; dv] = [d_x f; h]``
    is solved by CG and ``dx`` is its leading block.  With ``h = 0`` the
    result is ``(D_xx + reg I)^-1 d_x f``; with ``total=True`` we use
    ``h = d_y f``, which yields ``(D_xx + reg I)^-1 D_x f`` instead.
    """
    z = oracle.check_point(z)
    gx = oracle.grad_x(z)
    h = oracle.grad_y(z) if total else np.zeros(oracle.m)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularityWarning)
        res = cg_normal_solve(
            _augmented_operator(oracle, z, reg), np.concatenate([gx, h]), budget.max_iter_x, budget.tol
        )
    if res.suspect_singular:
        raise SingularityError(
            "augmented Newton system looks singular (Schur complement D_xx or d_yy)", block="S"
        )
    return NewtonDirection(res.solution[: oracle.n], res)


# ---------------------------------------------------------------------------
# dense assembly (small problems, verification and analysis only)


@dataclass(frozen=True)
class HessianBlocks:
    xx: np.ndarray
    xy: np.ndarray
    yx: np.ndarray
    yy: np.ndarray

    @property
    def full(self) -> np.ndarray:
        return np.block([[self.xx, self.xy], [self.yx, self.yy]])


def _columns(fn, dim_in):
    cols = []
    for j in range(dim_in):
        e = np.zeros(dim_in)
        e[j] = 1.0
        cols.append(np.asarray(fn(e), dtype=float))
    return np.column_stack(cols)


def hessian_blocks(oracle: MinimaxOracle, z: Point) -> HessianBlocks:
    """Dense Hessian blocks assembled from HVPs on basis vectors."""
    z = oracle.check_point(z)
    n, m = oracle.n, oracle.m
    return HessianBlocks(
        _columns(lambda v: oracle.hvp_xx(z, v), n),
        _columns(lambda v: oracle.hvp_xy(z, v), m),
        _columns(lambda v: oracle.hvp_yx(z, v), n),
        _columns(lambda v: oracle.hvp_yy(z, v), m),
    )


def dense_total_hessian_xx(oracle: MinimaxOracle, z: Point, budget: CgBudget = CgBudget()) -> np.ndarray:
    """``D_xx f(z)`` assembled column by column through :func:`total_hvp_xx`."""
    return _columns(lambda v: total_hvp_xx(oracle, z, v, budget), oracle.n)


# ---------------------------------------------------------------------------
# finite-difference validation


@dataclass
class DerivativeReport:
    """Relative errors ``||analytic - fd|| / max(||analytic||, ||fd||, floor)``."""

    errors: dict = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    def __getitem__(self, key):
        return self.errors[key]


REL_FLOOR = 1e-6


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    den = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), REL_FLOOR)
    return float(np.linalg.norm(a - b)) / den


def check_derivatives(
    oracle: MinimaxOracle, z: Point, h: float = 1e-5, seed: int = 0, probes: int = 2
) -> DerivativeReport:
    """Compare analytic derivatives with central differences.

    Gradients are differenced coordinatewise from ``value``; each HVP block
    is compared with the central difference of the matching gradient along
    ``probes`` random unit directions.
    """
    if not h > 0:
        raise ArgumentError("h must be > 0")
    z = oracle.check_point(z)
    n, m = oracle.n, oracle.m
    rng = np.random.Generator(np.random.PCG64(seed))
    v0 = z.vector

    def f_at(v):
        return oracle.value(Point.from_vector(v, n))

    fd = np.empty(n + m)
    for j in range(n + m):
        e = np.zeros(n + m)
        e[j] = h
        fd[j] = (f_at(v0 + e) - f_at(v0 - e)) / (2 * h)
    report = DerivativeReport()
    report.errors["grad_x"] = _rel(oracle.grad_x(z), fd[:n])
    report.errors["grad_y"] = _rel(oracle.grad_y(z), fd[n:])

    def unit(dim):
        u = rng.standard_normal(dim)
        return u / np.linalg.norm(u)

    def shifted(dx, dy):
        return Point(z.x + dx, z.y + dy)

    errs = {"hvp_xx": 0.0, "hvp_xy": 0.0, "hvp_yx": 0.0, "hvp_yy": 0.0}
    for _ in range(probes):
        u, w = unit(n), unit(m)
        zx_p, zx_m = shifted(h * u, 0.0), shifted(-h * u, 0.0)
        zy_p, zy_m = shifted(0.0, h * w), shifted(0.0, -h * w)
        errs["hvp_xx"] = max(errs["hvp_xx"], _rel(
            oracle.hvp_xx(z, u), (oracle.grad_x(zx_p) - oracle.grad_x(zx_m)) / (2 * h)))
        errs["hvp_xy"] = max(errs["hvp_xy"], _rel(
            oracle.hvp_xy(z, w), (oracle.grad_x(zy_p) - oracle.grad_x(zy_m)) / (2 * h)))
        errs["hvp_yx"] = max(errs["hvp_yx"], _rel(
            oracle.hvp_yx(z, u), (oracle.grad_y(zx_p) - oracle.grad_y(zx_m)) / (2 * h)))
        errs["hvp_yy"] = max(errs["hvp_yy"], _rel(
            oracle.hvp_yy(z, w), (oracle.grad_y(zy_p) - oracle.grad_y(zy_m)) / (2 * h)))
    report.errors.update(errs)
    return report


def best_response(
    oracle: MinimaxOracle,
    x,
    y0,
    tol: float = 1e-10,
    max_iter: int = 50,
    budget: CgBudget = CgBudget(),
) -> np.ndarray:
    """Root of ``d_y f(x, .)`` by undamped Newton from ``y0``."""
    y = as_vector(y0, "y0")
    x = as_vector(x, "x")
    for it in range(max_iter + 1):
        z = Point(x, y)
        g = oracle.grad_y(z)
        if float(np.linalg.norm(g)) <= tol:
            return y
        if it == max_iter:
            break
        y = y - yy_newton_direction(oracle, z, budget).direction
        if not np.all(np.isfinite(y)):
            raise ConvergenceError("best-response Newton produced non-finite iterate", y, it)
    raise ConvergenceError(
        f"best response not within tol={tol:g} after {max_iter} Newton steps", y, max_iter
    )
