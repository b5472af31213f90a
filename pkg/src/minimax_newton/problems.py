"""Analytic test problems with closed-form gradients and Hessian-vector products.

Every problem with sampled data draws it once at construction from
``numpy.random.Generator(PCG64(seed))`` (standard normals come from the
generator's ziggurat transform) and never mutates it afterwards.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Optional

import numpy as np

from .errors import ConfigError
from .linalg import dense_inverse, eigh_symmetric, eig_symmetric, is_symmetric
from .oracle import MinimaxOracle, Point

__all__ = [
    "QuadraticMinimax",
    "SyntheticQuartic",
    "GaussianMeanGAN",
    "GaussianCovarianceGAN",
    "SinProduct",
    "RobustLeastSquares",
    "Example1",
    "make_problem",
    "known_solution",
    "population_hessians_gaussian_mean",
    "PROBLEMS",
]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def _sigmoid(t):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _log_sigmoid(t):
    return -np.logaddexp(0.0, -t)


class QuadraticMinimax(MinimaxOracle):
    """``f = 1/2 x'Ax + 1/2 y'By + x'Cy``.

    By default the constructor insists that the origin is a strict local
    minimax point (``B < 0`` and ``A - C B^-1 C' > 0``); pass
    ``require_slmm=False`` for degenerate cases such as the bilinear game.
    """

    name = "quadratic"

    def __init__(self, A, B, C, require_slmm: bool = True):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        n, m = A.shape[0], B.shape[0]
        if A.shape != (n, n) or B.shape != (m, m) or C.shape != (n, m):
            raise ConfigError(f"non-conformable quadratic blocks A{A.shape} B{B.shape} C{C.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(C))):
            raise ConfigError("quadratic blocks must be finite")
        if not (is_symmetric(A) and is_symmetric(B)):
            raise ConfigError("A and B must be symmetric")
        if require_slmm:
            if eig_symmetric(B)[-1] >= 0:
                raise ConfigError("B must be negative definite")
            S = A - C @ dense_inverse(B, "B") @ C.T
            if eig_symmetric(0.5 * (S + S.T))[0] <= 0:
                raise ConfigError("A - C B^-1 C' must be positive definite")
        self.A, self.B, self.C = A, B, C

    @classmethod
    def q1(cls) -> "QuadraticMinimax":
        """``f = 2x^2 - y^2 + 2xy``."""
        return cls([[4.0]], [[-2.0]], [[2.0]])

    @classmethod
    def with_spectra(cls, dxx_eigs, neg_yy_eigs, coupling: float = 1.0) -> "QuadraticMinimax":
        """Quadratic whose ``D_xx`` is ``diag(dxx_eigs)`` and ``-d_yy`` is ``diag(neg_yy_eigs)``.

        ``C`` is ``coupling`` times the rectangular identity and ``A`` is
        chosen so the Schur complement comes out exactly diagonal.
        """
        lam = np.asarray(dxx_eigs, dtype=float)
        mu = np.asarray(neg_yy_eigs, dtype=float)
        if np.any(lam <= 0) or np.any(mu <= 0):
            raise ConfigError("prescribed eigenvalues must be positive")
        n, m = lam.size, mu.size
        B = -np.diag(mu)
        C = coupling * np.eye(n, m)
        A = np.diag(lam) + C @ np.diag(-1.0 / mu) @ C.T
        return cls(A, B, C)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[0]

    def value(self, z):
        return float(0.5 * z.x @ self.A @ z.x + 0.5 * z.y @ self.B @ z.y + z.x @ self.C @ z.y)

    def grad_x(self, z):
        return self.A @ z.x + self.C @ z.y

    def grad_y(self, z):
        return self.B @ z.y + self.C.T @ z.x

    def hvp_xx(self, z, v):
        return self.A @ v

    def hvp_xy(self, z, v):
        return self.C @ v

    def hvp_yx(self, z, v):
        return self.C.T @ v

    def hvp_yy(self, z, v):
        return self.B @ v

    def known_solution(self):
        return Point(np.zeros(self.n), np.zeros(self.m))


class SyntheticQuartic(MinimaxOracle):
    """Two-plus-two dimensional quartic with a non-saddle SLmM at the origin::

        f = x'diag(-2.5, -0.025)x + y'diag(-0.5, -0.05)y + x1 y2 + x2 y1
            - 0.01(y1^4 + y2^4) + 0.3 x1^4 + 0.2 x2^4 - x1^3 y2
    """

    name = "synthetic_quartic"
    n = 2
    m = 2

    def value(self, z):
        x1, x2 = z.x
        y1, y2 = z.y
        return float(
            -2.5 * x1**2 - 0.025 * x2**2 - 0.5 * y1**2 - 0.05 * y2**2
            + x1 * y2 + x2 * y1
            - 0.01 * (y1**4 + y2**4) + 0.3 * x1**4 + 0.2 * x2**4 - x1**3 * y2
        )

    def grad_x(self, z):
        x1, x2 = z.x
        y1, y2 = z.y
        return np.array([
            -5.0 * x1 + y2 + 1.2 * x1**3 - 3.0 * x1**2 * y2,
            -0.05 * x2 + y1 + 0.8 * x2**3,
        ])

    def grad_y(self, z):
        x1, x2 = z.x
        y1, y2 = z.y
        return np.array([
            -y1 + x2 - 0.04 * y1**3,
            -0.1 * y2 + x1 - 0.04 * y2**3 - x1**3,
        ])

    def _xx(self, z):
        x1, x2 = z.x
        y2 = z.y[1]
        return np.array([-5.0 + 3.6 * x1**2 - 6.0 * x1 * y2, -0.05 + 2.4 * x2**2])

    def _xy(self, z):
        x1 = z.x[0]
        return np.array([[0.0, 1.0 - 3.0 * x1**2], [1.0, 0.0]])

    def hvp_xx(self, z, v):
        return self._xx(z) * v

    def hvp_xy(self, z, v):
        return self._xy(z) @ v

    def hvp_yx(self, z, v):
        return self._xy(z).T @ v

    def hvp_yy(self, z, v):
        y1, y2 = z.y
        return np.array([-1.0 - 0.12 * y1**2, -0.1 - 0.12 * y2**2]) * v

    def known_solution(self):
        return Point(np.zeros(2), np.zeros(2))


SIGMA_PRESETS = {"identity": [[1.0, 0.0], [0.0, 1.0]], "ill": [[1.0, 0.0], [0.0, 0.05]]}


def _resolve_sigma(sigma) -> np.ndarray:
    if isinstance(sigma, str):
        if sigma not in SIGMA_PRESETS:
            raise ConfigError(f"unknown sigma preset {sigma!r}; expected one of {sorted(SIGMA_PRESETS)}")
        sigma = SIGMA_PRESETS[sigma]
    S = np.asarray(sigma, dtype=float)
    if S.shape != (2, 2) or not is_symmetric(S):
        raise ConfigError("sigma must be a symmetric 2x2 matrix")
    if eig_symmetric(S)[0] <= 0:
        raise ConfigError("sigma must be positive definite")
    return S


def _sqrt_factor(S):
    w, V = eigh_symmetric(S)
    return V * np.sqrt(w)


class GaussianMeanGAN(MinimaxOracle):
    """GAN learning the mean of a 2-D Gaussian with a linear discriminator.

    Leader ``eta`` translates latents, follower ``omega`` is the
    discriminator weight::

        f = mean_i log s(w'x_i) + mean_i log(1 - s(w'(z_i + eta)))

    Data ``x_i`` and latents ``z_i`` are both drawn from ``N(0, Sigma)``.
    """

    name = "gaussian_mean"
    n = 2
    m = 2
    distance_floor = 1e-2

    def __init__(self, sigma="identity", N: int = 10000, seed: int = 0):
        if int(N) < 1:
            raise ConfigError("N must be >= 1")
        self.sigma = _resolve_sigma(sigma)
        self.N = int(N)
        self.seed = int(seed)
        L = _sqrt_factor(self.sigma)
        rng = make_rng(seed)
        self.data = rng.standard_normal((self.N, 2)) @ L.T
        self.latents = rng.standard_normal((self.N, 2)) @ L.T
        self.data.setflags(write=False)
        self.latents.setflags(write=False)

    def _terms(self, z):
        u = self.latents + z.x
        s = u @ z.y
        a = self.data @ z.y
        return u, s, a

    def value(self, z):
        u, s, a = self._terms(z)
        return float(np.mean(_log_sigmoid(a)) + np.mean(_log_sigmoid(-s)))

    def grad_x(self, z):
        _, s, _ = self._terms(z)
        return -np.mean(_sigmoid(s)) * z.y

    def grad_y(self, z):
        u, s, a = self._terms(z)
        return (1.0 - _sigmoid(a)) @ self.data / self.N - _sigmoid(s) @ u / self.N

    def hvp_xx(self, z, v):
        _, s, _ = self._terms(z)
        sg = _sigmoid(s)
        return -np.mean(sg * (1.0 - sg)) * z.y * (z.y @ v)

    def hvp_xy(self, z, v):
        u, s, _ = self._terms(z)
        sg = _sigmoid(s)
        return -(np.mean(sg) * v + np.mean(sg * (1.0 - sg) * (u @ v)) * z.y)

    def hvp_yx(self, z, v):
        u, s, _ = self._terms(z)
        sg = _sigmoid(s)
        return -(np.mean(sg) * v + (sg * (1.0 - sg)) @ u / self.N * (z.y @ v))

    def hvp_yy(self, z, v):
        u, s, a = self._terms(z)
        sa, ss = _sigmoid(a), _sigmoid(s)
        return -(
            (sa * (1.0 - sa) * (self.data @ v)) @ self.data / self.N
            + (ss * (1.0 - ss) * (u @ v)) @ u / self.N
        )

    def known_solution(self):
        return Point(np.zeros(2), np.zeros(2))


def population_hessians_gaussian_mean(sigma) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Population ``(d_eta_eta, d_omega_omega, d_eta_omega)`` at the origin."""
    S = _resolve_sigma(sigma)
    return np.zeros((2, 2)), -0.5 * S, -0.5 * np.eye(2)


class GaussianCovarianceGAN(MinimaxOracle):
    """GAN learning a 2-D covariance: generator ``Vz``, discriminator ``s(x'Wx)``.

    ``V`` and ``W`` are full 2x2 matrices flattened row-major.  The follower
    objective carries the penalty ``-reg ||W||_F^2``::

        f = mean_i log s(x_i'W x_i) + mean_j log(1 - s(z_j'V'WV z_j)) - reg ||W||^2
    """

    name = "gaussian_covariance"
    n = 4
    m = 4

    def __init__(self, sigma=((1.0, 0.0), (0.0, 0.04)), N: int = 10000, seed: int = 0, reg: float = 1e-5):
        if int(N) < 1:
            raise ConfigError("N must be >= 1")
        if not reg >= 0:
            raise ConfigError("reg must be >= 0")
        self.sigma = _resolve_sigma(sigma)
        self.N = int(N)
        self.seed = int(seed)
        self.reg = float(reg)
        rng = make_rng(seed)
        self.data = rng.standard_normal((self.N, 2)) @ _sqrt_factor(self.sigma).T
        self.latents = rng.standard_normal((self.N, 2))
        self.data.setflags(write=False)
        self.latents.setflags(write=False)

    @staticmethod
    def _mats(z):
        return z.x.reshape(2, 2), z.y.reshape(2, 2)

    def _terms(self, z):
        V, W = self._mats(z)
        g = self.latents @ V.T  # rows V z_j
        s = np.einsum("ni,ij,nj->n", g, W, g)
        a = np.einsum("ni,ij,nj->n", self.data, W, self.data)
        return V, W, g, s, a

    def value(self, z):
        _, W, _, s, a = self._terms(z)
        return float(np.mean(_log_sigmoid(a)) + np.mean(_log_sigmoid(-s)) - self.reg * np.sum(W * W))

    def grad_x(self, z):
        _, W, g, s, _ = self._terms(z)
        Ws = W + W.T
        return (-Ws @ (g.T * _sigmoid(s)) @ self.latents / self.N).ravel()

    def grad_y(self, z):
        _, W, g, s, a = self._terms(z)
        G = (self.data.T * (1.0 - _sigmoid(a))) @ self.data - (g.T * _sigmoid(s)) @ g
        return (G / self.N - 2.0 * self.reg * W).ravel()

    def hvp_xx(self, z, v):
        _, W, g, s, _ = self._terms(z)
        Ws = W + W.T
        h = self.latents @ v.reshape(2, 2).T
        sg = _sigmoid(s)
        ds = np.einsum("ni,ij,nj->n", h, Ws, g)
        M = (g.T * (sg * (1.0 - sg) * ds)) @ self.latents + (h.T * sg) @ self.latents
        return (-Ws @ M / self.N).ravel()

    def hvp_xy(self, z, v):
        _, W, g, s, _ = self._terms(z)
        Ws = W + W.T
        dW = v.reshape(2, 2)
        sg = _sigmoid(s)
        ds = np.einsum("ni,ij,nj->n", g, dW, g)
        M = Ws @ (g.T * (sg * (1.0 - sg) * ds)) @ self.latents + (dW + dW.T) @ (g.T * sg) @ self.latents
        return (-M / self.N).ravel()

    def hvp_yx(self, z, v):
        _, W, g, s, _ = self._terms(z)
        h = self.latents @ v.reshape(2, 2).T
        sg = _sigmoid(s)
        ds = np.einsum("ni,ij,nj->n", h, W + W.T, g)
        M = (g.T * (sg * (1.0 - sg) * ds)) @ g + (h.T * sg) @ g + (g.T * sg) @ h
        return (-M / self.N).ravel()

    def hvp_yy(self, z, v):
        _, _, g, s, a = self._terms(z)
        dW = v.reshape(2, 2)
        sa, ss = _sigmoid(a), _sigmoid(s)
        da = np.einsum("ni,ij,nj->n", self.data, dW, self.data)
        ds = np.einsum("ni,ij,nj->n", g, dW, g)
        M = (self.data.T * (sa * (1.0 - sa) * da)) @ self.data + (g.T * (ss * (1.0 - ss) * ds)) @ g
        return (-M / self.N - 2.0 * self.reg * dW).ravel()

    @staticmethod
    def skew_residual(z: Point) -> float:
        """``||W + W'||_F``, zero at the population optimum; a diagnostic only."""
        W = z.y.reshape(2, 2)
        return float(np.linalg.norm(W + W.T))


class SinProduct(MinimaxOracle):
    """``f = (x^2 + 1)(2 + sin y)``: SLmM at ``(0, pi/2)``, local minimum at ``(0, -pi/2)``."""

    name = "sin_product"
    n = 1
    m = 1
    slmm = Point([0.0], [math.pi / 2])
    local_minimum = Point([0.0], [-math.pi / 2])

    def value(self, z):
        return float((z.x[0] ** 2 + 1.0) * (2.0 + math.sin(z.y[0])))

    def grad_x(self, z):
        return np.array([2.0 * z.x[0] * (2.0 + math.sin(z.y[0]))])

    def grad_y(self, z):
        return np.array([(z.x[0] ** 2 + 1.0) * math.cos(z.y[0])])

    def hvp_xx(self, z, v):
        return 2.0 * (2.0 + math.sin(z.y[0])) * v

    def hvp_xy(self, z, v):
        return 2.0 * z.x[0] * math.cos(z.y[0]) * v

    def hvp_yx(self, z, v):
        return 2.0 * z.x[0] * math.cos(z.y[0]) * v

    def hvp_yy(self, z, v):
        return -(z.x[0] ** 2 + 1.0) * math.sin(z.y[0]) * v

    def known_solution(self):
        return self.slmm


class Example1(MinimaxOracle):
    """``f = -3x^2 + xy^2 - y^2 + 4xy``: SLmM at the origin that is not a local Nash point."""

    name = "example1"
    n = 1
    m = 1

    def value(self, z):
        x, y = z.x[0], z.y[0]
        return float(-3 * x * x + x * y * y - y * y + 4 * x * y)

    def grad_x(self, z):
        x, y = z.x[0], z.y[0]
        return np.array([-6 * x + y * y + 4 * y])

    def grad_y(self, z):
        x, y = z.x[0], z.y[0]
        return np.array([2 * x * y - 2 * y + 4 * x])

    def hvp_xx(self, z, v):
        return -6.0 * v

    def hvp_xy(self, z, v):
        return (2 * z.y[0] + 4) * v

    def hvp_yx(self, z, v):
        return (2 * z.y[0] + 4) * v

    def hvp_yy(self, z, v):
        return (2 * z.x[0] - 2) * v

    def known_solution(self):
        return Point([0.0], [0.0])


class RobustLeastSquares(MinimaxOracle):
    """Distributionally robust least squares.

    Leader ``theta`` in R^d, follower ``Omega = (w_1 .. w_N)`` in R^(N d)::

        f = sum_i 1/2 (w_i'theta - b_i)^2 - gamma ||w_i - a_i||^2

    With ``data="planted"`` the samples are built around a stationary point
    ``(theta*, Omega*)`` (see :meth:`planted_point`): ``a_1`` is random,
    ``b_1 = 2 sqrt(gamma) ||a_1||`` and ``theta* = 2 gamma a_1 / b_1`` (so
    ``||theta*||^2 = gamma``); ``w_1* = 0`` carries a nonzero residual while
    every later sample is fitted exactly (``w_i* = a_i``, ``b_i = a_i'theta*``).
    The nonzero residual keeps ``D_theta_theta`` positive definite even when
    ``N < d`` makes ``sum_i d_theta_theta`` singular.
    ``data="random"`` draws ``a_i`` and ``b_i`` as independent standard normals.
    """

    name = "robust_least_squares"

    def __init__(self, N: int = 3, d: int = 5, gamma: float = 1.0, seed: int = 0, data: str = "planted"):
        N, d = int(N), int(d)
        if N < 1 or d < 1:
            raise ConfigError("N and d must be >= 1")
        if not gamma > 0:
            raise ConfigError("gamma must be > 0")
        self.N, self.d, self.gamma = N, d, float(gamma)
        rng = make_rng(seed)
        a = rng.standard_normal((N, d))
        if data == "planted":
            b = np.empty(N)
            b[0] = 2.0 * math.sqrt(self.gamma) * float(np.linalg.norm(a[0]))
            theta = 2.0 * self.gamma * a[0] / b[0]
            b[1:] = a[1:] @ theta
            omega = a.copy()
            omega[0] = 0.0
            self._planted = Point(theta, omega.ravel())
        elif data == "random":
            b = rng.standard_normal(N)
            self._planted = None
        else:
            raise ConfigError(f"unknown data mode {data!r}; expected 'planted' or 'random'")
        self.a, self.b = a, b
        self.a.setflags(write=False)
        self.b.setflags(write=False)

    @property
    def n(self):
        return self.d

    @property
    def m(self):
        return self.N * self.d

    def planted_point(self) -> Optional[Point]:
        return self._planted

    def _unpack(self, z):
        Om = z.y.reshape(self.N, self.d)
        return z.x, Om, Om @ z.x - self.b

    def value(self, z):
        th, Om, r = self._unpack(z)
        return float(0.5 * r @ r - self.gamma * np.sum((Om - self.a) ** 2))

    def grad_x(self, z):
        _, Om, r = self._unpack(z)
        return r @ Om

    def grad_y(self, z):
        th, Om, r = self._unpack(z)
        return (np.outer(r, th) - 2.0 * self.gamma * (Om - self.a)).ravel()

    def hvp_xx(self, z, v):
        _, Om, _ = self._unpack(z)
        return Om.T @ (Om @ v)

    def hvp_xy(self, z, v):
        th, Om, r = self._unpack(z)
        V = v.reshape(self.N, self.d)
        return r @ V + Om.T @ (V @ th)

    def hvp_yx(self, z, v):
        th, Om, r = self._unpack(z)
        return (np.outer(r, v) + np.outer(Om @ v, th)).ravel()

    def hvp_yy(self, z, v):
        th, _, _ = self._unpack(z)
        V = v.reshape(self.N, self.d)
        return (np.outer(V @ th, th) - 2.0 * self.gamma * V).ravel()

    def summed_theta_hessian(self, z: Point) -> np.ndarray:
        """``sum_i w_i w_i'``, the plain ``d_theta_theta`` block."""
        _, Om, _ = self._unpack(z)
        return Om.T @ Om


# ---------------------------------------------------------------------------
# registry


def _build_quadratic(params, seed):
    p = dict(params)
    if "dxx_eigs" in p or "neg_yy_eigs" in p:
        keys = {"dxx_eigs", "neg_yy_eigs", "coupling"}
        _reject_unknown("quadratic", p, keys)
        if "dxx_eigs" not in p or "neg_yy_eigs" not in p:
            raise ConfigError("quadratic spectra need both dxx_eigs and neg_yy_eigs")
        return QuadraticMinimax.with_spectra(p["dxx_eigs"], p["neg_yy_eigs"], float(p.get("coupling", 1.0)))
    _reject_unknown("quadratic", p, {"A", "B", "C"})
    if not p:
        return QuadraticMinimax.q1()
    if not {"A", "B", "C"} <= set(p):
        raise ConfigError("quadratic needs A, B and C (or dxx_eigs and neg_yy_eigs)")
    return QuadraticMinimax(p["A"], p["B"], p["C"])


def _reject_unknown(name, params, allowed):
    extra = sorted(set(params) - set(allowed))
    if extra:
        raise ConfigError(f"unknown parameter(s) for {name}: {extra}", [f"problem.params.{k}" for k in extra])


def _simple(cls, allowed, seeded=False):
    def build(params, seed):
        _reject_unknown(cls.name, params, allowed)
        kwargs = dict(params)
        if seeded:
            kwargs.setdefault("seed", seed)
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid parameters for {cls.name}: {exc}") from exc
    return build


PROBLEMS: dict[str, Callable[[dict, int], MinimaxOracle]] = {
    "quadratic": _build_quadratic,
    "synthetic_quartic": _simple(SyntheticQuartic, set()),
    "gaussian_mean": _simple(GaussianMeanGAN, {"sigma", "N", "seed"}, seeded=True),
    "gaussian_covariance": _simple(GaussianCovarianceGAN, {"sigma", "N", "seed", "reg"}, seeded=True),
    "sin_product": _simple(SinProduct, set()),
    "robust_least_squares": _simple(RobustLeastSquares, {"N", "d", "gamma", "seed", "data"}, seeded=True),
    "example1": _simple(Example1, set()),
}


def make_problem(name: str, params: Optional[dict[str, Any]] = None, seed: int = 0) -> MinimaxOracle:
    """Build a registered problem; the same ``(name, params, seed)`` gives identical data."""
    if name not in PROBLEMS:
        raise ConfigError(f"unknown problem {name!r}; expected one of {sorted(PROBLEMS)}", ["problem.name"])
    return PROBLEMS[name](dict(params or {}), seed)


def known_solution(oracle: MinimaxOracle) -> Optional[Point]:
    return oracle.known_solution()
