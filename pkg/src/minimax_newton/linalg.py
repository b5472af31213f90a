"""Dense small-matrix linear algebra and matrix-free iterative solves.

Everything here works on plain ``numpy`` arrays: a *vector* is a 1-D float64
array and a *matrix* a 2-D one.  The dense routines (LU, Jacobi, Hessenberg
QR) are written out explicitly and are meant for desk-scale problems
(dimension up to a few dozen); ``numpy.linalg`` is only used by the test
suite as an independent oracle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ArgumentError, NumericalFailure, SingularityError, SingularityWarning

SYMMETRY_RTOL = 1e-12
PIVOT_RTOL = 1e-12
SINGULAR_GROWTH = 1e8
JACOBI_MAX_SWEEPS = 100

__all__ = [
    "LinearOperator",
    "CgResult",
    "cg_normal_solve",
    "dense_solve",
    "dense_inverse",
    "block_inverse",
    "eig_symmetric",
    "eigh_symmetric",
    "eig_general",
    "spectral_radius",
    "is_symmetric",
]


def as_vector(v, name="vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ArgumentError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} contains NaN or Inf")
    return arr


def as_matrix(m, name="matrix", square=False) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ArgumentError(f"{name} must be 2-D, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ArgumentError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} contains NaN or Inf")
    return arr


def is_symmetric(m, rtol: float = SYMMETRY_RTOL) -> bool:
    """Entrywise test ``|M_ij - M_ji| <= rtol * max(1, |M_ij|)``."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.all(np.abs(m - m.T) <= rtol * np.maximum(1.0, np.abs(m))))


@dataclass(frozen=True)
class LinearOperator:
    """A matrix-free linear map ``R^domain_dim -> R^codomain_dim``.

    ``definite`` may be set to ``+1`` / ``-1`` when the operator is known to be
    symmetric positive / negative definite; :func:`cg_normal_solve` then uses
    plain CG instead of CG on the normal equations.
    """

    domain_dim: int
    codomain_dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    apply_transpose: Callable[[np.ndarray], np.ndarray]
    definite: int = 0

    @classmethod
    def from_matrix(cls, m, definite: int = 0) -> "LinearOperator":
        m = as_matrix(m)
        return cls(m.shape[1], m.shape[0], lambda v: m @ v, lambda w: m.T @ w, definite)

    @classmethod
    def symmetric(cls, dim: int, apply: Callable[[np.ndarray], np.ndarray], definite: int = 0):
        return cls(dim, dim, apply, apply, definite)

    def to_dense(self) -> np.ndarray:
        """Assemble the matrix column by column from ``apply(e_j)``."""
        cols = []
        for j in range(self.domain_dim):
            e = np.zeros(self.domain_dim)
            e[j] = 1.0
            cols.append(np.asarray(self.apply(e), dtype=float))
        return np.column_stack(cols) if cols else np.zeros((self.codomain_dim, 0))


@dataclass(frozen=True)
class CgResult:
    solution: np.ndarray
    iterations: int
    final_residual_norm: float
    converged: bool
    suspect_singular: bool = False


def _finish(x, b, iterations, residual, converged, max_iter):
    bnorm = float(np.linalg.norm(b))
    xnorm = float(np.linalg.norm(x))
    suspect = xnorm > SINGULAR_GROWTH * bnorm if bnorm > 0 else False
    if suspect:
        warnings.warn(
            f"CG solution norm {xnorm:.3e} exceeds {SINGULAR_GROWTH:.0e} x rhs norm; "
            "operator is likely singular",
            SingularityWarning,
            stacklevel=3,
        )
    return CgResult(x, iterations, residual, converged, suspect)


def cg_normal_solve(A: LinearOperator, b, max_iter: int, tol: float = 0.0) -> CgResult:
    """Least-squares solve of ``A x = b`` by CG on ``A^T A x = A^T b``.

    This is the CGLS recurrence: each iteration costs one ``apply`` and one
    ``apply_transpose`` and the normal equations are never formed.  The
    iteration stops after ``max_iter`` steps or as soon as the normal-equation
    residual ``||A^T (b - A x)||`` drops to ``tol`` (``tol = 0`` therefore
    means "use the whole budget unless the residual is exactly zero").
    Operators tagged ``definite`` are solved with ordinary CG instead and the
    reported residual is ``||b - A x||``.
    """
    b = as_vector(b, "b")
    if A.domain_dim != A.codomain_dim or A.domain_dim != b.shape[0]:
        raise ArgumentError(
            f"dimension mismatch: operator {A.codomain_dim}x{A.domain_dim}, rhs {b.shape[0]}"
        )
    if max_iter < 1:
        raise ArgumentError("max_iter must be >= 1")
    if not tol >= 0:
        raise ArgumentError("tol must be >= 0")
    if A.definite:
        return _cg_definite(A, b, max_iter, tol)

    x = np.zeros_like(b)
    r = b.copy()
    s = np.asarray(A.apply_transpose(r), dtype=float)
    p = s.copy()
    gamma = float(s @ s)
    residual = math.sqrt(gamma)
    if residual <= tol:
        return _finish(x, b, 0, residual, True, max_iter)

    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        q = np.asarray(A.apply(p), dtype=float)
        qq = float(q @ q)
        if qq == 0.0:
            # p lies in the null space of A; nothing more to gain
            k -= 1
            break
        alpha = gamma / qq
        x = x + alpha * p
        r = r - alpha * q
        s = np.asarray(A.apply_transpose(r), dtype=float)
        gamma_new = float(s @ s)
        if not (math.isfinite(gamma_new) and np.all(np.isfinite(x))):
            raise NumericalFailure(f"non-finite value in CG at iteration {k}", iteration=k)
        residual = math.sqrt(gamma_new)
        if residual <= tol:
            converged = True
            break
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return _finish(x, b, k, residual, converged, max_iter)


def _cg_definite(A: LinearOperator, b, max_iter, tol) -> CgResult:
    sign = 1.0 if A.definite > 0 else -1.0
    x = np.zeros_like(b)
    r = sign * b
    p = r.copy()
    rr = float(r @ r)
    residual = math.sqrt(rr)
    if residual <= tol:
        return _finish(x, b, 0, residual, True, max_iter)
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        q = sign * np.asarray(A.apply(p), dtype=float)
        pq = float(p @ q)
        if pq == 0.0:
            k -= 1
            break
        alpha = rr / pq
        x = x + alpha * p
        r = r - alpha * q
        rr_new = float(r @ r)
        if not (math.isfinite(rr_new) and np.all(np.isfinite(x))):
            raise NumericalFailure(f"non-finite value in CG at iteration {k}", iteration=k)
        residual = math.sqrt(rr_new)
        if residual <= tol:
            converged = True
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return _finish(x, b, k, residual, converged, max_iter)


# ---------------------------------------------------------------------------
# dense direct solves


def lu_factor(M, name="M"):
    """Partial-pivot LU; returns the packed factors and the row permutation."""
    a = as_matrix(M, name, square=True).copy()
    n = a.shape[0]
    piv = np.arange(n)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0:
        raise SingularityError(f"{name} is the zero matrix", block=name)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) <= PIVOT_RTOL * scale:
            raise SingularityError(
                f"{name} is singular to working precision (pivot {abs(a[p, k]):.3e} at column {k})",
                block=name,
            )
        if p != k:
            a[[k, p]] = a[[p, k]]
            piv[[k, p]] = piv[[p, k]]
        a[k + 1 :, k] /= a[k, k]
        a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k, k + 1 :])
    return a, piv


def lu_solve(lu, piv, b):
    n = lu.shape[0]
    x = np.array(b, dtype=float)[piv]
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1 :] @ x[i + 1 :]) / lu[i, i]
    return x


def dense_solve(M, b, name="M") -> np.ndarray:
    """Solve ``M x = b`` by Gaussian elimination with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    lu, piv = lu_factor(M, name)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != lu.shape[0]:
        raise ArgumentError(f"rhs has {b.shape[0]} rows, {name} is {lu.shape[0]}x{lu.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise ArgumentError("rhs contains NaN or Inf")
    return lu_solve(lu, piv, b)


def dense_inverse(M, name="M") -> np.ndarray:
    m = as_matrix(M, name, square=True)
    return dense_solve(m, np.eye(m.shape[0]), name)


def block_inverse(A, B, C, D) -> np.ndarray:
    """Inverse of ``[[A, B], [C, D]]`` through the Schur complement of ``D``.

    With ``S = A - B D^{-1} C`` the inverse is::

        [[ S^-1,             -S^-1 B D^-1                 ],
         [ -D^-1 C S^-1,      D^-1 + D^-1 C S^-1 B D^-1   ]]

    so its upper-left block is exactly ``S^-1``.
    """
    A = as_matrix(A, "A", square=True)
    D = as_matrix(D, "D", square=True)
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    n, m = A.shape[0], D.shape[0]
    if B.shape != (n, m) or C.shape != (m, n):
        raise ArgumentError(
            f"non-conformable blocks: A {A.shape}, B {B.shape}, C {C.shape}, D {D.shape}"
        )
    scale = max(1.0, *(float(np.max(np.abs(X))) if X.size else 0.0 for X in (A, B, C, D)))
    _check_scale("D", D, scale)
    Dinv = dense_inverse(D, "D")
    S = A - B @ Dinv @ C
    _check_scale("S", S, scale)
    Sinv = dense_inverse(S, "S")
    DinvC = Dinv @ C
    BDinv = B @ Dinv
    top = np.hstack([Sinv, -Sinv @ BDinv])
    bottom = np.hstack([-DinvC @ Sinv, Dinv + DinvC @ Sinv @ BDinv])
    return np.vstack([top, bottom])


def _check_scale(name, M, scale):
    if M.size and float(np.max(np.abs(M))) <= PIVOT_RTOL * scale:
        raise SingularityError(f"block {name} is numerically zero", block=name)


# ---------------------------------------------------------------------------
# eigenvalues


def eigh_symmetric(M) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Returns ``(w, V)`` with ``w`` ascending and ``M @ V[:, i] ~= w[i] * V[:, i]``.
    """
    m = as_matrix(M, "M", square=True)
    if not is_symmetric(m):
        raise ArgumentError("matrix is not symmetric within tolerance")
    a = 0.5 * (m + m.T)
    n = a.shape[0]
    V = np.eye(n)
    eps = np.finfo(float).eps
    for _ in range(JACOBI_MAX_SWEEPS):
        off = float(np.sqrt(np.sum(np.tril(a, -1) ** 2)))
        if off == 0.0 or off <= eps * float(np.linalg.norm(a)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * ap - s * aq, s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
    else:
        raise NumericalFailure("Jacobi sweeps did not converge", iteration=JACOBI_MAX_SWEEPS)
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def eig_symmetric(M) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending."""
    return eigh_symmetric(M)[0]


def _balance(a: np.ndarray) -> np.ndarray:
    # Parlett-Reinsch scaling by powers of two; a similarity transform
    radix, sqrdx = 2.0, 4.0
    n = a.shape[0]
    done = False
    while not done:
        done = True
        for i in range(n):
            c = float(np.sum(np.abs(a[:, i])) - abs(a[i, i]))
            r = float(np.sum(np.abs(a[i, :])) - abs(a[i, i]))
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def hessenberg(M) -> np.ndarray:
    """Upper Hessenberg form via Householder similarity transforms."""
    H = as_matrix(M, "M", square=True).copy()
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k]
        xnorm = float(np.linalg.norm(x))
        if xnorm == 0.0:
            continue
        alpha = -math.copysign(xnorm, x[0])
        v = x.copy()
        v[0] -= alpha
        vnorm = float(np.linalg.norm(v))
        if vnorm == 0.0:
            continue
        v /= vnorm
        H[k + 1 :, k:] -= 2.0 * np.outer(v, v @ H[k + 1 :, k:])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v)
        H[k + 2 :, k] = 0.0
    return H


def _hqr(a: np.ndarray, max_sweeps: int) -> np.ndarray:
    """Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only)."""
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = 0.0
    for i in range(n):
        anorm += float(np.sum(np.abs(a[i, max(i - 1, 0) :])))
    nn = n - 1
    t = 0.0
    sweeps = 0
    x = y = z = w = p = q = r = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) + s == s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn], wi[nn] = x + t, 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1], wi[nn] = -z, z
                nn -= 2
                break
            if sweeps >= max_sweeps:
                raise NumericalFailure(
                    f"QR iteration did not converge within {max_sweeps} sweeps", iteration=sweeps
                )
            if its > 0 and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = y = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            sweeps += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = a[k, j] + q * a[k + 1, j]
                    if k != nn - 1:
                        p += r * a[k + 2, j]
                        a[k + 2, j] -= p * z
                    a[k + 1, j] -= p * y
                    a[k, j] -= p * x
                mmin = nn if nn < k + 3 else k + 3
                for i in range(l, mmin + 1):
                    p = x * a[i, k] + y * a[i, k + 1]
                    if k != nn - 1:
                        p += z * a[i, k + 2]
                        a[i, k + 2] -= p * r
                    a[i, k + 1] -= p * q
                    a[i, k] -= p
    return wr + 1j * wi


def eig_general(M) -> np.ndarray:
    """All eigenvalues of a square real matrix, as a complex array.

    Balancing, Householder reduction to Hessenberg form, then Francis
    double-shift QR capped at ``100 * n`` sweeps.  Values are sorted by
    (real, imag) so output order is reproducible.
    """
    a = as_matrix(M, "M", square=True)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n == 1:
        return np.array([complex(a[0, 0])])
    H = hessenberg(_balance(a.copy()))
    ev = _hqr(H, max_sweeps=100 * n)
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


def spectral_radius(M) -> float:
    ev = eig_general(M)
    return float(np.max(np.abs(ev))) if ev.size else 0.0
