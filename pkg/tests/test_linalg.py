import warnings

import numpy as np
import pytest

from minimax_newton.errors import ArgumentError, NumericalFailure, SingularityError, SingularityWarning
from minimax_newton.linalg import (
    LinearOperator,
    block_inverse,
    cg_normal_solve,
    dense_inverse,
    dense_solve,
    eig_general,
    eig_symmetric,
    eigh_symmetric,
    is_symmetric,
    spectral_radius,
)


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def sorted_c(v):
    v = np.asarray(v, dtype=complex)
    return v[np.lexsort((v.imag, v.real))]


# -- LinearOperator ---------------------------------------------------------


def test_operator_reconstructs_columns_exactly():
    M = rng(1).standard_normal((4, 4))
    op = LinearOperator.from_matrix(M)
    assert np.array_equal(op.to_dense(), M)


def test_operator_linearity_and_adjoint():
    g = rng(2)
    M = g.standard_normal((5, 5))
    op = LinearOperator.from_matrix(M)
    for _ in range(10):
        u, v, w = g.standard_normal((3, 5))
        a, b = g.standard_normal(2)
        lhs = op.apply(a * u + b * v) - a * op.apply(u) - b * op.apply(v)
        assert np.linalg.norm(lhs) <= 1e-10 * (abs(a) * np.linalg.norm(u) + abs(b) * np.linalg.norm(v))
        ip1, ip2 = op.apply(u) @ w, u @ op.apply_transpose(w)
        assert abs(ip1 - ip2) <= 1e-10 * max(1.0, abs(ip1))


# -- CG on the normal equations ----------------------------------------------


def test_cg_identity():
    res = cg_normal_solve(LinearOperator.from_matrix(np.eye(3)), [1.0, 2.0, 3.0], max_iter=5)
    np.testing.assert_allclose(res.solution, [1, 2, 3])
    assert res.iterations <= 1
    assert res.converged


def test_cg_diagonal_indefinite():
    res = cg_normal_solve(LinearOperator.from_matrix(np.diag([2.0, -3.0])), [4.0, 9.0], max_iter=10)
    np.testing.assert_allclose(res.solution, [2.0, -3.0], rtol=1e-12)


def test_cg_random_symmetric_indefinite_matches_lu():
    g = rng(3)
    Q, _ = np.linalg.qr(g.standard_normal((8, 8)))
    eigs = np.array([1.0, -2.0, 3.0, -5.0, 8.0, -13.0, 20.0, -40.0])  # condition number 40
    A = Q @ np.diag(eigs) @ Q.T
    b = g.standard_normal(8)
    res = cg_normal_solve(LinearOperator.from_matrix(A), b, max_iter=64)
    x_lu = dense_solve(A, b)
    assert np.linalg.norm(res.solution - x_lu) / np.linalg.norm(x_lu) < 1e-8


def test_cg_finite_termination_n_steps():
    g = rng(4)
    A = g.standard_normal((6, 6)) + 6 * np.eye(6)
    b = g.standard_normal(6)
    res = cg_normal_solve(LinearOperator.from_matrix(A), b, max_iter=6, tol=0.0)
    np.testing.assert_allclose(res.solution, np.linalg.solve(A, b), rtol=1e-9, atol=1e-12)
    assert res.iterations <= 6


def test_cg_respects_max_iter_and_converged_implies_tol():
    g = rng(5)
    A = g.standard_normal((10, 10))
    b = g.standard_normal(10)
    res = cg_normal_solve(LinearOperator.from_matrix(A), b, max_iter=3, tol=1e-3)
    assert res.iterations <= 3
    if res.converged:
        assert res.final_residual_norm <= 1e-3


def test_cg_zero_rhs_returns_zero_without_iterating():
    res = cg_normal_solve(LinearOperator.from_matrix(np.diag([1.0, -1.0])), [0.0, 0.0], max_iter=4)
    assert res.iterations == 0 and res.converged
    assert np.array_equal(res.solution, np.zeros(2))


def test_cg_definite_fast_path_agrees():
    g = rng(6)
    B = g.standard_normal((6, 6))
    A = B @ B.T + np.eye(6)
    b = g.standard_normal(6)
    a = cg_normal_solve(LinearOperator.from_matrix(A, definite=1), b, max_iter=30)
    c = cg_normal_solve(LinearOperator.from_matrix(-A, definite=-1), -b, max_iter=30)
    x = np.linalg.solve(A, b)
    np.testing.assert_allclose(a.solution, x, rtol=1e-9)
    np.testing.assert_allclose(c.solution, x, rtol=1e-9)


def test_cg_dimension_mismatch():
    op = LinearOperator.from_matrix(np.eye(3))
    with pytest.raises(ArgumentError):
        cg_normal_solve(op, [1.0, 2.0], max_iter=3)
    with pytest.raises(ArgumentError):
        cg_normal_solve(op, [1.0, 2.0, 3.0], max_iter=0)
    with pytest.raises(ArgumentError):
        cg_normal_solve(op, [1.0, 2.0, 3.0], max_iter=2, tol=-1.0)
    with pytest.raises(ArgumentError):
        cg_normal_solve(LinearOperator(2, 3, lambda v: v, lambda v: v), [1.0, 2.0], max_iter=2)


def test_cg_nan_reports_iteration():
    calls = {"n": 0}

    def apply(v):
        calls["n"] += 1
        return np.array([1.0, 3.0]) * v * (np.nan if calls["n"] >= 2 else 1.0)

    op = LinearOperator(2, 2, apply, lambda v: np.array([1.0, 3.0]) * v)
    with pytest.raises(NumericalFailure) as exc:
        cg_normal_solve(op, [1.0, 1.0], max_iter=5)
    assert exc.value.iteration is not None


def test_cg_singular_warning():
    A = np.diag([1.0, 1e-14])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        res = cg_normal_solve(LinearOperator.from_matrix(A), [1.0, 1.0], max_iter=10)
    assert res.suspect_singular
    assert any(issubclass(x.category, SingularityWarning) for x in w)


def test_cg_rejects_nan_rhs():
    with pytest.raises(ArgumentError):
        cg_normal_solve(LinearOperator.from_matrix(np.eye(2)), [np.nan, 1.0], max_iter=3)


# -- dense solves -------------------------------------------------------------


def test_dense_solve_trivial():
    np.testing.assert_array_equal(dense_solve(np.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3])
    np.testing.assert_allclose(dense_solve([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0]), [1.0, 2.0])


def test_dense_solve_residual_small():
    g = rng(7)
    for _ in range(10):
        M = g.standard_normal((7, 7))
        b = g.standard_normal(7)
        x = dense_solve(M, b)
        cond = np.linalg.cond(M)
        assert np.linalg.norm(M @ x - b) <= 1e-10 * np.linalg.norm(b) * cond


def test_dense_solve_agrees_with_cg_on_spd():
    g = rng(8)
    for _ in range(10):
        B = g.standard_normal((6, 6))
        A = B @ B.T + 0.5 * np.eye(6)
        b = g.standard_normal(6)
        x = dense_solve(A, b)
        y = cg_normal_solve(LinearOperator.from_matrix(A), b, max_iter=200).solution
        assert np.linalg.norm(x - y) / np.linalg.norm(x) < 1e-8


def test_dense_solve_singular():
    with pytest.raises(SingularityError):
        dense_solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])
    with pytest.raises(SingularityError):
        dense_solve(np.zeros((2, 2)), [1.0, 1.0])


def test_dense_inverse_matches_numpy():
    M = rng(9).standard_normal((5, 5))
    np.testing.assert_allclose(dense_inverse(M), np.linalg.inv(M), atol=1e-10)


# -- block inverse ------------------------------------------------------------


def test_block_inverse_block_diagonal():
    A = np.array([[2.0, 1.0], [0.0, 3.0]])
    D = np.array([[4.0]])
    inv = block_inverse(A, np.zeros((2, 1)), np.zeros((1, 2)), D)
    np.testing.assert_allclose(inv[:2, :2], np.linalg.inv(A))
    np.testing.assert_allclose(inv[2:, 2:], [[0.25]])
    assert np.all(inv[:2, 2:] == 0) and np.all(inv[2:, :2] == 0)


def test_block_inverse_scalar_blocks():
    inv = block_inverse([[2.0]], [[1.0]], [[1.0]], [[2.0]])
    np.testing.assert_allclose(inv, np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3, atol=1e-15)
    assert inv[0, 0] == pytest.approx(2 / 3)


def test_block_inverse_random_6x6():
    g = rng(10)
    M = g.standard_normal((6, 6))
    inv = block_inverse(M[:3, :3], M[:3, 3:], M[3:, :3], M[3:, 3:])
    assert np.max(np.abs(inv - np.linalg.inv(M))) < 1e-10
    assert np.max(np.abs(inv @ M - np.eye(6))) < 1e-9


def test_block_inverse_names_singular_block():
    with pytest.raises(SingularityError) as exc:
        block_inverse([[1.0]], [[1.0]], [[1.0]], [[0.0]])
    assert exc.value.block == "D"
    with pytest.raises(SingularityError) as exc:
        block_inverse([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert exc.value.block == "S"


def test_block_inverse_nonconformable():
    with pytest.raises(ArgumentError):
        block_inverse(np.eye(2), np.ones((2, 2)), np.ones((1, 2)), np.eye(1))


# -- eigenvalues ----------------------------------------------------------------


def test_eig_symmetric_examples():
    np.testing.assert_allclose(eig_symmetric(np.eye(3)), [1, 1, 1])
    np.testing.assert_allclose(eig_symmetric(np.diag([1.0, 0.04])), [0.04, 1.0])
    np.testing.assert_allclose(eig_symmetric([[2.0, 1.0], [1.0, 2.0]]), [1.0, 3.0], atol=1e-14)


def test_eig_symmetric_rejects_asymmetric():
    with pytest.raises(ArgumentError):
        eig_symmetric([[1.0, 2.0], [0.0, 1.0]])
    assert is_symmetric([[1.0, 1.0 + 1e-13], [1.0, 1.0]])
    assert not is_symmetric([[1.0, 1.0 + 1e-9], [1.0, 1.0]])


def test_eig_symmetric_against_numpy_and_eigenvectors():
    g = rng(11)
    for n in (2, 5, 12, 30):
        B = g.standard_normal((n, n))
        S = B + B.T
        w, V = eigh_symmetric(S)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(S), atol=1e-11 * np.abs(w).max())
        assert abs(w.sum() - np.trace(S)) <= 1e-10 * max(1.0, np.abs(S).sum())
        for i in range(n):
            assert np.linalg.norm(S @ V[:, i] - w[i] * V[:, i]) < 1e-8


def test_eig_general_examples():
    np.testing.assert_allclose(sorted_c(eig_general([[0.0, -1.0], [1.0, 0.0]])), [-1j, 1j], atol=1e-14)
    np.testing.assert_allclose(sorted_c(eig_general([[2.0, 5.0], [0.0, 3.0]])), [2, 3], atol=1e-14)
    companion = [[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    np.testing.assert_allclose(sorted_c(eig_general(companion)), [1, 2, 3], atol=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 10, 20, 40])
def test_eig_general_against_numpy(n):
    g = rng(100 + n)
    M = g.standard_normal((n, n))
    ev = eig_general(M)
    assert ev.size == n
    np.testing.assert_allclose(sorted_c(ev), sorted_c(np.linalg.eigvals(M)), atol=1e-9)
    det = np.linalg.det(M)
    assert abs(np.prod(ev) - det) <= 1e-8 * max(1.0, abs(det))


def test_eig_general_badly_scaled_and_defective():
    J = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
    assert np.allclose(eig_general(J), 1.0, atol=1e-4)
    M = np.array([[1.0, 1e6], [1e-6, 2.0]])
    np.testing.assert_allclose(sorted_c(eig_general(M)), sorted_c(np.linalg.eigvals(M)), atol=1e-9)


def test_spectral_radius_examples():
    assert spectral_radius(np.eye(4)) == pytest.approx(1.0)
    a = 0.1
    assert spectral_radius([[1.0, -a], [a, 1.0]]) == pytest.approx(np.sqrt(1.01), abs=1e-14)


def test_spectral_radius_gda_jacobian_q1():
    # simultaneous GDA on f = 2x^2 - y^2 + 2xy with step 0.1
    J = np.array([[0.6, -0.2], [0.2, 0.8]])
    tr, det = np.trace(J), np.linalg.det(J)
    disc = complex(tr * tr - 4 * det)
    roots = [(tr + np.sqrt(disc)) / 2, (tr - np.sqrt(disc)) / 2]
    assert spectral_radius(J) == pytest.approx(max(abs(r) for r in roots), abs=1e-10)
