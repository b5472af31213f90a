import math

import numpy as np
import pytest

from minimax_newton.analysis import asymptotic_rate, empirical_rate, hessian_blocks, preconditioner
from minimax_newton.errors import ArgumentError
from minimax_newton.oracle import Point
from minimax_newton.problems import GaussianMeanGAN, QuadraticMinimax, SinProduct, SyntheticQuartic
from minimax_newton.solvers import (
    Algorithm,
    Mode,
    SolverSpec,
    StepState,
    StopRule,
    run,
    step,
    with_mode,
)

Q1 = QuadraticMinimax.q1()
ALL = list(Algorithm)


def spec(algo, **kw):
    base = dict(alpha_L=0.1, alpha_F=0.1)
    base.update(kw)
    return SolverSpec(algo, **base)


def one(oracle, sp, x, y, prev=None):
    z = Point(x, y)
    return step(oracle, StepState(z, prev), sp)


# -- spec validation --------------------------------------------------------------


def test_spec_defaults_and_modes():
    assert SolverSpec(Algorithm.GDN, alpha_L=0.1).mode is Mode.ALTERNATING
    assert SolverSpec(Algorithm.CN).mode is Mode.ALTERNATING
    assert SolverSpec(Algorithm.GDA, alpha_L=0.1, alpha_F=0.1).mode is Mode.SIMULTANEOUS
    assert SolverSpec("FR", mode="alternating", alpha_L=0.1, alpha_F=0.1).alternating
    assert with_mode(SolverSpec(Algorithm.CN), "simultaneous").mode is Mode.SIMULTANEOUS


@pytest.mark.parametrize("kw", [
    dict(algorithm="GDA", alpha_L=0.1),
    dict(algorithm="GDN"),
    dict(algorithm="GDA_K", alpha_L=0.1, alpha_F=0.1, k=0),
    dict(algorithm="GDN_MOMENTUM", alpha_L=0.1, beta=1.0),
    dict(algorithm="CN", gamma_x=1.5),
    dict(algorithm="CN", gamma_y=0.0),
    dict(algorithm="CN", lambda_x=-1.0),
    dict(algorithm="NOPE"),
    dict(algorithm="GDA", alpha_L=-0.1, alpha_F=0.1),
])
def test_spec_rejects_invalid(kw):
    with pytest.raises(ArgumentError):
        SolverSpec(**kw)


def test_newton_steps_ignore_alpha_F():
    a = one(Q1, SolverSpec(Algorithm.CN), [1.0], [0.3]).z
    b = one(Q1, SolverSpec(Algorithm.CN, alpha_F=7.0), [1.0], [0.3]).z
    assert a == b


# -- closed-form single steps -----------------------------------------------------


def test_gda_q1():
    z = one(Q1, spec("GDA"), [1.0], [1.0]).z
    np.testing.assert_allclose(z.vector, [0.4, 1.0], atol=1e-15)


def test_gda_bilinear_rotation():
    o = QuadraticMinimax([[0.0]], [[0.0]], [[1.0]], require_slmm=False)
    s = spec("GDA")
    z = one(o, s, [1.0], [0.0]).z
    np.testing.assert_allclose(z.vector, [1.0, 0.1], atol=1e-15)
    st = StepState.initial(Point([1.0], [0.0]))
    for _ in range(20):
        new = step(o, st, s)
        assert new.z.norm() / st.z.norm() == pytest.approx(math.sqrt(1.01), rel=1e-12)
        st = new


def test_gda_k_equals_gda_alternating_for_k1():
    a = one(Q1, spec("GDA_K", k=1), [0.7], [-0.2]).z
    b = one(Q1, spec("GDA", mode="alternating"), [0.7], [-0.2]).z
    assert a == b


def test_gda_k_follower_reaches_best_response():
    z = one(Q1, spec("GDA_K", k=200), [1.0], [1.0]).z
    assert z.x[0] == pytest.approx(0.4)
    assert abs(z.y[0] - 0.4) < 0.8 ** 200


@pytest.mark.parametrize("mode", ["simultaneous", "alternating"])
def test_tgda_q1(mode):
    z = one(Q1, spec("TGDA", mode=mode), [1.0], [0.0]).z
    assert z.x[0] == pytest.approx(0.4, abs=1e-12)
    xt = 1.0 if mode == "simultaneous" else 0.4
    assert z.y[0] == pytest.approx(0.1 * Q1.grad_y(Point([xt], [0.0]))[0], abs=1e-12)


def test_tgda_x_equals_gda_when_follower_stationary():
    a = one(Q1, spec("TGDA"), [1.0], [1.0]).z
    b = one(Q1, spec("GDA"), [1.0], [1.0]).z
    assert a.x[0] == pytest.approx(b.x[0], abs=1e-14)


def test_fr_q1():
    z = one(Q1, spec("FR"), [1.0], [0.0]).z
    # leader takes a plain gradient step: d_x f(1, 0) = 4
    np.testing.assert_allclose(z.vector, [0.6, -0.2], atol=1e-12)


def test_fr_equals_transposed_preconditioner_step():
    o = SyntheticQuartic()
    z = Point([0.05, -0.02], [0.03, 0.01])
    aL, aF = 0.08, 0.5
    # P built from the Hessian blocks at the input point reproduces the step exactly
    hb = hessian_blocks(Q1, Point([0.3], [0.2]))
    P = preconditioner(hb, 0.1, 0.1)
    zq = Point([0.3], [0.2])
    g = np.concatenate([Q1.grad_x(zq), Q1.grad_y(zq)])
    got = one(Q1, spec("FR"), [0.3], [0.2]).z.vector
    np.testing.assert_allclose(got, zq.vector + P.T @ g, atol=1e-12)
    # also on a nonquadratic problem
    hb = hessian_blocks(o, z)
    P = preconditioner(hb, aL, aF)
    g = np.concatenate([o.grad_x(z), o.grad_y(z)])
    got = step(o, StepState.initial(z), spec("FR", alpha_L=aL, alpha_F=aF)).z.vector
    np.testing.assert_allclose(got, z.vector + P.T @ g, atol=1e-10)


def test_tgda_equals_preconditioner_step():
    z = Point([0.05, -0.02], [0.03, 0.01])
    o = SyntheticQuartic()
    P = preconditioner(hessian_blocks(o, z), 0.08, 0.5)
    g = np.concatenate([o.grad_x(z), o.grad_y(z)])
    got = step(o, StepState.initial(z), spec("TGDA", alpha_L=0.08, alpha_F=0.5)).z.vector
    np.testing.assert_allclose(got, z.vector + P @ g, atol=1e-10)


def test_gdn_q1_lands_on_best_response():
    z = one(Q1, spec("GDN"), [1.0], [1.0]).z
    np.testing.assert_allclose(z.vector, [0.4, 0.4], atol=1e-12)


def test_gdn_large_regularization_is_gradient_ascent():
    lam = 1e6
    o = GaussianMeanGAN("ill", N=2000, seed=1)
    z = Point([0.2, -0.1], [0.3, 0.4])
    sp = SolverSpec(Algorithm.GDN, alpha_L=0.05, gamma_y=1.0, lambda_y=lam)
    new = step(o, StepState.initial(z), sp).z
    xt = new.x  # alternating: follower sees x'
    expected = z.y + (1.0 / lam) * o.grad_y(Point(xt, z.y))
    assert np.linalg.norm(new.y - expected) / np.linalg.norm(expected - z.y) < 1e-4


def test_cn_q1_one_step():
    z = one(Q1, SolverSpec(Algorithm.CN), [1.0], [1.0]).z
    np.testing.assert_allclose(z.vector, [0.0, 0.0], atol=1e-12)


def test_cn_quartic_reference_run():
    o = SyntheticQuartic()
    tr = run(o, SolverSpec(Algorithm.CN), Point([0.02, 0.04], [0.03, 0.05]), StopRule(max_iter=10, dist_tol=1e-8))
    assert tr.termination_reason == "dist_tol"
    assert tr.rows[-1].dist < 1e-8


def test_cn_matches_dense_reference():
    # explicit Schur complement and dense solves as an independent reference for the augmented-system route
    o = SyntheticQuartic()
    z = ours = Point([0.02, 0.04], [0.03, 0.05])
    for _ in range(5):
        H = hessian_blocks(o, z)
        D = H.xx - H.xy @ np.linalg.solve(H.yy, H.yx)
        x = z.x - np.linalg.solve(D, o.grad_x(z))
        y = z.y - np.linalg.solve(hessian_blocks(o, Point(x, z.y)).yy, o.grad_y(Point(x, z.y)))
        z = Point(x, y)
        ours = step(o, StepState.initial(ours), SolverSpec(Algorithm.CN)).z
        assert np.linalg.norm(ours.vector - z.vector) <= 1e-12 * (1 + z.norm())


def test_momentum_beta0_is_gdn():
    a = one(Q1, spec("GDN_MOMENTUM", beta=0.0), [0.7], [0.1], prev=Point([0.9], [0.1])).z
    b = one(Q1, spec("GDN"), [0.7], [0.1]).z
    assert a == b


def test_momentum_uses_history():
    prev = Point([0.9], [0.1])
    a = one(Q1, spec("GDN_MOMENTUM", beta=0.5), [0.7], [0.1], prev=prev)
    b = one(Q1, spec("GDN"), [0.7], [0.1])
    assert a.z.x[0] == pytest.approx(b.z.x[0] + 0.5 * (0.7 - 0.9))
    assert a.z_prev == Point([0.7], [0.1])


def test_tgd_newton_q1():
    z = one(Q1, spec("TGD_NEWTON"), [1.0], [0.0]).z
    np.testing.assert_allclose(z.vector, [0.4, 1.0], atol=1e-12)


def test_tgd_newton_x_equals_gdn_when_follower_stationary():
    a = one(Q1, spec("TGD_NEWTON"), [1.0], [1.0]).z
    b = one(Q1, spec("GDN"), [1.0], [1.0]).z
    assert a.x[0] == pytest.approx(b.x[0], abs=1e-14)


def test_cn_total_q1():
    # simultaneous: follower lands on r(x_t); the pair reaches (0, 0) on the next step
    s = SolverSpec(Algorithm.CN_TOTAL)
    z1 = one(Q1, s, [1.0], [1.0]).z
    np.testing.assert_allclose(z1.vector, [0.0, 1.0], atol=1e-12)
    z2 = one(Q1, s, z1.x, z1.y).z
    np.testing.assert_allclose(z2.vector, [0.0, 0.0], atol=1e-12)
    z = one(Q1, with_mode(s, "alternating"), [1.0], [1.0]).z
    np.testing.assert_allclose(z.vector, [0.0, 0.0], atol=1e-12)


def test_cn_total_equals_cn_when_follower_stationary():
    a = one(Q1, SolverSpec(Algorithm.CN_TOTAL, mode="alternating"), [1.0], [1.0]).z
    b = one(Q1, SolverSpec(Algorithm.CN), [1.0], [1.0]).z
    np.testing.assert_allclose(a.vector, b.vector, atol=1e-14)


def test_evtushenko_q1():
    z = one(Q1, SolverSpec(Algorithm.EVTUSHENKO_CN), [1.0], [1.0]).z
    np.testing.assert_allclose(z.vector, [0.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_evtushenko_on_quadratics(seed):
    o = QuadraticMinimax.with_spectra([1.0, 3.0, 7.0], [2.0, 5.0])
    g = np.random.Generator(np.random.PCG64(seed))
    x, y = g.standard_normal(3), g.standard_normal(2)
    a = one(o, SolverSpec(Algorithm.EVTUSHENKO_CN), x, y).z
    # the linearized follower correction is exact, so this is CN-total with an alternating follower
    b = one(o, SolverSpec(Algorithm.CN_TOTAL, mode="alternating"), x, y).z
    np.testing.assert_allclose(a.vector, b.vector, atol=1e-10)
    np.testing.assert_allclose(a.vector, 0.0, atol=1e-10)
    # and plain CN whenever the follower is already stationary
    yr = np.linalg.solve(o.B, -o.C.T @ x)
    a = one(o, SolverSpec(Algorithm.EVTUSHENKO_CN), x, yr).z
    b = one(o, SolverSpec(Algorithm.CN), x, yr).z
    np.testing.assert_allclose(a.vector, b.vector, atol=1e-10)


# -- properties ------------------------------------------------------------------


@pytest.mark.parametrize("algo", ALL)
@pytest.mark.parametrize("mode", ["simultaneous", "alternating"])
def test_fixed_point_invariance(algo, mode):
    for o in (Q1, SyntheticQuartic(), SinProduct()):
        z = o.known_solution()
        sp = SolverSpec(algo, mode=mode, alpha_L=0.05, alpha_F=0.2, k=3, beta=0.3)
        new = step(o, StepState.initial(z), sp).z
        assert np.linalg.norm(new.vector - z.vector) <= 1e-10


def test_gda_k_tracks_gdn():
    o = QuadraticMinimax.with_spectra([1.0, 4.0], [2.0, 3.0])
    aF = 0.9 * 2 / 3.0
    gk = SolverSpec(Algorithm.GDA_K, alpha_L=0.1, alpha_F=aF, k=500)
    gdn = SolverSpec(Algorithm.GDN, alpha_L=0.1)
    a = b = StepState.initial(Point([1.0, -0.5], [0.3, 0.2]))
    for _ in range(50):
        a, b = step(o, a, gk), step(o, b, gdn)
        assert np.max(np.abs(a.z.x - b.z.x)) < 1e-6


@pytest.mark.parametrize("mode", ["simultaneous", "alternating"])
def test_newton_follower_affine_invariance(mode):
    A = np.array([[3.0, 0.5], [0.5, 2.0]])
    B = np.array([[-2.0, 0.3], [0.3, -1.0]])
    C = np.array([[1.0, 0.2], [-0.4, 0.7]])
    S = np.array([[2.0, 1.0], [0.0, 0.5]])
    o = QuadraticMinimax(A, B, C)
    os_ = QuadraticMinimax(A, S.T @ B @ S, C @ S)
    sp = SolverSpec(Algorithm.GDN, mode=mode, alpha_L=0.1)
    x0, y0 = np.array([1.0, -1.0]), np.array([0.5, 0.25])
    a = StepState.initial(Point(x0, y0))
    b = StepState.initial(Point(x0, np.linalg.solve(S, y0)))
    for _ in range(15):
        a, b = step(o, a, sp), step(os_, b, sp)
        np.testing.assert_allclose(b.z.x, a.z.x, atol=1e-12)
        np.testing.assert_allclose(S @ b.z.y, a.z.y, atol=1e-12)
        # gradients transform covariantly: d_y f' = S' d_y f
        gy, gys = o.grad_y(a.z), os_.grad_y(b.z)
        assert abs(np.linalg.norm(np.linalg.solve(S.T, gys)) - np.linalg.norm(gy)) < 1e-9


def test_affine_invariance_gradient_norm_orthogonal_map():
    c, s = math.cos(0.3), math.sin(0.3)
    S = np.array([[c, -s], [s, c]])
    o = QuadraticMinimax.with_spectra([1.0, 4.0], [2.0, 3.0])
    os_ = QuadraticMinimax(o.A, S.T @ o.B @ S, o.C @ S)
    sp = SolverSpec(Algorithm.GDN, mode="simultaneous", alpha_L=0.1)
    a = StepState.initial(Point([1.0, 0.5], [0.2, -0.1]))
    b = StepState.initial(Point([1.0, 0.5], S.T @ np.array([0.2, -0.1])))
    for _ in range(15):
        a, b = step(o, a, sp), step(os_, b, sp)
        assert abs(np.linalg.norm(o.grad_y(a.z)) - np.linalg.norm(os_.grad_y(b.z))) < 1e-9


def test_simultaneous_gdn_faster_than_alternating():
    # d_xx f = 0 at the solution, D_xx = 2, alpha * 2 = 0.2 < (3 - sqrt 5)/2
    o = QuadraticMinimax([[0.0]], [[-2.0]], [[2.0]])
    z = o.known_solution()
    sim = asymptotic_rate(SolverSpec(Algorithm.GDN, mode="simultaneous", alpha_L=0.1), o, z)
    alt = asymptotic_rate(SolverSpec(Algorithm.GDN, mode="alternating", alpha_L=0.1), o, z)
    assert sim < alt
    assert alt == pytest.approx(0.8, abs=1e-6)


# -- run ---------------------------------------------------------------------------


def test_run_max_iter_zero():
    tr = run(Q1, SolverSpec(Algorithm.CN), Point([1.0], [1.0]), StopRule(max_iter=0))
    assert len(tr) == 1 and tr.rows[0].iter == 0
    assert tr.termination_reason == "max_iter"


def test_run_cn_quadratic_grad_tol():
    tr = run(Q1, SolverSpec(Algorithm.CN), Point([1.0], [1.0]), StopRule(max_iter=10, grad_tol=1e-12))
    assert tr.termination_reason == "grad_tol" and tr.rows[-1].iter <= 2


def test_run_trace_invariants():
    tr = run(Q1, spec("GDN"), Point([1.0], [1.0]), StopRule(max_iter=25))
    assert len(tr) == 26
    assert [r.iter for r in tr.rows] == list(range(26))
    assert tr.rows[0].dist == pytest.approx(math.sqrt(2))
    assert all(r.cg_iters_x == 0 for r in tr.rows)
    assert tr.rows[1].cg_iters_y >= 1


def test_run_is_deterministic():
    o = GaussianMeanGAN("ill", N=2000, seed=3)
    z0 = Point([0.1, 0.2], [-0.1, 0.05])
    a = run(o, spec("GDN", alpha_L=0.05), z0, StopRule(max_iter=20))
    b = run(o, spec("GDN", alpha_L=0.05), z0, StopRule(max_iter=20))
    assert [(r.f, r.grad_x_norm, r.grad_y_norm) for r in a.rows] == [(r.f, r.grad_x_norm, r.grad_y_norm) for r in b.rows]


def test_run_divergence_guard_returns_partial_trace():
    o = QuadraticMinimax([[0.0]], [[0.0]], [[1.0]], require_slmm=False)
    tr = run(o, spec("GDA", alpha_L=1.0, alpha_F=1.0), Point([1.0], [0.0]), StopRule(max_iter=500))
    assert tr.termination_reason == "numerical_failure"
    assert "divergence" in tr.message
    assert len(tr) < 501


def test_run_nan_gradient_is_numerical_failure():
    class Bad(type(Q1)):
        def grad_x(self, z):
            return np.array([np.nan]) if z.x[0] < 0.5 else super().grad_x(z)

    o = Bad(Q1.A, Q1.B, Q1.C)
    tr = run(o, spec("GDA"), Point([1.0], [1.0]), StopRule(max_iter=5))
    assert tr.termination_reason == "numerical_failure"
    assert tr.message.startswith("iteration 2")
    assert len(tr) == 2


def test_run_known_solution_override():
    tr = run(Q1, spec("GDN"), Point([1.0], [1.0]), StopRule(max_iter=1, known_solution=Point([1.0], [1.0])))
    assert tr.rows[0].dist == 0.0


def test_run_dist_tol():
    tr = run(Q1, spec("GDN", alpha_L=0.1), Point([1.0], [1.0]), StopRule(max_iter=200, dist_tol=1e-6))
    assert tr.termination_reason == "dist_tol"
    assert tr.rows[-1].dist <= 1e-6 < tr.rows[-2].dist


def test_gdn_rate_on_quadratic():
    tr = run(Q1, spec("GDN", alpha_L=0.1), Point([1.0], [1.0]), StopRule(max_iter=40))
    assert empirical_rate(tr, burn_in=5).linear_rate == pytest.approx(0.4, rel=1e-6)
