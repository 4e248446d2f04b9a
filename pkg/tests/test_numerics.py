import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import least_squares as sp_least_squares

from fbgshape.core import InvariantError, NumericalError
from fbgshape.numerics import (
    ConvergenceError,
    SingularJacobianError,
    cumulative_simpson,
    finite_difference_jacobian,
    integrate,
    least_squares,
    pinv,
    pinv_solve,
    spline_fit,
)
from fbgshape.sensing import build_design_matrix, forward_wavelengths, AaState

from .oracles import natural_spline, quad, svd_pinv


# ------------------------------------------------------------------- pinv

def test_identity_block():
    np.testing.assert_allclose(pinv_solve([[1, 0, 0], [0, 1, 0]], [3, 4]), [3, 4, 0])


def test_rank_one_matches_svd_oracle():
    A = np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    b = np.array([2.0, 2.0])
    np.testing.assert_allclose(pinv_solve(A, b), svd_pinv(A) @ b, atol=1e-14)
    np.testing.assert_allclose(pinv(A), np.linalg.pinv(A), atol=1e-14)


def test_design_matrix_solution_middle_component(geometry):
    frame = forward_wavelengths(geometry, [AaState(0.02, 0.0)] * 3)
    lam, lam0 = frame.wavelengths[:, 0], geometry.lambda0[:, 0]
    B = pinv_solve(build_design_matrix(geometry, 0), (lam - lam0) / lam0)
    assert B[1] == pytest.approx(0.02, rel=1e-10)
    assert abs(B[0]) < 1e-12


def test_pinv_rejects_non_finite():
    with pytest.raises(NumericalError):
        pinv_solve([[np.nan, 0, 0], [0, 1, 0]], [1, 1])
    with pytest.raises(NumericalError):
        pinv_solve([[1, 0, 0], [0, 1, 0]], [np.inf, 1])


def test_pinv_stack_matches_loop():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(5, 2, 3))
    P = pinv(A)
    for i in range(5):
        np.testing.assert_allclose(P[i], np.linalg.pinv(A[i]), atol=1e-12)


@given(arrays(float, (2, 3), elements=st.floats(-10, 10)), arrays(float, 3, elements=st.floats(-10, 10)),
       st.floats(-5, 5))
def test_min_norm_consistent_solution(A, x_true, t):
    if np.linalg.svd(A, compute_uv=False)[-1] < 1e-3:
        return
    b = A @ x_true
    x = pinv_solve(A, b)
    np.testing.assert_allclose(A @ x, b, rtol=1e-10, atol=1e-10 * np.abs(b).max(initial=1))
    n = np.cross(A[0], A[1])
    assert np.linalg.norm(x) <= np.linalg.norm(x + t * n) + 1e-12
    assert abs(x @ n) <= 1e-9 * np.linalg.norm(n) * max(1.0, np.linalg.norm(x))


# ---------------------------------------------------------------- splines

def test_constant_data():
    sp = spline_fit([0, 1], [5, 5])
    np.testing.assert_allclose(sp(np.linspace(-2, 3, 11)), 5.0)


def test_hold_endpoint():
    sp = spline_fit([0, 1, 2], [1, 4, 2])
    assert sp(-1.0) == 1.0
    assert sp(7.0) == 2.0
    assert sp.derivative(-1.0) == 0.0


def test_quadratic_samples_match_natural_oracle():
    knots = np.array([0.0, 1.3, 2.0])
    vals = knots ** 2
    q = np.linspace(0, 2, 50)
    np.testing.assert_allclose(spline_fit(knots, vals)(q), natural_spline(knots, vals)(q), atol=1e-12)


@given(st.lists(st.floats(0.1, 5), min_size=1, max_size=8), st.data())
def test_spline_matches_oracle(gaps, data):
    knots = np.concatenate([[0.0], np.cumsum(gaps)])
    vals = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=len(knots), max_size=len(knots))))
    sp = spline_fit(knots, vals)
    ref = natural_spline(knots, vals)
    q = np.linspace(knots[0], knots[-1], 37)
    np.testing.assert_allclose(sp(q), ref(q), atol=1e-11)
    np.testing.assert_allclose(sp(knots), vals, rtol=1e-12, atol=1e-13)
    assert abs(sp.derivative(knots[0], 2)) < 1e-9
    np.testing.assert_allclose(sp.derivative(knots[-1] - 1e-12, 2), 0.0, atol=1e-9)


def test_c2_continuity():
    knots = np.array([0.0, 1.0, 2.5, 3.0])
    sp = spline_fit(knots, [0.0, 1.0, -1.0, 0.5])
    for k in knots[1:-1]:
        for order in (1, 2):
            assert sp.derivative(k - 1e-9, order) == pytest.approx(sp.derivative(k + 1e-9, order), abs=1e-6)


def test_clamped_end_slopes():
    sp = spline_fit([0.0, 1.0, 2.0], [0.0, 1.0, 0.0], start_slope=0.5, end_slope=-2.0)
    assert sp.derivative(0.0) == pytest.approx(0.5)
    assert sp.derivative(2.0 - 1e-12) == pytest.approx(-2.0)


@pytest.mark.parametrize("knots", [[0.0], [0.0, 0.0], [1.0, 0.5, 2.0]])
def test_bad_knots(knots):
    with pytest.raises(InvariantError):
        spline_fit(knots, np.zeros(len(knots)))


# ------------------------------------------------------------- quadrature

def test_integrate_constant():
    assert integrate(lambda s: np.ones_like(s), 0, 1) == pytest.approx(1.0, abs=1e-15)


def test_integrate_sine():
    assert integrate(np.sin, 0, math.pi, 0.01) == pytest.approx(2.0, abs=1e-8)


def test_jig_bend_angle():
    angle = integrate(lambda s: np.full_like(s, 0.0449), 0, 35)
    assert angle == pytest.approx(1.5715, abs=1e-12)
    assert math.degrees(angle) == pytest.approx(90.0, abs=0.05)


@given(st.floats(-3, 3), st.floats(0.1, 4), st.floats(0.0, 2.0))
def test_integrate_matches_quad(a, width, w):
    f = lambda s: np.exp(-0.3 * s) * np.cos(w * s)
    assert integrate(f, a, a + width, 0.01) == pytest.approx(quad(f, a, a + width), abs=1e-8)


def test_integrate_fourth_order():
    f = lambda s: np.exp(s)
    exact = math.e - 1
    e1 = abs(integrate(f, 0, 1, 0.1) - exact)
    e2 = abs(integrate(f, 0, 1, 0.05) - exact)
    assert e1 / e2 == pytest.approx(16, rel=0.05)


def test_integrate_errors():
    with pytest.raises(InvariantError):
        integrate(np.sin, 1, 0)
    with pytest.raises(InvariantError):
        integrate(np.sin, 0, 1, 0)
    with pytest.raises(NumericalError), np.errstate(all="ignore"):
        integrate(lambda s: np.log(s - 0.5), 0, 1)


def test_cumulative_matches_quad():
    s = np.linspace(0, 3, 31)
    F = cumulative_simpson(np.cos, s)
    np.testing.assert_allclose(F, np.sin(s), atol=1e-8)


# ---------------------------------------------------------- least squares

def test_linear_single_step():
    res = least_squares(lambda x: x - 3.0, [0.0])
    assert res.x[0] == pytest.approx(3.0, abs=1e-14)
    assert res.iterations <= 2


def test_rosenbrock():
    fn = lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    res = least_squares(fn, [-1.2, 1.0])
    np.testing.assert_allclose(res.x, [1, 1], atol=1e-6)
    # coarse lattice oracle: no lattice point beats the solver
    g = np.linspace(-2, 2, 81)
    best = min(np.sum(fn(np.array([a, b])) ** 2) for a in g for b in g)
    assert np.sum(fn(res.x) ** 2) <= best


def test_friction_scalar_fit():
    rng = np.random.default_rng(0)
    kappa_true = rng.uniform(0.005, 0.045, 20)
    kappa_raw = kappa_true / 0.9
    res = least_squares(lambda c: c[0] * kappa_raw - kappa_true, [1.0])
    assert res.x[0] == pytest.approx(0.9, abs=1e-6)


def test_matches_scipy_on_exponential_fit():
    t = np.linspace(0, 2, 30)
    y = 2.5 * np.exp(-1.3 * t) + 0.4
    fn = lambda p: p[0] * np.exp(-p[1] * t) + p[2] - y
    ours = least_squares(fn, [1.0, 1.0, 0.0])
    ref = sp_least_squares(fn, [1.0, 1.0, 0.0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    np.testing.assert_allclose(ours.x, ref.x, atol=1e-7)


def test_singular_jacobian():
    with pytest.raises(SingularJacobianError):
        least_squares(lambda x: np.array([x[0] - 1.0, x[0] + 1.0]), [0.0, 0.0])


def test_iteration_cap():
    # slowly converging problem with a tiny cap
    fn = lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    with pytest.raises(ConvergenceError):
        least_squares(fn, [-1.2, 1.0], max_iter=2)


def test_non_finite_start():
    with pytest.raises(NumericalError), np.errstate(all="ignore"):
        least_squares(lambda x: np.log(x), [-1.0])


def test_rank_deficient_keeps_unobservable_direction():
    # only x0 + x1 is observable; the minimum-norm step leaves x0 - x1 alone
    res = least_squares(lambda x: np.array([x[0] + x[1] - 2.0]), [3.0, 1.0], rcond=1e-6)
    assert res.x.sum() == pytest.approx(2.0, abs=1e-9)
    assert res.x[0] - res.x[1] == pytest.approx(2.0, abs=1e-9)


@given(arrays(float, 3, elements=st.floats(-2, 2)))
def test_jacobian_matches_analytic(x):
    fn = lambda v: np.array([np.sin(v[0]) * v[1], v[2] ** 3 + v[0], np.exp(0.5 * v[1])])
    analytic = np.array([
        [np.cos(x[0]) * x[1], np.sin(x[0]), 0],
        [1, 0, 3 * x[2] ** 2],
        [0, 0.5 * np.exp(0.5 * x[1]), 0],
    ])
    np.testing.assert_allclose(finite_difference_jacobian(fn, x), analytic, rtol=1e-6, atol=1e-8)
