import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gproa.dae import (DaeSystem, eigenvalues, is_hurwitz, jacobians, quotient_matrix,
                       reduced_matrix, regularity_check, residual, shift_to_origin,
                       solve_algebraic)
from gproa.errors import AlgebraicSolveFailure, ContractViolation, RegularityViolation


def scalar(f, g, x_star=0.0, y_star=0.0, **kw):
    return DaeSystem.at(1, 1, f, g, [x_star], [y_star], **kw)


@pytest.fixture
def linear_pair():
    # f = -x + y, g = y - 2x; equilibrium at the origin
    return scalar(lambda x, y: -x + y, lambda x, y: y - 2 * x)


def test_residual_hand_value(linear_pair):
    fv, gv = residual(linear_pair, [1.0], [2.0])
    assert fv.tolist() == [1.0] and gv.tolist() == [0.0]


def test_residual_at_equilibrium_is_zero(linear_pair):
    fv, gv = residual(linear_pair, [0.0], [0.0])
    assert np.all(fv == 0) and np.all(gv == 0)


def test_residual_shape_mismatch(linear_pair):
    with pytest.raises(ContractViolation):
        residual(linear_pair, [1.0, 2.0], [0.0])


def test_stored_equilibrium_must_solve():
    with pytest.raises(ContractViolation):
        scalar(lambda x, y: -x + y + 1, lambda x, y: y - 2 * x)


def test_solve_linear_constraint():
    s = scalar(lambda x, y: -x, lambda x, y: y - x)
    assert solve_algebraic(s, [3.5], [-10.0])[0] == pytest.approx(3.5, abs=1e-12)


def test_solve_cubic_constraint():
    s = scalar(lambda x, y: -x, lambda x, y: y ** 3 - x)
    y = solve_algebraic(s, [8.0], [1.0], tol=1e-12)
    assert y[0] == pytest.approx(2.0, abs=1e-10)


def test_solve_singular_jacobian():
    s = scalar(lambda x, y: -x, lambda x, y: y ** 2 - x,
               jac=lambda x, y: (np.array([[-1.0]]), np.zeros((1, 1)), np.array([[-1.0]]),
                                 np.array([[2 * y[0]]])))
    with pytest.raises(RegularityViolation):
        solve_algebraic(s, [1.0], [0.0])


def test_solve_no_convergence():
    # at x = -1, y^2 - x = 0 has no real root; Newton wanders without converging
    s = scalar(lambda x, y: -x, lambda x, y: y ** 2 - x, y_star=0.0)
    with pytest.raises(AlgebraicSolveFailure):
        solve_algebraic(s, [-1.0], [0.3], max_iter=50)


def test_regularity():
    lin = scalar(lambda x, y: -x, lambda x, y: y - x)
    assert regularity_check(lin, [5.0], [-2.0])
    sq = scalar(lambda x, y: -x, lambda x, y: y ** 2 - x)
    assert not regularity_check(sq, [0.0], [0.0])


def test_jacobians_hand_values(linear_pair):
    Fx, Fy, Gx, Gy = jacobians(linear_pair, [0.3], [0.1])
    assert np.allclose([Fx[0, 0], Fy[0, 0], Gx[0, 0], Gy[0, 0]], [-1, 1, -2, 1], atol=1e-9)


def test_jacobians_linear_system_matches_coefficients():
    rng = np.random.default_rng(3)
    A, Bm, Cm, D = (rng.normal(size=s) for s in [(3, 3), (3, 2), (2, 3), (2, 2)])
    D += 3 * np.eye(2)
    s = DaeSystem.at(3, 2, lambda x, y: A @ x + Bm @ y, lambda x, y: Cm @ x + D @ y,
                     np.zeros(3), np.zeros(2))
    Fx, Fy, Gx, Gy = jacobians(s, rng.normal(size=3), rng.normal(size=2))
    for got, want in [(Fx, A), (Fy, Bm), (Gx, Cm), (Gy, D)]:
        assert np.allclose(got, want, atol=1e-8)


def test_jacobians_quadratic_central_difference():
    s = DaeSystem.at(1, 0, lambda x, y: -x - 0.5 * x ** 2, lambda x, y: np.zeros(0), [0.0], [])
    for x in [0.3, -1.7, 4.0]:
        Fx = jacobians(s, [x], [])[0]
        # central differences are exact for quadratics up to rounding
        assert Fx[0, 0] == pytest.approx(-1 - x, abs=1e-8)


def test_reduced_matrix_hand_value(linear_pair):
    R = reduced_matrix(linear_pair, [0.0], [0.0])
    assert R.A[0, 0] == pytest.approx(1.0, abs=1e-8)
    assert not is_hurwitz(R)


def test_reduced_matrix_pure_ode():
    s = DaeSystem.at(2, 0, lambda x, y: np.array([-x[0] + x[1], -2 * x[1]]),
                     lambda x, y: np.zeros(0), [0, 0], [])
    assert np.allclose(reduced_matrix(s, [0, 0], []).A, [[-1, 1], [0, -2]], atol=1e-8)


def test_reduced_matrix_fy_zero():
    s = scalar(lambda x, y: -2 * x, lambda x, y: y ** 3 + y - x)
    assert reduced_matrix(s, [0.0], [0.0]).A[0, 0] == pytest.approx(-2.0, abs=1e-8)


def test_reduced_matrix_singular_gy():
    s = scalar(lambda x, y: -x, lambda x, y: y ** 2 - x)
    with pytest.raises(RegularityViolation):
        reduced_matrix(s, [0.0], [0.0])


@pytest.mark.parametrize("A, expected", [
    (-np.eye(3), True),
    (np.array([[0.0, 1.0], [-1.0, 0.0]]), False),
    (np.array([[-1.0, 2.0], [0.0, -3.0]]), True),
    (np.array([[-1.0, 0.0], [0.0, 0.0]]), False),
])
def test_is_hurwitz(A, expected):
    assert is_hurwitz(A) is expected


def test_quotient_removes_neutral_direction():
    # rotation-invariant pair: x1' = -(x1 - x2), x2' = -(x2 - x1); the sum is neutral
    A = np.array([[-1.0, 1.0], [1.0, -1.0]])
    assert not is_hurwitz(A)
    Q = quotient_matrix(A, np.array([[1.0], [1.0]]))
    assert np.allclose(eigenvalues(Q), [-2.0])


def test_shift_zero_is_identity(linear_pair):
    s = shift_to_origin(linear_pair)
    rng = np.random.default_rng(0)
    for _ in range(5):
        x, y = rng.normal(size=1), rng.normal(size=1)
        assert np.array_equal(residual(s, x, y)[0], residual(linear_pair, x, y)[0])


def test_shift_substitution():
    s = DaeSystem.at(1, 0, lambda x, y: -(x - 3.0), lambda x, y: np.zeros(0), [3.0], [])
    b = shift_to_origin(s)
    for xb in [-2.0, 0.0, 1.5]:
        assert residual(b, [xb], [])[0][0] == pytest.approx(-xb)
    assert b.equilibrium.x_star.tolist() == [0.0]


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_shifted_residual_vanishes_at_origin(xs, ys):
    s = scalar(lambda x, y: -(x - xs) + (y - ys), lambda x, y: (y - ys) - 2 * (x - xs), xs, ys)
    fv, gv = residual(shift_to_origin(s), [0.0], [0.0])
    assert fv[0] == 0.0 and gv[0] == 0.0
