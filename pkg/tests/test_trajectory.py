import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from gproa.dae import DaeSystem
from gproa.errors import ContractViolation, NotStableSample, TrajectoryAborted, TrajectoryDiverged
from gproa.systems import dae_decay, linear_decay
from gproa.trajectory import GammaFunction, estimate_lyapunov, gamma_validate, integrate


def ode(f, n=1):
    return DaeSystem.at(n, 0, lambda x, y: f(x), lambda x, y: np.zeros(0), np.zeros(n), [])


def test_origin_stays_put():
    tr = integrate(linear_decay(), [0.0], 0.01, 1.0, 1e-3)
    assert np.all(tr.samples == 0) and tr.converged
    assert tr.samples.shape == (101, 1)
    assert estimate_lyapunov(tr).v_hat == 0.0


def test_exponential_decay_final_norm():
    tr = integrate(linear_decay(), [1.0], 0.01, 10.0, 1e-3)
    assert tr.final_norm == pytest.approx(math.exp(-10), rel=1e-9)
    assert tr.converged
    assert np.allclose(tr.samples[:, 0], np.exp(-tr.times), rtol=1e-9)


def test_unstable_direction_not_converged():
    tr = integrate(ode(lambda x: x), [1.0], 0.01, 10.0, 1e-3)
    assert not tr.converged
    with pytest.raises(NotStableSample):
        estimate_lyapunov(tr)


def test_blow_up_raises_diverged():
    with pytest.raises(TrajectoryDiverged) as exc:
        integrate(ode(lambda x: x ** 3), [1.0], 0.01, 10.0, 1e-3)
    assert 0.0 < exc.value.time <= 10.0


def test_algebraic_failure_aborts_with_time():
    # x = 3 - e^t from x0 = 2; y^2 = x + 1 loses its real root when e^t = 4
    s = DaeSystem.at(1, 1, lambda x, y: x - 3.0, lambda x, y: y ** 2 - x - 1.0, [3.0], [2.0])
    with pytest.raises(TrajectoryAborted) as exc:
        integrate(s, [2.0], 0.01, 5.0, 1e-3, y0=[1.7])
    assert 1.2 <= exc.value.time <= math.log(4.0) + 0.02


def test_dae_reduced_flow():
    tr = integrate(dae_decay(), [2.0], 0.01, 5.0, 1e-3)
    assert np.allclose(tr.samples[:, 0], 2 * np.exp(-tr.times), rtol=1e-8)


def test_horizon_must_be_whole_steps():
    with pytest.raises(ContractViolation):
        integrate(linear_decay(), [1.0], 0.03, 1.0, 1e-3)
    with pytest.raises(ContractViolation):
        integrate(linear_decay(), [1.0], 0.01, 1.0, 0.0)


def test_gamma_validate():
    probes = [0.0, 0.5, 1.0, 2.0]
    assert gamma_validate(GammaFunction(2.0), probes)
    g1 = GammaFunction(1.0)
    assert gamma_validate(g1, probes) and g1.m == 1.0
    assert not gamma_validate(GammaFunction(func=lambda z: np.zeros_like(z), bound_exponent=1), probes)
    assert not gamma_validate(GammaFunction(func=lambda z: np.ones_like(z), bound_exponent=1), probes)
    with pytest.raises(ContractViolation):
        GammaFunction(0.5)
    with pytest.raises(ContractViolation):
        gamma_validate(GammaFunction(2.0), [0.5, 0.0])


@pytest.mark.parametrize("x0", [0.5, 1.0, 2.0])
def test_left_riemann_matches_discrete_oracle(x0):
    tr = integrate(linear_decay(), [x0], 0.01, 10.0, 1e-3)
    v = estimate_lyapunov(tr).v_hat
    assert v == pytest.approx(oracles.left_riemann_exp(x0, 1.0, 0.01, 1001), rel=1e-8)
    # the left sum sits dt/(1 - e^{-2 dt}) / (1/2) - 1 = 1.0033% above x^2/2
    assert v / oracles.lyapunov_exp(x0, 1.0) - 1 == pytest.approx(0.0100334, abs=2e-6)


def test_scaling_law():
    base = estimate_lyapunov(integrate(linear_decay(), [0.7], 0.01, 20.0, 1e-3)).v_hat
    for c in [0.5, 2.0, 3.0]:
        v = estimate_lyapunov(integrate(linear_decay(), [0.7 * c], 0.01, 20.0, 1e-3)).v_hat
        assert v / base == pytest.approx(c * c, rel=0.02)


def test_decay_along_trajectory():
    system = linear_decay(0.8)
    tr = integrate(system, [2.0], 0.01, 15.0, 1e-3)
    slack = 2 * 1e-3 ** 2 * 15.0
    vals = [estimate_lyapunov(integrate(system, tr.samples[k], 0.01, 15.0, 1e-3)).v_hat
            for k in range(0, 1500, 100)]
    assert np.all(np.diff(vals) <= slack)


def test_first_order_in_dt():
    err = []
    for dt in [0.02, 0.01, 0.005]:
        v = estimate_lyapunov(integrate(linear_decay(), [1.0], dt, 20.0, 1e-3)).v_hat
        err.append(v - 0.5)
    assert err[0] / err[1] == pytest.approx(2.0, rel=0.02)
    assert err[1] / err[2] == pytest.approx(2.0, rel=0.02)


@given(st.floats(0.05, 3.0), st.floats(1.0, 4.0))
def test_v_hat_nonnegative_and_zero_only_at_origin(x0, p):
    tr = integrate(linear_decay(), [x0], 0.05, 20.0, 1e-3)
    v = estimate_lyapunov(tr, GammaFunction(p)).v_hat
    assert v > 0
