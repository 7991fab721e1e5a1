"""Small analytic test systems with known stability regions."""
import numpy as np

from .dae import DaeSystem


def linear_decay(rate=1.0) -> DaeSystem:
    """x' = -rate * x; V(x) = x^2 / (2 rate) for alpha(z) = z^2."""
    return DaeSystem.at(1, 0, lambda x, y: -rate * x, lambda x, y: np.zeros(0), [0.0], [],
                        jac=lambda x, y: (np.array([[-rate]]), np.zeros((1, 0)),
                                          np.zeros((0, 1)), np.zeros((0, 0))),
                        labels=("x",), name="linear_decay", domain_hint=([-3.0], [3.0]))


def bistable() -> DaeSystem:
    """x' = x - x^3 with the stable equilibrium x* = 1 stored.

    After :func:`~gproa.dae.shift_to_origin` the basin of the origin is
    x_shifted > -1 (the unstable equilibrium x = 0 sits at x_shifted = -1).
    """
    return DaeSystem.at(1, 0, lambda x, y: x - x ** 3, lambda x, y: np.zeros(0), [1.0], [],
                        jac=lambda x, y: (np.array([[1.0 - 3.0 * x[0] ** 2]]), np.zeros((1, 0)),
                                          np.zeros((0, 1)), np.zeros((0, 0))),
                        labels=("x",), name="bistable", domain_hint=([-1.0], [3.0]))


def reversed_van_der_pol(mu=1.0) -> DaeSystem:
    """x1' = -x2, x2' = x1 + mu (x1^2 - 1) x2; the ROA is bounded by the limit cycle."""
    def f(x, y):
        return np.array([-x[1], x[0] + mu * (x[0] ** 2 - 1.0) * x[1]])

    return DaeSystem.at(2, 0, f, lambda x, y: np.zeros(0), [0.0, 0.0], [],
                        labels=("x1", "x2"), name="reversed_van_der_pol",
                        domain_hint=([-3.0, -3.0], [3.0, 3.0]))


def dae_decay() -> DaeSystem:
    """x' = -2x + y, 0 = y - x: index-1 DAE whose reduced flow is x' = -x."""
    return DaeSystem.at(1, 1, lambda x, y: -2.0 * x + y, lambda x, y: y - x, [0.0], [0.0],
                        labels=("x",), name="dae_decay")


BUILTIN = {
    "linear_decay": linear_decay,
    "bistable": bistable,
    "reversed_van_der_pol": reversed_van_der_pol,
    "dae_decay": dae_decay,
}
