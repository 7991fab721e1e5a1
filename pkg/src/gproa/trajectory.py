"""Reduced-flow integration and trajectory-based Lyapunov estimates.

The Lyapunov value of a stable sample is the left Riemann sum

    V(x) ~= sum_i alpha(|phi(x, t_i)|) dt,    t_i = (i - 1) dt,

over a fixed-step RK4 trajectory of x' = f(x, Y(x)), so the quadrature grid is
exactly the integrator grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dae import DaeSystem, solve_algebraic
from .errors import (AlgebraicSolveFailure, ContractViolation, NotStableSample,
                     RegularityViolation, TrajectoryAborted, TrajectoryDiverged)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GammaFunction:
    """Weighting function alpha(z) for the converse Lyapunov integral.

    The built-in family is alpha(z) = z**p with p >= 1. A custom callable can
    be supplied through ``func``; ``bound_exponent`` is then the m in
    alpha(z) <= z**m used by :func:`gamma_validate`.
    """

    exponent: float = 2.0
    func: Optional[Callable] = None
    bound_exponent: Optional[float] = None

    def __post_init__(self):
        if self.func is None and not self.exponent >= 1:
            raise ContractViolation(f"power-family exponent must be >= 1, got {self.exponent}")

    @property
    def kind(self) -> str:
        return "power" if self.func is None else "custom"

    @property
    def m(self) -> float:
        return self.exponent if self.bound_exponent is None else self.bound_exponent

    def __call__(self, z):
        z = np.asarray(z, float)
        if self.func is None:
            return z ** self.exponent
        return np.asarray(self.func(z), float)


def gamma_validate(alpha: GammaFunction, probe_points) -> bool:
    """Check alpha(0) = 0, strict growth, and alpha(z) <= z**m on the probes."""
    z = np.asarray(probe_points, float)
    if z.ndim != 1 or z.size == 0 or z[0] != 0.0 or np.any(np.diff(z) < 0):
        raise ContractViolation("probe points must be sorted ascending and start at 0")
    vals = np.array([float(alpha(t)) for t in z])
    if not np.all(np.isfinite(vals)) or vals[0] != 0.0:
        return False
    if np.any(np.diff(vals) <= 0):
        return False
    return bool(np.all(vals <= z ** alpha.m))


@dataclass(frozen=True, eq=False)
class Trajectory:
    x0: np.ndarray
    dt: float
    horizon: float
    samples: np.ndarray
    converged: bool
    final_norm: float
    xi: float

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.shape[0]) * self.dt


@dataclass(frozen=True)
class LyapunovSample:
    x: np.ndarray
    v_hat: float
    tail_bound: float = 0.0


def _step_count(dt, t_n):
    if not dt > 0 or not t_n >= dt:
        raise ContractViolation(f"need dt > 0 and t_n >= dt, got dt={dt}, t_n={t_n}")
    steps = int(round(t_n / dt))
    if abs(steps * dt - t_n) > 1e-9 * max(1.0, t_n):
        raise ContractViolation(f"t_n={t_n} is not a whole number of steps dt={dt}")
    return steps


def rk4_path(system: DaeSystem, x0, y0, dt, steps, t0=0.0, y_tol=1e-10):
    """Fixed-step RK4 on x' = f(x, Y(x)); returns (samples, y_end).

    ``samples`` has ``steps + 1`` rows, the first being ``x0``. Y is found by
    Newton warm-started from the most recent algebraic state.
    """
    f = system.f
    m = system.m
    x = np.array(x0, dtype=float).reshape(system.n)
    y = np.array(y0, dtype=float).reshape(m)
    out = np.empty((steps + 1, system.n))
    out[0] = x
    t = t0

    def rhs(xs, yguess, when):
        if m:
            try:
                yv = solve_algebraic(system, xs, yguess, tol=y_tol)
            except (AlgebraicSolveFailure, RegularityViolation) as exc:
                raise TrajectoryAborted(f"algebraic solve failed at t={when:.6g}: {exc}", when) from exc
        else:
            yv = yguess
        return np.asarray(f(xs, yv), dtype=float), yv

    try:
        for i in range(steps):
            k1, y = rhs(x, y, t)
            k2, y2 = rhs(x + 0.5 * dt * k1, y, t + 0.5 * dt)
            k3, y3 = rhs(x + 0.5 * dt * k2, y2, t + 0.5 * dt)
            k4, _ = rhs(x + dt * k3, y3, t + dt)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = t0 + (i + 1) * dt
            if not np.all(np.isfinite(x)):
                raise TrajectoryDiverged(f"state became non-finite at t={t:.6g}", t)
            out[i + 1] = x
    except FloatingPointError as exc:  # pragma: no cover - only under np.seterr(raise)
        raise TrajectoryDiverged(str(exc), t) from exc
    if m:
        y = rhs(x, y, t)[1]
    return out, y


def integrate(system: DaeSystem, x0, dt: float, t_n: float, xi: float, y0=None) -> Trajectory:
    """Integrate the reduced flow of a system shifted to its origin equilibrium."""
    if not xi > 0:
        raise ContractViolation("xi must be positive")
    steps = _step_count(dt, t_n)
    x0 = np.array(x0, dtype=float).reshape(system.n)
    y_start = np.zeros(system.m) if y0 is None else np.asarray(y0, float).reshape(system.m)
    with np.errstate(over="ignore", invalid="ignore"):
        samples, _ = rk4_path(system, x0, y_start, dt, steps)
    samples.setflags(write=False)
    final = float(np.linalg.norm(samples[-1]))
    return Trajectory(x0, float(dt), float(t_n), samples, final < xi, final, float(xi))


def _tail_bound(norms, dt, alpha, xi):
    tail = norms[-max(2, norms.size // 10):]
    if np.all(tail == 0.0):
        return 0.0
    if np.any(tail <= 0.0):
        return math.inf
    t = np.arange(tail.size) * dt
    slope = np.polyfit(t, np.log(tail), 1)[0]
    rate = -slope
    return float(alpha(xi)) / rate if rate > 0 else math.inf


def estimate_lyapunov(traj: Trajectory, alpha: GammaFunction = GammaFunction()) -> LyapunovSample:
    """Left Riemann sum of alpha(|phi|) over the stored trajectory samples."""
    if not traj.converged:
        raise NotStableSample(f"trajectory from {traj.x0} did not converge "
                              f"(final norm {traj.final_norm:.3e} >= xi={traj.xi:g})")
    norms = np.linalg.norm(traj.samples, axis=1)
    v_hat = float(np.sum(alpha(norms)) * traj.dt)
    tail = _tail_bound(norms, traj.dt, alpha, traj.xi)
    log.debug("V_hat=%.6g at x0=%s, truncation tail bound %.3g (not subtracted)", v_hat, traj.x0, tail)
    return LyapunovSample(traj.x0.copy(), v_hat, tail)
