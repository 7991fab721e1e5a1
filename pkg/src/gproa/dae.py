"""Semi-explicit DAE systems  x' = f(x, y),  0 = g(x, y).

A :class:`DaeSystem` bundles the two residual evaluators with the state
dimensions and a stored equilibrium. Everything here is a pure function of
its inputs; systems are immutable once built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AlgebraicSolveFailure, ContractViolation, RegularityViolation

EQUILIBRIUM_TOL = 1e-8
RANK_RTOL = 1e-10
HURWITZ_TOL = 1e-9

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _vec(v, size, name):
    a = np.asarray(v, dtype=float)
    if a.ndim == 0 and size == 1:
        a = a.reshape(1)
    if a.shape != (size,):
        raise ContractViolation(f"{name} must have shape ({size},), got {a.shape}")
    return a


@dataclass(frozen=True)
class Equilibrium:
    x_star: np.ndarray
    y_star: np.ndarray
    residual_norm: float


@dataclass(frozen=True)
class DaeSystem:
    """Residual pair (f, g) on R^n x R^m with a stored equilibrium.

    Optional hooks:

    ``jac(x, y) -> (Fx, Fy, Gx, Gy)``
        analytic Jacobians; otherwise central finite differences are used.
    ``gy(x, y) -> Gy``
        analytic dg/dy only, used by the Newton solve for Y(x).
    ``neutral``
        n x k matrix whose columns span directions along which the dynamics
        are invariant (e.g. a uniform rotation of all bus angles). Such
        directions carry zero eigenvalues by construction and are factored
        out by :func:`is_hurwitz`.
    """

    n: int
    m: int
    f: Evaluator
    g: Evaluator
    equilibrium: Equilibrium
    domain_hint: Optional[tuple] = None
    jac: Optional[Callable] = None
    gy: Optional[Callable] = None
    neutral: Optional[np.ndarray] = None
    labels: tuple = ()
    name: str = "dae"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ContractViolation(f"need n >= 1 and m >= 0, got n={self.n}, m={self.m}")
        eq = self.equilibrium
        x = _vec(eq.x_star, self.n, "x_star")
        y = _vec(eq.y_star, self.m, "y_star")
        fv, gv = residual(self, x, y)
        norm = float(max(np.max(np.abs(fv), initial=0.0), np.max(np.abs(gv), initial=0.0)))
        if not norm <= EQUILIBRIUM_TOL:
            raise ContractViolation(f"stored equilibrium has residual {norm:.3e} > {EQUILIBRIUM_TOL}")
        object.__setattr__(self, "equilibrium", Equilibrium(x, y, norm))

    @classmethod
    def at(cls, n, m, f, g, x_star, y_star, **kw) -> "DaeSystem":
        """Build a system, filling in the equilibrium residual norm."""
        return cls(n, m, f, g, Equilibrium(np.asarray(x_star, float).reshape(n),
                                           np.asarray(y_star, float).reshape(m), 0.0), **kw)


@dataclass(frozen=True)
class ReducedJacobian:
    A: np.ndarray
    evaluation_point: tuple
    neutral: Optional[np.ndarray] = None


def residual(system: DaeSystem, x, y):
    x = _vec(x, system.n, "x")
    y = _vec(y, system.m, "y")
    fv = np.asarray(system.f(x, y), dtype=float).reshape(-1)
    gv = np.asarray(system.g(x, y), dtype=float).reshape(-1)
    if fv.shape != (system.n,) or gv.shape != (system.m,):
        raise ContractViolation(
            f"residual shapes {fv.shape}, {gv.shape} do not match n={system.n}, m={system.m}")
    return fv, gv


def _fd_step(v):
    return np.maximum(1e-6, 1e-6 * np.abs(v))


def _central_diff(fun, v, out_dim):
    steps = _fd_step(v)
    J = np.empty((out_dim, v.size))
    for k in range(v.size):
        e = np.zeros_like(v)
        e[k] = steps[k]
        J[:, k] = (fun(v + e) - fun(v - e)) / (2.0 * steps[k])
    return J


def jacobians(system: DaeSystem, x, y):
    """Return (Fx, Fy, Gx, Gy); analytic if the system provides them."""
    x = _vec(x, system.n, "x")
    y = _vec(y, system.m, "y")
    if system.jac is not None:
        Fx, Fy, Gx, Gy = system.jac(x, y)
        return (np.asarray(Fx, float).reshape(system.n, system.n),
                np.asarray(Fy, float).reshape(system.n, system.m),
                np.asarray(Gx, float).reshape(system.m, system.n),
                np.asarray(Gy, float).reshape(system.m, system.m))
    n, m = system.n, system.m
    Fx = _central_diff(lambda v: residual(system, v, y)[0], x, n)
    Fy = _central_diff(lambda v: residual(system, x, v)[0], y, n) if m else np.zeros((n, 0))
    Gx = _central_diff(lambda v: residual(system, v, y)[1], x, m) if m else np.zeros((0, n))
    Gy = _central_diff(lambda v: residual(system, x, v)[1], y, m) if m else np.zeros((0, 0))
    return Fx, Fy, Gx, Gy


def _gy(system, x, y):
    if system.gy is not None:
        return np.asarray(system.gy(x, y), float).reshape(system.m, system.m)
    if system.jac is not None:
        return jacobians(system, x, y)[3]
    return _central_diff(lambda v: residual(system, x, v)[1], y, system.m)


def regularity_check(system: DaeSystem, x, y) -> bool:
    """True iff dg/dy has full rank m (relative singular-value test)."""
    if system.m == 0:
        return True
    x = _vec(x, system.n, "x")
    y = _vec(y, system.m, "y")
    Gy = _gy(system, x, y)
    if not np.all(np.isfinite(Gy)):
        return False
    s = np.linalg.svd(Gy, compute_uv=False)
    return bool(s[0] > 0.0 and s[-1] > RANK_RTOL * s[0])


def solve_algebraic(system: DaeSystem, x, y_guess, tol=1e-10, max_iter=50):
    """Newton iteration for Y(x): the y with g(x, y) = 0 near ``y_guess``."""
    x = _vec(x, system.n, "x")
    y = _vec(y_guess, system.m, "y_guess").copy()
    if system.m == 0:
        return y
    for _ in range(max_iter + 1):
        gv = np.asarray(system.g(x, y), dtype=float)
        if not np.all(np.isfinite(gv)):
            raise AlgebraicSolveFailure("non-finite algebraic residual")
        if np.max(np.abs(gv)) <= tol:
            return y
        Gy = _gy(system, x, y)
        try:
            dy = np.linalg.solve(Gy, gv)
        except np.linalg.LinAlgError as exc:
            raise RegularityViolation("dg/dy is singular") from exc
        if not np.all(np.isfinite(dy)):
            raise RegularityViolation("dg/dy is numerically singular")
        y -= dy
    raise AlgebraicSolveFailure(
        f"Newton on g(x, y) = 0 did not reach tol={tol:g} in {max_iter} iterations "
        f"(|g|={np.max(np.abs(gv)):.3e})")


def reduced_matrix(system: DaeSystem, x, y) -> ReducedJacobian:
    """A = Fx - Fy Gy^-1 Gx, the linearization of the reduced ODE."""
    x = _vec(x, system.n, "x")
    y = _vec(y, system.m, "y")
    Fx, Fy, Gx, Gy = jacobians(system, x, y)
    if system.m == 0:
        A = Fx.copy()
    else:
        s = np.linalg.svd(Gy, compute_uv=False)
        if not (s[0] > 0.0 and s[-1] > RANK_RTOL * s[0]):
            raise RegularityViolation("dg/dy is rank deficient at the evaluation point")
        A = Fx - Fy @ np.linalg.solve(Gy, Gx)
    return ReducedJacobian(A, (x, y), system.neutral)


def quotient_matrix(A, neutral):
    """Matrix of the map induced by A on R^n / span(neutral).

    ``neutral`` must be A-invariant (A @ neutral lies in its span); the
    spectrum of the result is that of A minus the eigenvalues on the
    neutral subspace.
    """
    A = np.asarray(A, float)
    V = np.asarray(neutral, float).reshape(A.shape[0], -1)
    Q, _ = np.linalg.qr(V, mode="complete")
    comp = Q[:, V.shape[1]:]
    return comp.T @ A @ comp


def eigenvalues(A) -> np.ndarray:
    if isinstance(A, ReducedJacobian):
        M = A.A if A.neutral is None else quotient_matrix(A.A, A.neutral)
    else:
        M = np.asarray(A, float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractViolation(f"matrix must be square, got {M.shape}")
    if M.size == 0:
        return np.zeros(0, complex)
    return np.linalg.eigvals(M)


def is_hurwitz(A, tol=HURWITZ_TOL) -> bool:
    """True iff every eigenvalue has real part < -tol.

    For a :class:`ReducedJacobian` carrying neutral directions, the test is
    applied to the quotient map.
    """
    ev = eigenvalues(A)
    return bool(np.all(ev.real < -tol))


def shift_to_origin(system: DaeSystem) -> DaeSystem:
    """Move the stored equilibrium to (0, 0) by a constant shift of x and y."""
    xs = system.equilibrium.x_star.copy()
    ys = system.equilibrium.y_star.copy()
    f, g, jac, gy = system.f, system.g, system.jac, system.gy

    def f_bar(x, y):
        return f(x + xs, y + ys)

    def g_bar(x, y):
        return g(x + xs, y + ys)

    jac_bar = None if jac is None else (lambda x, y: jac(x + xs, y + ys))
    gy_bar = None if gy is None else (lambda x, y: gy(x + xs, y + ys))
    hint = None
    if system.domain_hint is not None:
        lo, hi = system.domain_hint
        hint = (np.asarray(lo, float) - xs, np.asarray(hi, float) - xs)
    meta = dict(system.meta)
    meta["shift"] = (xs, ys)
    return DaeSystem.at(system.n, system.m, f_bar, g_bar, np.zeros(system.n), np.zeros(system.m),
                        domain_hint=hint, jac=jac_bar, gy=gy_bar, neutral=system.neutral,
                        labels=system.labels, name=system.name, meta=meta)
