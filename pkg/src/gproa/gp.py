"""Windowed online Gaussian-process regression.

The posterior over an unknown scalar function is kept in the parametrized
form

    mu(x)       = alpha . k(x)
    cov(x, x')  = k(x, x') + k(x)^T C k(x')

where k(x) holds the kernel values between x and the h points currently in
the window. Each push shifts the oldest point out, shifts the stored kernel
matrix with :func:`shift_R`, injects the new row/column, and rebuilds
``alpha`` and ``C`` by a sweep of rank-one Gaussian site updates over the
window (oldest first). With Gaussian sites this reproduces the exact batch
posterior of the window contents, which :func:`batch_posterior` computes
independently through a Cholesky factorization.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _kernels
from .errors import ContractViolation, IllConditionedKernel, PosteriorInconsistency

JITTER = 1e-10
VARIANCE_SLACK = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Isotropic RBF kernel  s2 * exp(-|x - x'|^2 / (2 l^2))  plus noise variance."""

    length_scale: float = 0.5
    signal_variance: float = 1.0
    noise_variance: float = 1e-4
    family: str = "rbf"

    def __post_init__(self):
        if self.family != "rbf":
            raise ContractViolation(f"unsupported kernel family {self.family!r}")
        if not self.length_scale > 0 or not self.signal_variance > 0:
            raise ContractViolation("length_scale and signal_variance must be positive")
        if not self.noise_variance >= 0:
            raise ContractViolation("noise_variance must be non-negative")

    def to_dict(self):
        return {"family": self.family, "length_scale": self.length_scale,
                "signal_variance": self.signal_variance, "noise_variance": self.noise_variance}

    @classmethod
    def from_dict(cls, d):
        return cls(length_scale=float(d.get("length_scale", 0.5)),
                   signal_variance=float(d.get("signal_variance", 1.0)),
                   noise_variance=float(d.get("noise_variance", 1e-4)),
                   family=d.get("family", "rbf"))


@dataclass(frozen=True)
class PosteriorEval:
    mu: float
    sigma: float


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    x = np.asarray(x, float).reshape(-1)
    x2 = np.asarray(x2, float).reshape(-1)
    if x.shape != x2.shape:
        raise ContractViolation(f"dimension mismatch {x.shape} vs {x2.shape}")
    d = x - x2
    return float(spec.signal_variance * np.exp(-(d @ d) / (2.0 * spec.length_scale ** 2)))


def kernel_matrix(spec: KernelSpec, A, B=None) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, float))
    B = A if B is None else np.atleast_2d(np.asarray(B, float))
    return _kernels.rbf_cross(np.ascontiguousarray(A), np.ascontiguousarray(B),
                              float(spec.length_scale), float(spec.signal_variance))


def _clamp_variance(var):
    var = np.asarray(var, float)
    worst = np.min(var, initial=0.0)
    if worst < -VARIANCE_SLACK:
        raise PosteriorInconsistency(f"posterior variance {worst:.3e} is negative")
    return np.maximum(var, 0.0)


def batch_posterior(kernel: KernelSpec, points, observations, x):
    """Exact GP posterior from N observations via a Cholesky solve.

    ``x`` may be a single point (returns a :class:`PosteriorEval` of floats) or
    a (q, n) array of queries (returns one of arrays).
    """
    x = np.asarray(x, float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    obs = np.asarray(observations, float).reshape(-1)
    if obs.size == 0:
        mu = np.zeros(X.shape[0])
        sd = np.full(X.shape[0], np.sqrt(kernel.signal_variance))
    else:
        P = np.asarray(points, float).reshape(obs.size, -1)
        K = kernel_matrix(kernel, P)
        K[np.diag_indices_from(K)] += kernel.noise_variance + JITTER
        try:
            factor = cho_factor(K, lower=True, check_finite=True)
        except np.linalg.LinAlgError as exc:
            raise IllConditionedKernel("Cholesky factorization of K + s^2 I failed") from exc
        Kx = kernel_matrix(kernel, P, X)  # N x q
        mu = Kx.T @ cho_solve(factor, obs)
        var = kernel.signal_variance - np.einsum("ij,ij->j", Kx, cho_solve(factor, Kx))
        sd = np.sqrt(_clamp_variance(var))
    if single:
        return PosteriorEval(float(mu[0]), float(sd[0]))
    return PosteriorEval(mu, sd)


def gaussian_site(obs, mu_prev, var_prev, noise_var):
    """First and second derivative of the log evidence of a Gaussian observation."""
    if not noise_var > 0:
        raise ContractViolation("gaussian_site needs noise_var > 0")
    if var_prev < 0:
        raise ContractViolation("gaussian_site needs var_prev >= 0")
    denom = noise_var + var_prev
    return (obs - mu_prev) / denom, -1.0 / denom


# ------------------------------------------------------------ window operators

def shift_R(D) -> np.ndarray:
    """Move every entry one slot up the main diagonal; last row and column become zero."""
    D = np.asarray(D, float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ContractViolation(f"shift_R needs a square matrix, got {D.shape}")
    out = np.zeros_like(D)
    out[:-1, :-1] = D[1:, 1:]
    return out


def extend_T(v) -> np.ndarray:
    return np.append(np.asarray(v, float), 0.0)


def extend_U(M) -> np.ndarray:
    M = np.asarray(M, float)
    k = M.shape[0]
    out = np.zeros((k + 1, k + 1))
    out[:k, :k] = M
    return out


def head_Lambda(v, length) -> np.ndarray:
    v = np.asarray(v, float)
    if length > v.size:
        raise ContractViolation(f"head_Lambda length {length} exceeds vector size {v.size}")
    return v[:length].copy()


def _sweep_reference(K, obs, noise_var):
    # Literal operator form: slot j plays the role of sample N-h+1+j.
    alpha = np.zeros(0)
    C = np.zeros((0, 0))
    for j in range(K.shape[0]):
        k = head_Lambda(K[:, j], j)
        Ck = C @ k
        denom = noise_var + K[j, j] + k @ Ck
        if not denom > 0:
            return alpha, C, j
        q, r = (obs[j] - alpha @ k) / denom, -1.0 / denom
        s = extend_T(Ck)
        s[j] += 1.0
        alpha = extend_T(alpha) + q * s
        C = extend_U(C) + r * np.outer(s, s)
    return alpha, C, -1


def window_sweep(K, observations, noise_var, fast=None):
    """Rebuild (alpha, C) from the window kernel matrix and observations."""
    if not noise_var > 0:
        raise ContractViolation("the windowed GP needs noise_variance > 0")
    K = np.ascontiguousarray(K, dtype=float)
    obs = np.ascontiguousarray(observations, dtype=float)
    use_fast = _kernels.window_sweep_fast is not None if fast is None else fast
    if use_fast:
        alpha, C, bad = _kernels.window_sweep_numba(K, obs, float(noise_var))
    else:
        alpha, C, bad = _sweep_reference(K, obs, float(noise_var))
    if bad >= 0:
        raise IllConditionedKernel(f"non-positive site variance at window slot {bad}", step=bad)
    return alpha, C


# ---------------------------------------------------------------- window state

def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WindowState:
    """Immutable snapshot of the h most recent samples and their GP coefficients."""

    h: int
    step: int
    points: np.ndarray
    observations: np.ndarray
    alpha: np.ndarray
    C: np.ndarray
    K: np.ndarray
    kernel: KernelSpec

    def __post_init__(self):
        for name in ("points", "observations", "alpha", "C", "K"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        h = self.h
        if h < 1:
            raise ContractViolation("window width h must be >= 1")
        if (self.points.ndim != 2 or self.points.shape[0] != h or self.observations.shape != (h,)
                or self.alpha.shape != (h,) or self.C.shape != (h, h) or self.K.shape != (h, h)):
            raise ContractViolation("inconsistent window array shapes")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def v_max(self) -> float:
        return float(np.max(self.observations))

    @classmethod
    def initial(cls, h: int, n: int, kernel: KernelSpec) -> "WindowState":
        """h copies of the training pair (origin, 0)."""
        points = np.zeros((h, n))
        obs = np.zeros(h)
        K = kernel_matrix(kernel, points)
        alpha, C = window_sweep(K, obs, kernel.noise_variance)
        return cls(h, 0, points, obs, alpha, C, K, kernel)

    # snapshot I/O --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "h": self.h,
            "kernel": self.kernel.to_dict(),
            "points": self.points.tolist(),
            "observations": self.observations.tolist(),
            "alpha": self.alpha.tolist(),
            "C": self.C.tolist(),
            "K": self.K.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "WindowState":
        try:
            h = int(d["h"])
            return cls(h, int(d["step"]), np.array(d["points"], float).reshape(h, -1),
                       d["observations"], d["alpha"], d["C"], d["K"],
                       KernelSpec.from_dict(d["kernel"]))
        except KeyError as exc:
            raise ContractViolation(f"snapshot is missing key {exc.args[0]!r}") from None


def save_snapshot(path, state: WindowState, **extra) -> None:
    """Write ``state`` as JSON; extra top-level keys (header, excluded, ...) are allowed."""
    d = dict(extra)
    d.update(state.to_dict())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(d, fh, indent=1)
        fh.write("\n")


def load_snapshot(path):
    """Return ``(state, raw_dict)``."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return WindowState.from_dict(d), d


def window_push(state: WindowState, x_new, obs_new) -> WindowState:
    """Slide the window by one sample and rebuild the GP coefficients."""
    h, n = state.h, state.dim
    x_new = np.asarray(x_new, float).reshape(-1)
    if x_new.shape != (n,):
        raise ContractViolation(f"x_new must have shape ({n},), got {x_new.shape}")
    obs_new = float(obs_new)
    points = np.vstack([state.points[1:], x_new[None, :]])
    observations = np.append(state.observations[1:], obs_new)

    k_new = kernel_matrix(state.kernel, points[:-1], x_new[None, :])[:, 0] if h > 1 else np.zeros(0)
    col = np.zeros((h, h))
    col[:, -1] = extend_T(k_new)
    K = shift_R(state.K) + col + col.T
    K[-1, -1] = kernel_eval(state.kernel, x_new, x_new)

    try:
        alpha, C = window_sweep(K, observations, state.kernel.noise_variance)
    except IllConditionedKernel as exc:
        raise IllConditionedKernel(f"window update for step {state.step + 1}: {exc}",
                                   step=state.step + 1) from exc
    return WindowState(h, state.step + 1, points, observations, alpha, C, K, state.kernel)


def predict_many(state: WindowState, X):
    """Posterior mean and standard deviation at each row of X."""
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, float)))
    if X.shape[1] != state.dim:
        raise ContractViolation(f"query dimension {X.shape[1]} != window dimension {state.dim}")
    ks = state.kernel
    mu, var = _kernels.posterior_many(X, np.ascontiguousarray(state.points),
                                      np.ascontiguousarray(state.alpha),
                                      np.ascontiguousarray(state.C),
                                      float(ks.length_scale), float(ks.signal_variance))
    return mu, np.sqrt(_clamp_variance(var))


def predict(state: WindowState, x) -> PosteriorEval:
    x = np.asarray(x, float).reshape(-1)
    mu, sd = predict_many(state, x[None, :])
    return PosteriorEval(float(mu[0]), float(sd[0]))
