"""Independent reference computations used by the tests.

Nothing here calls into the package's numeric code paths: GP posteriors use
an explicit matrix inverse instead of Cholesky, the normal quantile is found
by bisection on math.erfc, and window operators use explicit shift matrices.
"""
import math

import numpy as np


def rbf(A, B, ell, s2):
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            d = A[i] - B[j]
            out[i, j] = s2 * math.exp(-float(d @ d) / (2 * ell * ell))
    return out


def gp_posterior(P, y, X, ell, s2, noise):
    """Batch GP posterior by explicit inversion of K + noise I."""
    K = rbf(P, P, ell, s2) + noise * np.eye(len(y))
    Kinv = np.linalg.inv(K)
    kx = rbf(P, X, ell, s2)
    mu = kx.T @ Kinv @ y
    var = s2 - np.einsum("ij,ik,kj->j", kx, Kinv, kx)
    return mu, np.sqrt(np.maximum(var, 0.0))


def normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_quantile_bisect(p, lo=-40.0, hi=40.0, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def shift_matrix(h):
    return np.eye(h, k=1)


def shift_R(D):
    S = shift_matrix(D.shape[0])
    return S @ D @ S.T


def left_riemann_exp(x0, rate, dt, samples, p=2):
    """Left Riemann sum of |x0 e^{-rate t}|^p over ``samples`` grid points (closed form)."""
    r = math.exp(-p * rate * dt)
    return abs(x0) ** p * dt * (1 - r ** samples) / (1 - r)


def lyapunov_exp(x0, rate, p=2):
    """Exact integral of |x0 e^{-rate t}|^p over [0, inf)."""
    return abs(x0) ** p / (p * rate)


def in_bistable_basin(x_shifted):
    """Basin of x* = 1 for x' = x - x^3, in coordinates shifted by -1."""
    return np.asarray(x_shifted) > -1.0
