"""Hot numeric kernels, each in a numba loop form and a numpy form.

The public names at the bottom of the module are bound to one of the two
implementations according to :data:`gproa._accel.USE_NUMBA`. Both forms are
importable directly (``*_numba`` / ``*_numpy``) so tests and the benchmark
can compare them.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------- RBF kernel

def _rbf_cross_loops(A, B, length_scale, signal_variance):
    p, n = A.shape
    q = B.shape[0]
    out = np.empty((p, q))
    inv = 1.0 / (2.0 * length_scale * length_scale)
    for i in range(p):
        for j in range(q):
            d2 = 0.0
            for k in range(n):
                t = A[i, k] - B[j, k]
                d2 += t * t
            out[i, j] = signal_variance * np.exp(-d2 * inv)
    return out


def rbf_cross_numpy(A, B, length_scale, signal_variance):
    diff = A[:, None, :] - B[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    return signal_variance * np.exp(-d2 / (2.0 * length_scale * length_scale))


rbf_cross_numba = njit(_rbf_cross_loops)


# ------------------------------------------------- windowed coefficient sweep

def _window_sweep_loops(K, obs, noise_var):
    # Rank-one site updates over the window, oldest point first. Returns the
    # failing slot (>= 0) if a site denominator is not positive, else -1.
    h = K.shape[0]
    alpha = np.zeros(h)
    C = np.zeros((h, h))
    Ck = np.zeros(h)
    for j in range(h):
        mu = 0.0
        var = K[j, j]
        for a in range(j):
            acc = 0.0
            for b in range(j):
                acc += C[a, b] * K[b, j]
            Ck[a] = acc
        for a in range(j):
            mu += alpha[a] * K[a, j]
            var += K[a, j] * Ck[a]
        denom = noise_var + var
        if not denom > 0.0:
            return alpha, C, j
        q = (obs[j] - mu) / denom
        r = -1.0 / denom
        for a in range(j):
            alpha[a] += q * Ck[a]
        alpha[j] += q
        for a in range(j):
            ra = r * Ck[a]
            for b in range(j):
                C[a, b] += ra * Ck[b]
            C[a, j] += ra
            C[j, a] += ra
        C[j, j] += r
    return alpha, C, -1


window_sweep_numba = njit(_window_sweep_loops)


# ------------------------------------------------------ posterior on a batch

def _posterior_many_loops(X, P, alpha, C, length_scale, signal_variance):
    nq, n = X.shape
    h = P.shape[0]
    mu = np.empty(nq)
    var = np.empty(nq)
    k = np.empty(h)
    inv = 1.0 / (2.0 * length_scale * length_scale)
    for i in range(nq):
        for j in range(h):
            d2 = 0.0
            for d in range(n):
                t = X[i, d] - P[j, d]
                d2 += t * t
            k[j] = signal_variance * np.exp(-d2 * inv)
        m = 0.0
        quad = 0.0
        for a in range(h):
            m += alpha[a] * k[a]
            row = 0.0
            for b in range(h):
                row += C[a, b] * k[b]
            quad += k[a] * row
        mu[i] = m
        var[i] = signal_variance + quad
    return mu, var


def posterior_many_numpy(X, P, alpha, C, length_scale, signal_variance):
    Kx = rbf_cross_numpy(X, P, length_scale, signal_variance)
    mu = Kx @ alpha
    var = signal_variance + np.einsum("ij,ij->i", Kx @ C, Kx)
    return mu, var


posterior_many_numba = njit(_posterior_many_loops)


# ------------------------------------------------------- lossless power flow

def _power_injections_loops(theta, U, B):
    M = theta.shape[0]
    P = np.zeros(M)
    Q = np.zeros(M)
    for i in range(M):
        ui = abs(U[i])
        for j in range(M):
            bij = B[i, j]
            if bij == 0.0:
                continue
            d = theta[i] - theta[j]
            w = bij * ui * abs(U[j])
            P[i] += w * np.sin(d)
            Q[i] -= w * np.cos(d)
    return P, Q


def power_injections_numpy(theta, U, B):
    a = np.abs(U)
    d = theta[:, None] - theta[None, :]
    W = B * np.outer(a, a)
    return (W * np.sin(d)).sum(axis=1), -(W * np.cos(d)).sum(axis=1)


def _power_jacobian_loops(theta, U, B):
    # dP/dtheta, dP/dU, dQ/dtheta, dQ/dU for P_i = sum_j B_ij|U_i||U_j| sin(t_i - t_j),
    # Q_i = -sum_j B_ij|U_i||U_j| cos(t_i - t_j).
    M = theta.shape[0]
    Pt = np.zeros((M, M))
    PU = np.zeros((M, M))
    Qt = np.zeros((M, M))
    QU = np.zeros((M, M))
    for i in range(M):
        ui = abs(U[i])
        si = 1.0 if U[i] >= 0.0 else -1.0
        for j in range(M):
            bij = B[i, j]
            if bij == 0.0:
                continue
            if j == i:
                QU[i, i] -= 2.0 * bij * ui * si
                continue
            uj = abs(U[j])
            sj = 1.0 if U[j] >= 0.0 else -1.0
            d = theta[i] - theta[j]
            s = np.sin(d)
            c = np.cos(d)
            w = bij * ui * uj
            Pt[i, i] += w * c
            Pt[i, j] -= w * c
            Qt[i, i] += w * s
            Qt[i, j] -= w * s
            PU[i, i] += bij * uj * s * si
            PU[i, j] += bij * ui * s * sj
            QU[i, i] -= bij * uj * c * si
            QU[i, j] -= bij * ui * c * sj
    return Pt, PU, Qt, QU


def power_jacobian_numpy(theta, U, B):
    M = theta.shape[0]
    a = np.abs(U)
    sg = np.where(U >= 0.0, 1.0, -1.0)
    d = theta[:, None] - theta[None, :]
    S, Cs = np.sin(d), np.cos(d)
    off = B.copy()
    off[np.diag_indices(M)] = 0.0
    W = off * np.outer(a, a)
    Pt = -W * Cs
    Pt[np.diag_indices(M)] = (W * Cs).sum(axis=1)
    Qt = -W * S
    Qt[np.diag_indices(M)] = (W * S).sum(axis=1)
    PU = off * S * np.outer(a, sg)
    PU[np.diag_indices(M)] = (off * S * a[None, :]).sum(axis=1) * sg
    QU = -off * Cs * np.outer(a, sg)
    QU[np.diag_indices(M)] = -(off * Cs * a[None, :]).sum(axis=1) * sg - 2.0 * np.diag(B) * a * sg
    return Pt, PU, Qt, QU


power_injections_numba = njit(_power_injections_loops)
power_jacobian_numba = njit(_power_jacobian_loops)


if USE_NUMBA:
    rbf_cross = rbf_cross_numba
    window_sweep_fast = window_sweep_numba
    posterior_many = posterior_many_numba
    power_injections = power_injections_numba
    power_jacobian = power_jacobian_numba
else:
    rbf_cross = rbf_cross_numpy
    window_sweep_fast = None
    posterior_many = posterior_many_numpy
    power_injections = power_injections_numpy
    power_jacobian = power_jacobian_numpy
