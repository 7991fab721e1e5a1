"""Droop-controlled lossless microgrid as a DAE system.

Differential state, per inverter bus i (in the order of ``inverter_buses``)::

    theta_i' = omega_i - omega*
    omega_i' = -(omega_i - omega*) - KP_i (P_i - P*_i) + zeta_i
    U_i'     = -(U_i - U*_i) - KQ_i (Q_i - Q*_i)
    zeta'    = -L zeta - KP^-1 (omega - omega*)

stacked as x = (theta_I, omega_I, U_I, zeta). Algebraic state y = (theta_L, U_L)
with 0 = P_i - P*_i and 0 = Q_i - Q*_i on load buses. Injections use

    P_i =  sum_j B_ij |U_i||U_j| sin(theta_i - theta_j)
    Q_i = -sum_j B_ij |U_i||U_j| cos(theta_i - theta_j)

where B is the imaginary part of the bus admittance matrix of purely
inductive branches: B_ij = -b_ij > 0 off the diagonal for a branch of series
susceptance b_ij < 0, and B_ii = -sum_j B_ij.

Angles are measured in a frame rotating at omega*, so equilibria are fixed
points. Only angle differences enter the injections; a uniform rotation of
all angles is therefore a neutral direction of the dynamics and is declared
as such on the returned system.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .dae import DaeSystem
from .errors import ConfigError, ModelInfeasible
from .trajectory import Trajectory, _step_count, rk4_path

BALANCE_TOL = 1e-6
LAPLACIAN_TOL = 1e-9


@dataclass(frozen=True)
class Branch:
    i: int            # 0-based bus index
    j: int
    susceptance: float


@dataclass(frozen=True)
class Disturbance:
    branch: int       # 1-based index into the branch list
    time: float = 1.0
    scale: float = 0.0
    clear_after: float = 0.1


@dataclass(frozen=True, eq=False)
class MicrogridModel:
    M: int
    inverter_buses: np.ndarray   # 0-based
    load_buses: np.ndarray       # 0-based
    branches: tuple
    omega_star: float
    P_star: np.ndarray
    Q_star: np.ndarray
    U_star: np.ndarray
    K_P: np.ndarray              # per inverter bus, in inverter order
    K_Q: np.ndarray
    L: np.ndarray
    disturbance: Optional[Disturbance] = None
    name: str = "microgrid"

    @property
    def B(self) -> np.ndarray:
        return susceptance_matrix(self.M, self.branches)

    @property
    def n(self) -> int:
        return 4 * len(self.inverter_buses)

    @property
    def m(self) -> int:
        return 2 * len(self.load_buses)

    def labels(self):
        inv = [int(b) + 1 for b in self.inverter_buses]
        load = [int(b) + 1 for b in self.load_buses]
        xl = ([f"theta_{b}" for b in inv] + [f"omega_{b}" for b in inv]
              + [f"U_{b}" for b in inv] + [f"zeta_{b}" for b in inv])
        yl = [f"theta_{b}" for b in load] + [f"U_{b}" for b in load]
        return tuple(xl), tuple(yl)

    def with_branch_scaled(self, branch: int, scale: float) -> "MicrogridModel":
        """Copy with the susceptance of 1-based ``branch`` multiplied by ``scale``."""
        if not 1 <= branch <= len(self.branches):
            raise ConfigError(f"disturbance.branch {branch} is not in 1..{len(self.branches)}")
        brs = list(self.branches)
        b = brs[branch - 1]
        brs[branch - 1] = Branch(b.i, b.j, b.susceptance * scale)
        return replace(self, branches=tuple(brs))


def susceptance_matrix(M, branches) -> np.ndarray:
    B = np.zeros((M, M))
    for br in branches:
        w = -br.susceptance
        B[br.i, br.j] += w
        B[br.j, br.i] += w
        B[br.i, br.i] -= w
        B[br.j, br.j] -= w
    return B


# ------------------------------------------------------------------ config I/O

def _get(d, key, where="config"):
    try:
        return d[key]
    except (KeyError, TypeError):
        raise ConfigError(f"{where}: missing key {key!r}") from None


def _num(value, key):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"key {key!r}: expected a number, got {value!r}") from None
    if not np.isfinite(v):
        raise ConfigError(f"key {key!r}: value must be finite")
    return v


def _bus(value, M, key):
    try:
        b = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"key {key!r}: expected a bus number, got {value!r}") from None
    if not 1 <= b <= M or b != value:
        raise ConfigError(f"key {key!r}: bus {value!r} is not in 1..{M}")
    return b - 1


def model_from_dict(d: dict, name="microgrid") -> MicrogridModel:
    """Parse a configuration mapping; structural problems raise ConfigError."""
    if not isinstance(d, dict):
        raise ConfigError("config: top level must be an object")
    buses = _get(d, "buses")
    M = len(buses) if isinstance(buses, list) else int(_num(buses, "buses"))
    if M < 1:
        raise ConfigError("key 'buses': need at least one bus")
    inv = [_bus(b, M, "inverter_buses") for b in _get(d, "inverter_buses")]
    load = [_bus(b, M, "load_buses") for b in _get(d, "load_buses")]

    branches = []
    for k, br in enumerate(_get(d, "branches")):
        where = f"branches[{k}]"
        branches.append(Branch(_bus(_get(br, "from", where), M, f"{where}.from"),
                               _bus(_get(br, "to", where), M, f"{where}.to"),
                               _num(_get(br, "susceptance", where), f"{where}.susceptance")))

    P = np.zeros(M)
    Q = np.zeros(M)
    U = np.ones(M)
    seen = set()
    for k, sp in enumerate(_get(d, "set_points")):
        where = f"set_points[{k}]"
        b = _bus(_get(sp, "bus", where), M, f"{where}.bus")
        seen.add(b)
        P[b] = _num(_get(sp, "P", where), f"{where}.P")
        Q[b] = _num(_get(sp, "Q", where), f"{where}.Q")
        if "U" in sp:
            U[b] = _num(sp["U"], f"{where}.U")
        elif b in inv:
            raise ConfigError(f"{where}: missing key 'U' for inverter bus {b + 1}")
    missing = sorted(set(range(M)) - seen)
    if missing:
        raise ConfigError(f"key 'set_points': no entry for bus {missing[0] + 1}")

    omega_star = _num(_get(d, "omega_star"), "omega_star")

    KP = np.full(len(inv), np.nan)
    KQ = np.full(len(inv), np.nan)
    pos = {b: k for k, b in enumerate(inv)}
    for k, gn in enumerate(_get(d, "gains")):
        where = f"gains[{k}]"
        b = _bus(_get(gn, "bus", where), M, f"{where}.bus")
        if b not in pos:
            raise ConfigError(f"{where}.bus: bus {b + 1} is not an inverter bus")
        KP[pos[b]] = _num(_get(gn, "KP", where), f"{where}.KP")
        KQ[pos[b]] = _num(_get(gn, "KQ", where), f"{where}.KQ")
    if np.any(np.isnan(KP)):
        raise ConfigError(f"key 'gains': no entry for inverter bus {inv[int(np.argmax(np.isnan(KP)))] + 1}")

    try:
        L = np.array(_get(d, "laplacian"), dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("key 'laplacian': expected a dense numeric matrix") from None
    if L.shape != (len(inv), len(inv)):
        raise ConfigError(f"key 'laplacian': expected shape {(len(inv), len(inv))}, got {L.shape}")

    dist = None
    if d.get("disturbance") is not None:
        dd = d["disturbance"]
        dist = Disturbance(int(_num(_get(dd, "branch", "disturbance"), "disturbance.branch")),
                           _num(dd.get("time", 1.0), "disturbance.time"),
                           _num(dd.get("scale", 0.0), "disturbance.scale"),
                           _num(dd.get("clear_after", 0.1), "disturbance.clear_after"))

    return MicrogridModel(M, np.array(inv, dtype=np.int64), np.array(load, dtype=np.int64),
                          tuple(branches), omega_star, P, Q, U, KP, KQ, L, dist,
                          d.get("name", name))


def load_model(path) -> MicrogridModel:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from None
    return model_from_dict(d, name=path.stem)


def config_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ------------------------------------------------------------------ invariants

def check_model(model: MicrogridModel) -> list:
    """Return a list of human-readable invariant violations (empty if none)."""
    bad = []
    M = model.M
    inv = set(model.inverter_buses.tolist())
    load = set(model.load_buses.tolist())
    if len(inv) != len(model.inverter_buses) or len(load) != len(model.load_buses):
        bad.append("bus sets contain duplicates")
    if inv & load:
        bad.append(f"buses {sorted(b + 1 for b in inv & load)} are both inverter and load buses")
    if inv | load != set(range(M)):
        bad.append(f"buses {sorted(b + 1 for b in set(range(M)) - (inv | load))} are in neither bus set")
    if not inv:
        bad.append("no inverter buses")

    for k, br in enumerate(model.branches):
        if br.i == br.j:
            bad.append(f"branch {k + 1} connects bus {br.i + 1} to itself")
        if not br.susceptance < 0:
            bad.append(f"branch {k + 1} susceptance {br.susceptance} is not inductive (must be < 0)")
    B = model.B
    if not np.allclose(B, B.T, rtol=0, atol=0):
        bad.append("susceptance matrix is not symmetric")
    adj = (np.abs(B) > 0).astype(int)
    np.fill_diagonal(adj, 0)
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        bad.append(f"network graph is disconnected ({ncomp} components)")

    for k, b in enumerate(model.inverter_buses):
        if not model.K_P[k] > 0:
            bad.append(f"droop gain KP of bus {b + 1} is {model.K_P[k]} (must be > 0)")
        if not model.K_Q[k] > 0:
            bad.append(f"droop gain KQ of bus {b + 1} is {model.K_Q[k]} (must be > 0)")
        if not model.U_star[b] > 0:
            bad.append(f"voltage set point U of bus {b + 1} is {model.U_star[b]} (must be > 0)")

    L = model.L
    k = L.shape[0]
    if not np.allclose(L, L.T, rtol=0, atol=LAPLACIAN_TOL):
        bad.append("laplacian is not symmetric")
    if np.any(np.abs(L.sum(axis=1)) > LAPLACIAN_TOL):
        bad.append("laplacian rows do not sum to zero")
    if np.any(L[~np.eye(k, dtype=bool)] > LAPLACIAN_TOL):
        bad.append("laplacian has positive off-diagonal entries")
    if k and np.linalg.matrix_rank(L, tol=1e-9 * max(1.0, np.abs(L).max())) != k - 1:
        bad.append(f"laplacian rank is not {k - 1}: controller graph is disconnected")

    imbalance = float(np.sum(model.P_star))
    if abs(imbalance) > BALANCE_TOL:
        bad.append(f"active set points do not balance (sum P* = {imbalance:.6g})")

    if model.disturbance is not None and not 1 <= model.disturbance.branch <= len(model.branches):
        bad.append(f"disturbance.branch {model.disturbance.branch} is not in 1..{len(model.branches)}")
    return bad


# ------------------------------------------------------------------ residuals

@dataclass(frozen=True)
class _Flow:
    """Residual evaluators without a stored equilibrium (used for faulted networks)."""

    n: int
    m: int
    f: object
    g: object
    jac: object
    gy: object


def _evaluators(model: MicrogridModel):
    M = model.M
    I = np.asarray(model.inverter_buses)
    Lb = np.asarray(model.load_buses)
    k, l = I.size, Lb.size
    B = np.ascontiguousarray(model.B)
    ws = float(model.omega_star)
    KP, KQ, Lap = model.K_P.copy(), model.K_Q.copy(), model.L.copy()
    PI, QI, UI = model.P_star[I].copy(), model.Q_star[I].copy(), model.U_star[I].copy()
    PL, QL = model.P_star[Lb].copy(), model.Q_star[Lb].copy()
    inj, pjac = _kernels.power_injections, _kernels.power_jacobian

    def buses(x, y):
        th = np.empty(M)
        U = np.empty(M)
        th[I] = x[0:k]
        U[I] = x[2 * k:3 * k]
        th[Lb] = y[0:l]
        U[Lb] = y[l:2 * l]
        return th, U

    def f(x, y):
        th, U = buses(x, y)
        P, Q = inj(th, U, B)
        dw = x[k:2 * k] - ws
        zeta = x[3 * k:4 * k]
        return np.concatenate([
            dw,
            -dw - KP * (P[I] - PI) + zeta,
            -(x[2 * k:3 * k] - UI) - KQ * (Q[I] - QI),
            -Lap @ zeta - dw / KP,
        ])

    def g(x, y):
        th, U = buses(x, y)
        P, Q = inj(th, U, B)
        return np.concatenate([P[Lb] - PL, Q[Lb] - QL])

    def jac(x, y):
        th, U = buses(x, y)
        Pt, PU, Qt, QU = pjac(th, U, B)
        n, m = 4 * k, 2 * l
        Fx = np.zeros((n, n))
        Fy = np.zeros((n, m))
        eye = np.eye(k)
        t, w, u, z = slice(0, k), slice(k, 2 * k), slice(2 * k, 3 * k), slice(3 * k, 4 * k)
        yt, yu = slice(0, l), slice(l, 2 * l)
        Fx[t, w] = eye
        Fx[w, t] = -KP[:, None] * Pt[np.ix_(I, I)]
        Fx[w, w] = -eye
        Fx[w, u] = -KP[:, None] * PU[np.ix_(I, I)]
        Fx[w, z] = eye
        Fx[u, t] = -KQ[:, None] * Qt[np.ix_(I, I)]
        Fx[u, u] = -eye - KQ[:, None] * QU[np.ix_(I, I)]
        Fx[z, w] = -np.diag(1.0 / KP)
        Fx[z, z] = -Lap
        Fy[w, yt] = -KP[:, None] * Pt[np.ix_(I, Lb)]
        Fy[w, yu] = -KP[:, None] * PU[np.ix_(I, Lb)]
        Fy[u, yt] = -KQ[:, None] * Qt[np.ix_(I, Lb)]
        Fy[u, yu] = -KQ[:, None] * QU[np.ix_(I, Lb)]
        Gx = np.zeros((m, n))
        Gx[yt, t] = Pt[np.ix_(Lb, I)]
        Gx[yt, u] = PU[np.ix_(Lb, I)]
        Gx[yu, t] = Qt[np.ix_(Lb, I)]
        Gx[yu, u] = QU[np.ix_(Lb, I)]
        Gy = np.block([[Pt[np.ix_(Lb, Lb)], PU[np.ix_(Lb, Lb)]],
                       [Qt[np.ix_(Lb, Lb)], QU[np.ix_(Lb, Lb)]]])
        return Fx, Fy, Gx, Gy

    def gy(x, y):
        th, U = buses(x, y)
        Pt, PU, Qt, QU = pjac(th, U, B)
        return np.block([[Pt[np.ix_(Lb, Lb)], PU[np.ix_(Lb, Lb)]],
                         [Qt[np.ix_(Lb, Lb)], QU[np.ix_(Lb, Lb)]]])

    return f, g, jac, gy


def _solve_equilibrium(model, f, g, jac, tol=1e-12, max_iter=100):
    # Damped Gauss-Newton on (f; g; theta_ref) with theta_ref pinning the
    # rotation mode, from theta = 0, omega = omega*, U = U*, zeta = 0.
    k = len(model.inverter_buses)
    l = len(model.load_buses)
    n, m = 4 * k, 2 * l
    x = np.zeros(n)
    x[k:2 * k] = model.omega_star
    x[2 * k:3 * k] = model.U_star[model.inverter_buses]
    y = np.zeros(m)
    y[l:] = model.U_star[model.load_buses]

    def resid(x, y):
        return np.concatenate([f(x, y), g(x, y), [x[0]]])

    r = resid(x, y)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            return x, y
        Fx, Fy, Gx, Gy = jac(x, y)
        J = np.zeros((n + m + 1, n + m))
        J[:n, :n], J[:n, n:], J[n:n + m, :n], J[n:n + m, n:] = Fx, Fy, Gx, Gy
        J[-1, 0] = 1.0
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        lam, base = 1.0, r @ r
        while lam > 1e-8:
            xt, yt = x + lam * step[:n], y + lam * step[n:]
            rt = resid(xt, yt)
            if np.all(np.isfinite(rt)) and rt @ rt < base:
                break
            lam *= 0.5
        else:
            break
        x, y, r = xt, yt, rt
    if np.max(np.abs(r)) <= tol:
        return x, y
    raise ModelInfeasible(f"equilibrium Newton did not converge (residual {np.max(np.abs(r)):.3e})")


def microgrid_build(model: MicrogridModel) -> DaeSystem:
    """DaeSystem of the microgrid with its set-point equilibrium solved."""
    bad = check_model(model)
    structural = [b for b in bad if "balance" not in b]
    if structural:
        raise ConfigError("; ".join(structural))
    if bad:
        raise ModelInfeasible(bad[0])
    f, g, jac, gy = _evaluators(model)
    xs, ys = _solve_equilibrium(model, f, g, jac)
    l = len(model.load_buses)
    k = len(model.inverter_buses)
    if np.any(xs[2 * k:3 * k] <= 0) or np.any(ys[l:] <= 0):
        raise ModelInfeasible("equilibrium has non-positive voltage magnitudes")
    neutral = np.zeros((model.n, 1))
    neutral[:k, 0] = 1.0
    xl, yl = model.labels()
    return DaeSystem.at(model.n, model.m, f, g, xs, ys, jac=jac, gy=gy, neutral=neutral,
                        labels=xl, name=model.name, meta={"algebraic_labels": yl})


# ------------------------------------------------------------------ disturbance

def simulate_disturbance(model: MicrogridModel, dt: float, t_n: float, xi: float,
                         disturbance: Optional[Disturbance] = None):
    """Integrate from the equilibrium through a temporary branch-susceptance change.

    Returns ``(trajectory, system)`` where the trajectory is in coordinates
    shifted to the pre-disturbance equilibrium and ``system`` is the unshifted
    DaeSystem.
    """
    base = microgrid_build(model)
    xs, ys = base.equilibrium.x_star, base.equilibrium.y_star
    steps = _step_count(dt, t_n)

    def shifted(fl):
        return _Flow(fl.n, fl.m, lambda x, y: fl.f(x + xs, y + ys), lambda x, y: fl.g(x + xs, y + ys),
                     lambda x, y: fl.jac(x + xs, y + ys), lambda x, y: fl.gy(x + xs, y + ys))

    normal = shifted(_Flow(base.n, base.m, base.f, base.g, base.jac, base.gy))
    segments = [(normal, steps)]
    if disturbance is not None:
        on = int(round(disturbance.time / dt))
        off = on + int(round(disturbance.clear_after / dt))
        if on < 0 or on > steps:
            raise ConfigError(f"disturbance.time {disturbance.time} is outside [0, {t_n}]")
        fault = shifted(_Flow(base.n, base.m, *_evaluators(
            model.with_branch_scaled(disturbance.branch, disturbance.scale))))
        off = min(off, steps)
        segments = [(normal, on), (fault, off - on), (normal, steps - off)]

    x = np.zeros(base.n)
    y = np.zeros(base.m)
    parts = [x[None, :]]
    t0 = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for system, count in segments:
            if count <= 0:
                continue
            path, y = rk4_path(system, x, y, dt, count, t0=t0)
            parts.append(path[1:])
            x = path[-1]
            t0 += count * dt
    samples = np.vstack(parts)
    samples.setflags(write=False)
    final = float(np.linalg.norm(samples[-1]))
    traj = Trajectory(np.zeros(base.n), float(dt), float(t_n), samples, final < xi, final, float(xi))
    return traj, base
