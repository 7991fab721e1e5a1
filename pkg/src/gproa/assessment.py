"""Online security-assessment loop and confidence-level ROA construction.

Each iteration picks the grid point maximizing mu + beta * sigma, simulates
it, and if the trajectory settles (final norm below xi) pushes the point and
its Lyapunov estimate into the GP window. After every iteration the ROA
estimate is the set of grid points with mu + beta * sigma <= max V_hat in the
window.

Rejected points are kept in an excluded set so a retry selects a different
point instead of the same argmax again.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._normal import norm_ppf
from .dae import DaeSystem, is_hurwitz, reduced_matrix
from .errors import (ConfigError, ContractViolation, DomainExhausted, StepFailed,
                     TrajectoryAborted, TrajectoryDiverged, UnstableEquilibrium)
from .gp import KernelSpec, WindowState, predict_many, window_push
from .trajectory import GammaFunction, estimate_lyapunov, integrate

log = logging.getLogger(__name__)


def beta_delta(delta: float) -> float:
    """Half-width multiplier Phi^-1((1 + delta) / 2) for confidence level delta."""
    if not 0.0 < delta < 1.0:
        raise ContractViolation(f"delta must lie in (0, 1), got {delta!r}")
    return norm_ppf((1.0 + delta) / 2.0)


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box over one or two shifted state coordinates.

    All other coordinates are pinned at 0. Grid points are ordered row-major
    over (axis 0, axis 1), i.e. the last listed axis varies fastest.
    """

    axes: tuple
    lo: tuple
    hi: tuple
    resolution: tuple

    def __post_init__(self):
        k = len(self.axes)
        if k not in (1, 2) or not (len(self.lo) == len(self.hi) == len(self.resolution) == k):
            raise ContractViolation("domain needs 1 or 2 axes with matching lo/hi/resolution")
        if any(r < 2 for r in self.resolution):
            raise ContractViolation("grid resolution must be >= 2 along every axis")
        if any(not h > l for l, h in zip(self.lo, self.hi)):
            raise ContractViolation("domain box must have hi > lo on every axis")

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    def coords(self) -> np.ndarray:
        """(G, k) array of grid coordinates along the selected axes."""
        ticks = [np.linspace(l, h, r) for l, h, r in zip(self.lo, self.hi, self.resolution)]
        mesh = np.meshgrid(*ticks, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def points(self, n: int) -> np.ndarray:
        """(G, n) array of full shifted states."""
        if max(self.axes) >= n or min(self.axes) < 0:
            raise ContractViolation(f"domain axes {self.axes} out of range for n={n}")
        P = np.zeros((self.size, n))
        P[:, list(self.axes)] = self.coords()
        return P


@dataclass(frozen=True)
class AssessmentConfig:
    delta: float = 0.9
    xi: float = 1e-3
    t_n: float = 10.0
    dt: float = 0.01
    h: int = 100
    domain: Domain = None
    kernel: KernelSpec = KernelSpec()
    max_steps: int = 10
    max_retries: int = 10
    halt_on_failure: bool = False
    alpha: GammaFunction = GammaFunction()

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ContractViolation("delta must lie in (0, 1)")
        if not self.xi > 0 or not self.dt > 0 or not self.t_n >= self.dt:
            raise ContractViolation("need xi > 0, dt > 0 and t_n >= dt")
        if self.h < 1 or self.max_retries < 1 or self.max_steps < 0:
            raise ContractViolation("need h >= 1, max_retries >= 1, max_steps >= 0")
        if self.domain is None:
            raise ContractViolation("a sampling domain is required")

    @classmethod
    def from_dict(cls, d: dict) -> "AssessmentConfig":
        try:
            dom = d["domain"]
            domain = Domain(tuple(int(a) for a in dom["axes"]), tuple(float(v) for v in dom["lo"]),
                            tuple(float(v) for v in dom["hi"]),
                            tuple(int(r) for r in dom["resolution"]))
            kernel = KernelSpec.from_dict(d.get("kernel", {}))
            gamma = GammaFunction(float(d.get("gamma_exponent", 2.0)))
            return cls(delta=float(d.get("delta", 0.9)), xi=float(d.get("xi", 1e-3)),
                       t_n=float(d.get("t_n", 10.0)), dt=float(d.get("dt", 0.01)),
                       h=int(d.get("h", 100)), domain=domain, kernel=kernel,
                       max_steps=int(d.get("max_steps", 10)),
                       max_retries=int(d.get("max_retries", 10)),
                       halt_on_failure=bool(d.get("halt_on_failure", False)), alpha=gamma)
        except KeyError as exc:
            raise ConfigError(f"assessment config is missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid assessment config: {exc}") from None


@dataclass(frozen=True, eq=False)
class RoaEstimate:
    step: int
    beta: float
    v_hat_max: float
    coords: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    member: np.ndarray
    delta: float


@dataclass(frozen=True)
class StepRecord:
    step: int
    index: int
    point: np.ndarray
    accepted: bool
    v_hat: Optional[float]
    wall_ms: float
    reason: str = ""


@dataclass
class AssessmentLog:
    records: list = field(default_factory=list)
    failed_steps: list = field(default_factory=list)
    stop_reason: str = ""
    final_state: Optional[WindowState] = None
    excluded: frozenset = frozenset()

    @property
    def accepted(self):
        return [r for r in self.records if r.accepted]


def acquisition(state: WindowState, grid_points, beta):
    mu, sd = predict_many(state, grid_points)
    return mu + beta * sd


def select_index(state: WindowState, config: AssessmentConfig, excluded, grid_points=None) -> int:
    if grid_points is None:
        grid_points = config.domain.points(state.dim)
    score = acquisition(state, grid_points, beta_delta(config.delta))
    if excluded:
        idx = np.fromiter(excluded, dtype=np.int64)
        score[idx] = -np.inf
        if np.all(np.isneginf(score)):
            raise DomainExhausted("every grid point of the sampling domain is excluded")
    # np.argmax returns the first maximum: lowest row-major index wins ties
    return int(np.argmax(score))


def select_sample(state: WindowState, config: AssessmentConfig, excluded=frozenset(),
                  grid_points=None) -> np.ndarray:
    """Grid point maximizing mu + beta * sigma; ``excluded`` holds grid indices."""
    if grid_points is None:
        grid_points = config.domain.points(state.dim)
    return grid_points[select_index(state, config, excluded, grid_points)].copy()


def _trial(system, x, config):
    try:
        traj = integrate(system, x, config.dt, config.t_n, config.xi)
    except TrajectoryDiverged as exc:
        return None, f"diverged: {exc}"
    except TrajectoryAborted as exc:
        return None, f"aborted: {exc}"
    if not traj.converged:
        return None, f"final norm {traj.final_norm:.3e}"
    return estimate_lyapunov(traj, config.alpha).v_hat, ""


def assessment_step(system: DaeSystem, state: WindowState, config: AssessmentConfig,
                    excluded=frozenset(), grid_points=None):
    """One scheme iteration; returns (state', records, excluded').

    Raises :class:`StepFailed` after ``max_retries`` rejected samples; the
    exception carries ``records`` and ``excluded`` for the caller to keep.
    """
    if grid_points is None:
        grid_points = config.domain.points(state.dim)
    excluded = set(excluded)
    records = []
    for _ in range(config.max_retries):
        t0 = time.perf_counter()
        idx = select_index(state, config, excluded, grid_points)
        x = grid_points[idx].copy()
        v_hat, reason = _trial(system, x, config)
        if v_hat is not None:
            new_state = window_push(state, x, v_hat)
            records.append(StepRecord(state.step + 1, idx, x, True, v_hat,
                                      (time.perf_counter() - t0) * 1e3))
            return new_state, records, frozenset(excluded)
        excluded.add(idx)
        records.append(StepRecord(state.step + 1, idx, x, False, None,
                                  (time.perf_counter() - t0) * 1e3, reason))
        log.debug("rejected grid point %d (%s)", idx, reason)
    exc = StepFailed(f"no stable sample within {config.max_retries} retries at step {state.step + 1}")
    exc.records = records
    exc.excluded = frozenset(excluded)
    raise exc


def roa_grid(state: WindowState, config: AssessmentConfig, grid_points=None) -> RoaEstimate:
    """Grid membership of mu + beta * sigma <= max V_hat over the window."""
    if grid_points is None:
        grid_points = config.domain.points(state.dim)
    beta = beta_delta(config.delta)
    mu, sd = predict_many(state, grid_points)
    vmax = state.v_max
    member = mu + beta * sd <= vmax
    coords = grid_points[:, list(config.domain.axes)]
    return RoaEstimate(state.step, beta, vmax, coords, mu, sd, member, config.delta)


def check_origin_stable(system: DaeSystem) -> None:
    eq = system.equilibrium
    if np.any(eq.x_star != 0.0) or np.any(eq.y_star != 0.0):
        raise ContractViolation("the assessment runs on a system shifted to its origin equilibrium")
    if not is_hurwitz(reduced_matrix(system, eq.x_star, eq.y_star)):
        raise UnstableEquilibrium("the reduced Jacobian at the equilibrium is not Hurwitz")


def run_assessment(system: DaeSystem, config: AssessmentConfig, state: WindowState = None,
                   excluded=frozenset(), on_step=None):
    """Run ``config.max_steps`` iterations; returns (estimates, log).

    ``estimates[0]`` describes the starting state and one more estimate follows
    every iteration. The log carries the final window and excluded set; pass
    them back as ``state``/``excluded`` to resume.
    """
    check_origin_stable(system)
    if state is None:
        state = WindowState.initial(config.h, system.n, config.kernel)
    elif state.dim != system.n:
        raise ContractViolation(f"window dimension {state.dim} does not match system n={system.n}")
    grid_points = config.domain.points(system.n)
    excluded = frozenset(excluded)
    alog = AssessmentLog()
    prior_bound = beta_delta(config.delta) * np.sqrt(config.kernel.signal_variance)
    warned = False
    estimates = [roa_grid(state, config, grid_points)]
    for it in range(config.max_steps):
        try:
            state, records, excluded = assessment_step(system, state, config, excluded, grid_points)
        except StepFailed as exc:
            records, excluded = exc.records, exc.excluded
            alog.records.extend(records)
            alog.failed_steps.append(it + 1)
            log.warning("%s", exc)
            if config.halt_on_failure:
                alog.stop_reason = str(exc)
                break
        except DomainExhausted as exc:
            alog.stop_reason = str(exc)
            log.warning("%s", exc)
            break
        else:
            alog.records.extend(records)
        estimates.append(roa_grid(state, config, grid_points))
        if not warned and state.v_max >= prior_bound:
            # far from every sample mu + beta*sigma falls back to beta*s, which is
            # then inside the level set: unexplored points would count as members
            log.warning("beta*s = %.4g does not exceed max V_hat = %.4g; raise the kernel "
                        "signal_variance or the estimate will include unexplored points",
                        prior_bound, state.v_max)
            warned = True
        if on_step is not None:
            on_step(it + 1, state, estimates[-1], excluded)
    alog.final_state = state
    alog.excluded = excluded
    return estimates, alog
