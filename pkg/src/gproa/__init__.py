"""Online region-of-attraction assessment for differential-algebraic power-system models.

A converse Lyapunov function is learned from simulated trajectories with a
sliding-window Gaussian process; its confidence-bounded sublevel set gives
the region-of-attraction estimate.
"""
__version__ = "0.1.0"

from ._accel import backend
from .assessment import (AssessmentConfig, Domain, RoaEstimate, beta_delta, roa_grid,
                         run_assessment, select_sample)
from .dae import DaeSystem, is_hurwitz, reduced_matrix, shift_to_origin, solve_algebraic
from .gp import KernelSpec, WindowState, batch_posterior, predict, predict_many, window_push
from .microgrid import MicrogridModel, load_model, microgrid_build, simulate_disturbance
from .trajectory import GammaFunction, estimate_lyapunov, integrate

__all__ = [
    "__version__", "backend", "AssessmentConfig", "Domain", "RoaEstimate", "beta_delta",
    "roa_grid", "run_assessment", "select_sample", "DaeSystem", "is_hurwitz",
    "reduced_matrix", "shift_to_origin", "solve_algebraic", "KernelSpec", "WindowState",
    "batch_posterior", "predict", "predict_many", "window_push", "MicrogridModel",
    "load_model", "microgrid_build", "simulate_disturbance", "GammaFunction",
    "estimate_lyapunov", "integrate",
]
