"""Compare the numba and pure-numpy paths.

Kernel-level timings call both implementations directly. The end-to-end
timings (one 9-bus trajectory and one assessment step) run in subprocesses
because the backend is chosen once at import time from GPROA_DISABLE_NUMBA.

    python benchmarks/bench_kernels.py [--repeat 5] [--skip-e2e]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from gproa import _kernels as kn
from gproa.gp import _sweep_reference

E2E = r"""
import json, time
from gproa import backend
from gproa.assessment import AssessmentConfig, assessment_step, roa_grid
from gproa.cli import bundled
from gproa.dae import shift_to_origin
from gproa.gp import WindowState
from gproa.microgrid import load_model, microgrid_build
from gproa.trajectory import integrate

system = shift_to_origin(microgrid_build(load_model(bundled("ieee9_microgrid.json"))))
cfg = AssessmentConfig.from_dict(json.loads(bundled("ieee9_assess.json").read_text()))
x0 = [0.0] * 12
x0[3] = 0.5
integrate(system, x0, cfg.dt, 1.0, cfg.xi)          # warm-up / JIT
t = time.perf_counter(); integrate(system, x0, cfg.dt, cfg.t_n, cfg.xi)
traj = time.perf_counter() - t
state = WindowState.initial(cfg.h, 12, cfg.kernel)
grid = cfg.domain.points(12)
roa_grid(state, cfg, grid)
t = time.perf_counter(); state, _, _ = assessment_step(system, state, cfg, frozenset(), grid)
roa_grid(state, cfg, grid); step = time.perf_counter() - t
print(json.dumps({"backend": backend(), "trajectory_s": traj, "step_s": step}))
"""


def best(fn, repeat):
    fn()                                    # compile / warm caches
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_rows(repeat):
    rng = np.random.default_rng(0)
    grid = rng.uniform(-1, 1, (101 * 101, 12))
    P = rng.uniform(-1, 1, (100, 12))
    alpha = rng.normal(size=100)
    K = kn.rbf_cross_numpy(P, P, 0.5, 1.0)
    C = -np.linalg.inv(K + 1e-2 * np.eye(100))
    obs = rng.uniform(0, 3, 100)
    W = np.triu(rng.uniform(0, 20, (9, 9)), 1)
    B = W + W.T - np.diag((W + W.T).sum(axis=1))
    th, U = rng.uniform(-0.3, 0.3, 9), rng.uniform(0.9, 1.1, 9)

    cases = [
        ("rbf_cross 10201x100", lambda: kn.rbf_cross_numba(grid, P, 0.5, 1.0),
         lambda: kn.rbf_cross_numpy(grid, P, 0.5, 1.0)),
        ("posterior_many 10201, h=100",
         lambda: kn.posterior_many_numba(grid, P, alpha, C, 0.5, 1.0),
         lambda: kn.posterior_many_numpy(grid, P, alpha, C, 0.5, 1.0)),
        ("window sweep h=100", lambda: kn.window_sweep_numba(K, obs, 1e-4),
         lambda: _sweep_reference(K, obs, 1e-4)),
        ("power injections 9-bus x1000",
         lambda: [kn.power_injections_numba(th, U, B) for _ in range(1000)],
         lambda: [kn.power_injections_numpy(th, U, B) for _ in range(1000)]),
        ("power jacobian 9-bus x1000",
         lambda: [kn.power_jacobian_numba(th, U, B) for _ in range(1000)],
         lambda: [kn.power_jacobian_numpy(th, U, B) for _ in range(1000)]),
    ]
    for name, fast, slow in cases:
        a, b = best(fast, repeat), best(slow, repeat)
        yield name, a, b


def e2e(disable):
    env = dict(os.environ, GPROA_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()

    print(f"{'case':34s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speedup':>8s}")
    for name, a, b in kernel_rows(args.repeat):
        print(f"{name:34s} {a * 1e3:12.3f} {b * 1e3:12.3f} {b / a:8.1f}x")
    if not args.skip_e2e:
        fast, slow = e2e(False), e2e(True)
        for key, label in [("trajectory_s", "9-bus trajectory (t_n = 20 s)"),
                           ("step_s", "9-bus assessment step")]:
            a, b = fast[key], slow[key]
            print(f"{label:34s} {a * 1e3:12.1f} {b * 1e3:12.1f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
