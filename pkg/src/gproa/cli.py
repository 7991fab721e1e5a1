"""``gproa`` command line: simulate, assess, validate.

Exit codes: 0 success, 2 configuration error, 3 divergence (or a trajectory
that does not settle), 4 unstable equilibrium, 5 validation failure.
"""
import argparse
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import io as gio
from .assessment import AssessmentConfig, run_assessment
from .dae import is_hurwitz, reduced_matrix, regularity_check, residual, shift_to_origin
from .errors import (ConfigError, ContractViolation, ModelInfeasible, TrajectoryAborted,
                     TrajectoryDiverged, UnstableEquilibrium)
from .gp import load_snapshot, save_snapshot
from .microgrid import (Disturbance, check_model, microgrid_build, model_from_dict,
                        simulate_disturbance)
from .systems import BUILTIN

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_UNSTABLE, EXIT_INVALID = 0, 2, 3, 4, 5

log = logging.getLogger("gproa")


def bundled(name: str) -> Path:
    return Path(str(resources.files("gproa") / "data" / name))


def _resolve(arg: str) -> Path:
    """Accept a path or the name of a bundled config (``ieee9`` -> data/ieee9_microgrid.json)."""
    p = Path(arg)
    if p.exists():
        return p
    for cand in (f"{arg}.json", f"{arg}_microgrid.json", arg):
        if bundled(cand).exists():
            return bundled(cand)
    raise ConfigError(f"config file not found: {arg}")


def _read_json(path: Path):
    raw = path.read_bytes()
    try:
        return json.loads(raw.decode("utf-8")), raw
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from None


def load_system(arg: str):
    """Return (kind, model_or_None, unshifted DaeSystem, config bytes)."""
    path = _resolve(arg)
    d, raw = _read_json(path)
    if isinstance(d, dict) and d.get("type") == "builtin":
        name = d.get("system")
        if name not in BUILTIN:
            raise ConfigError(f"key 'system': unknown builtin {name!r}; choose from {sorted(BUILTIN)}")
        try:
            return "builtin", None, BUILTIN[name](**d.get("params", {})), raw
        except TypeError as exc:
            raise ConfigError(f"key 'params': {exc}") from None
    model = model_from_dict(d, name=path.stem)
    return "microgrid", model, None, raw


# ------------------------------------------------------------------ simulate

def cmd_simulate(args) -> int:
    kind, model, _, raw = load_system(args.model)
    if kind != "microgrid":
        raise ConfigError("simulate needs a microgrid config")
    dist = model.disturbance
    if args.no_disturbance:
        dist = None
    elif any(v is not None for v in (args.branch, args.event_time, args.scale, args.clear_after)):
        base = dist or Disturbance(branch=1)
        dist = Disturbance(args.branch if args.branch is not None else base.branch,
                           args.event_time if args.event_time is not None else base.time,
                           args.scale if args.scale is not None else base.scale,
                           args.clear_after if args.clear_after is not None else base.clear_after)
    traj, system = simulate_disturbance(model, args.dt, args.t_n, args.xi, dist)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = gio.header_line(gio.digest(raw), args.seed)
    path = gio.write_trajectory(out / "trajectory.csv", header, traj)
    print(f"wrote {path} ({len(traj.samples)} samples, final norm {traj.final_norm:.3e})")
    if not traj.converged:
        print(f"trajectory did not settle: final norm {traj.final_norm:.3e} >= xi {args.xi:g}",
              file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


# ------------------------------------------------------------------ assess

def cmd_assess(args) -> int:
    kind, model, system, raw = load_system(args.model)
    if kind == "microgrid":
        system = microgrid_build(model)
    system = shift_to_origin(system)
    apath = _resolve(args.assess)
    ad, araw = _read_json(apath)
    config = AssessmentConfig.from_dict(ad)
    overrides = {}
    if args.steps is not None:
        overrides["max_steps"] = args.steps
    if args.delta is not None:
        overrides["delta"] = args.delta
    try:
        config = replace(config, **overrides)
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None

    header = gio.header_line(gio.digest(raw, araw), args.seed)
    state, excluded, first = None, frozenset(), 0
    if args.resume:
        state, snap = load_snapshot(args.resume)
        excluded = frozenset(int(i) for i in snap.get("excluded", []))
        first = int(snap.get("iteration", state.step))
        if state.h != config.h or state.kernel != config.kernel:
            raise ConfigError("snapshot window width or kernel does not match the assessment config")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def on_step(it, st, est, exc):
        gio.write_roa(out / f"roa_{first + it:04d}.csv", header, est)

    estimates, alog = run_assessment(system, config, state=state, excluded=excluded,
                                     on_step=on_step)
    gio.write_log(out / "log.csv", header, alog.records, system.n, timing=args.timing)
    save_snapshot(out / "snapshot.json", alog.final_state, header=header,
                  iteration=first + len(estimates) - 1, excluded=sorted(int(i) for i in alog.excluded))
    last = estimates[-1]
    print(f"{len(estimates) - 1} iterations, {len(alog.accepted)} accepted samples, "
          f"{int(last.member.sum())}/{last.member.size} grid points in the ROA estimate "
          f"(delta={config.delta:g}, V_max={last.v_hat_max:.6g})")
    if alog.failed_steps:
        print(f"iterations without a stable sample: {alog.failed_steps}", file=sys.stderr)
    if alog.stop_reason:
        print(f"stopped early: {alog.stop_reason}", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------------ validate

def cmd_validate(args) -> int:
    kind, model, system, _ = load_system(args.model)
    report = []   # (ok, check, detail)
    if kind == "microgrid":
        bad = check_model(model)
        report.append((not bad, "config invariants", "; ".join(bad) or "ok"))
        if bad:
            system = None
        else:
            try:
                system = microgrid_build(model)
            except (ModelInfeasible, ConfigError) as exc:
                report.append((False, "equilibrium", str(exc)))
                system = None
    if system is not None:
        eq = system.equilibrium
        fr, gr = residual(system, eq.x_star, eq.y_star)
        res = float(np.linalg.norm(np.concatenate([fr, gr])))
        report.append((res <= 1e-8, "equilibrium residual", f"{res:.3e}"))
        if system.m:
            report.append((regularity_check(system, eq.x_star, eq.y_star),
                           "regularity of the algebraic Jacobian", "full rank"))
        try:
            A = reduced_matrix(system, eq.x_star, eq.y_star)
            ev = np.linalg.eigvals(A.A)
            ok = is_hurwitz(A)
            report.append((ok, "Hurwitz reduced Jacobian",
                           f"max real part {ev.real.max():.4g}"
                           + (" (rotation mode factored out)" if A.neutral is not None else "")))
        except Exception as exc:   # a singular algebraic Jacobian surfaces here
            report.append((False, "Hurwitz reduced Jacobian", str(exc)))
    failed = [r for r in report if not r[0]]
    for ok, name, detail in report:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    if failed:
        print(f"{len(failed)} check(s) failed", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


# ------------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gproa", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gproa {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="branch-disturbance time response")
    s.add_argument("--model", required=True, help="microgrid config path or bundled name")
    s.add_argument("--out", default="out")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--t-n", dest="t_n", type=float, default=20.0)
    s.add_argument("--xi", type=float, default=1e-3)
    s.add_argument("--branch", type=int, help="1-based branch index")
    s.add_argument("--event-time", type=float)
    s.add_argument("--scale", type=float, help="susceptance factor while disturbed (0 = outage)")
    s.add_argument("--clear-after", type=float)
    s.add_argument("--no-disturbance", action="store_true")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("assess", help="online ROA assessment")
    a.add_argument("--model", required=True)
    a.add_argument("--assess", required=True, help="assessment config path or bundled name")
    a.add_argument("--out", default="out")
    a.add_argument("--steps", type=int)
    a.add_argument("--delta", type=float)
    a.add_argument("--resume", metavar="SNAPSHOT")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--timing", action="store_true",
                   help="record wall times in the log (makes output run-dependent)")
    a.set_defaults(func=cmd_assess)

    v = sub.add_parser("validate", help="check config, equilibrium, regularity and stability")
    v.add_argument("--model", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ModelInfeasible) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrajectoryDiverged, TrajectoryAborted) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except UnstableEquilibrium as exc:
        print(f"unstable equilibrium: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
