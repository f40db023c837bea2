"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 partial run, 3 invariant
failure.
"""

import argparse
import json
import sys as _sys

import numpy as np

from . import __version__
from .checks import run_suite
from .config import RunConfig
from .diagnostics import (
    DiagnosticsReport,
    convergence_study,
    drift_envelope,
    energy_drift,
    orbit_rotation_numbers,
    symplectic_defect,
)
from .errors import ConfigError, NcviError
from .lagrangian import make_lagrangian
from .stepper import initialize_second_point, integrate_ensemble, march
from .systems import list_systems, make_builtin

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_INVARIANT = 0, 1, 2, 3

# Tolerances applied by ``check``.
DEFECT_TOL = 1e-5
ENERGY_TOL = 1e-9


def _num(x):
    return f"{float(x):.17g}"


def _meta(cfg, command):
    return {"tool": "ncvi", "version": __version__, "command": command, "config": cfg.to_dict()}


def _open_out(path):
    return open(path, "w") if path else _sys.stdout


def _close(fh):
    if fh is not _sys.stdout:
        fh.close()


def _write_json(path, obj):
    fh = _open_out(path)
    try:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")
    finally:
        _close(fh)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _csv_header(fh, cfg, command):
    fh.write(f"# ncvi {__version__} {command}\n")
    fh.write("# config: " + json.dumps(cfg.to_dict(), default=_json_default) + "\n")


def _build(cfg):
    system = make_builtin(cfg.system, cfg.epsilon)
    dl = make_lagrangian(system, cfg.order, cfg.tau, cfg.quadrature)
    return system, dl


# ------------------------------------------------------------ commands

def cmd_integrate(cfg):
    system, dl = _build(cfg)
    z0s = np.asarray(cfg.initial_conditions, dtype=float)
    if z0s.shape[1] != system.n:
        raise ConfigError(f"initial conditions need {system.n} coordinates")
    if cfg.init_mode == "user-supplied":
        z1s = np.broadcast_to(np.asarray(cfg.second_point, dtype=float), z0s.shape)
    else:
        z1s = initialize_second_point(system, dl, z0s, cfg.init_mode, 0.0, None, cfg.oracle)
    if cfg.n_steps == 1:
        members = None
        trajs = [(np.stack([a, b]), np.array([0.0, cfg.tau]), np.zeros(2, int), np.zeros(2), None)
                 for a, b in zip(z0s, z1s)]
    else:
        members = march(dl, cfg.solver, z0s, z1s, cfg.n_steps)
        trajs = [(m.trajectory.z, m.trajectory.t, m.trajectory.newton_iterations, m.trajectory.residual, m.error)
                 for m in members]
    failed = [(i, e) for i, (*_, e) in enumerate(trajs) if e is not None]

    if cfg.format == "json":
        body = {"meta": _meta(cfg, "integrate"), "trajectories": [
            {"member": i, "z": z, "t": t, "newton_iters": it, "residual": r, "error": None if e is None else str(e)}
            for i, (z, t, it, r, e) in enumerate(trajs)]}
        _write_json(cfg.out, body)
    else:
        fh = _open_out(cfg.out)
        try:
            _csv_header(fh, cfg, "integrate")
            multi = len(trajs) > 1
            cols = (["member"] if multi else []) + ["step", "t"] + [f"z{j}" for j in range(system.n)]
            fh.write(",".join(cols + ["newton_iters", "residual"]) + "\n")
            for i, (z, t, it, r, _) in enumerate(trajs):
                for k in range(len(t)):
                    row = ([str(i)] if multi else []) + [str(k), _num(t[k])] + [_num(v) for v in z[k]]
                    fh.write(",".join(row + [str(int(it[k])), _num(r[k])]) + "\n")
        finally:
            _close(fh)
    for i, e in failed:
        print(f"member {i}: {e}", file=_sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_poincare(cfg):
    system, dl = _build(cfg)
    seeds = cfg.seed_points()
    members = integrate_ensemble(dl, cfg.solver, seeds, cfg.init_mode, cfg.n_steps, 0.0, cfg.oracle,
                                 escape_radius=cfg.escape_radius)
    fh = _open_out(cfg.out)
    try:
        _csv_header(fh, cfg, "poincare")
        fh.write("seed_id,iterate,R,Theta\n")
        for i, m in enumerate(members):
            z = m.trajectory.z
            R = np.hypot(z[:, 0], z[:, 1])
            Th = np.arctan2(z[:, 1], z[:, 0])
            for k in range(len(z)):
                fh.write(f"{i},{k},{_num(R[k])},{_num(Th[k])}\n")
    finally:
        _close(fh)
    seeds_info, flagged = [], []
    for i, m in enumerate(members):
        traj = m.trajectory
        nu = orbit_rotation_numbers(system, traj.z, traj.t, cfg.tau) if len(traj.t) > 1 else np.array([np.nan])
        seeds_info.append({"seed_id": i, "R0": float(np.hypot(*seeds[i])), "iterates": len(traj.t),
                           "rotation_number": float(nu[-1])})
        if m.error is not None:
            flagged.append({"seed_id": i, "R0": float(np.hypot(*seeds[i])), "error": type(m.error).__name__,
                            "message": str(m.error), "step_index": getattr(m.error, "step_index", None)})
            print(f"seed {i} flagged: {m.error}", file=_sys.stderr)
    sidecar = {"meta": _meta(cfg, "poincare"), "flagged": flagged, "seeds": seeds_info}
    if cfg.out:
        _write_json(cfg.out + ".flags.json", sidecar)
    return EXIT_OK


def cmd_converge(cfg):
    system = make_builtin(cfg.system, 0.0)
    z0 = np.asarray(cfg.initial_conditions[0], dtype=float)
    table = convergence_study(system, cfg.order, cfg.epsilons, z0, cfg.tau, cfg.quadrature,
                              cfg.solver, cfg.oracle)
    report = DiagnosticsReport(convergence_table=table, notes=list(table.notes))
    _write_json(cfg.out, {"meta": _meta(cfg, "converge"), **report.to_dict()})
    return EXIT_OK


def cmd_check(cfg):
    system, dl = _build(cfg)
    failures = []
    results = run_suite(system, cfg.tau, count=100, seed=cfg.random_seed)
    failures += [r.name for r in results if not r.passed]

    z0 = np.asarray(cfg.initial_conditions[0], dtype=float)
    z1 = initialize_second_point(system, dl, z0, cfg.init_mode, 0.0, cfg.second_point, cfg.oracle)
    defect = symplectic_defect(dl, cfg.solver, z0, z1, 0, cfg.check_steps, cfg.tangent_samples, cfg.random_seed)
    if not defect["max"] < DEFECT_TOL:
        failures.append("symplectic_defect")

    report = DiagnosticsReport(symplectic_defects=defect)
    member = march(dl, cfg.solver, z0, z1, cfg.n_steps)[0]
    report.energy_series = energy_drift(system, member.trajectory)
    envelope = drift_envelope(report.energy_series)
    if member.error is not None:
        report.notes.append(f"energy run stopped early: {member.error}")
    if cfg.epsilon == 0.0 and not envelope < ENERGY_TOL:
        failures.append("energy_conservation")
    report.notes.append(f"energy drift envelope {envelope:.3e}")

    body = {"meta": _meta(cfg, "check"), "invariants": [r.to_dict() for r in results],
            "failures": failures, **report.to_dict()}
    _write_json(cfg.out, body)
    for name in failures:
        print(f"invariant failed: {name}", file=_sys.stderr)
    return EXIT_INVARIANT if failures else EXIT_OK


def cmd_list_systems(cfg):
    for name in list_systems():
        print(name)
    return EXIT_OK


COMMANDS = {
    "integrate": cmd_integrate,
    "poincare": cmd_poincare,
    "converge": cmd_converge,
    "check": cmd_check,
    "list-systems": cmd_list_systems,
}


# ------------------------------------------------------------- parsing

def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON config file")
    common.add_argument("--system", help="built-in system name")
    common.add_argument("--epsilon", type=float)
    common.add_argument("--tau", type=float)
    common.add_argument("--order", help="L0, L1, L2 or Linf (also 0, 1, 2, inf)")
    common.add_argument("--steps", type=int, dest="n_steps")
    common.add_argument("--init-mode", dest="init_mode")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--seed-grid", dest="seed_grid", help="rmin:rmax:count[:theta] or r1,r2,...")
    common.add_argument("--z0", type=_floats, help="initial point, e.g. 1.2,0")
    common.add_argument("--epsilons", type=_floats, help="comma-separated epsilons for converge")
    common.add_argument("--seed", type=int, dest="random_seed", help="random seed for check")

    parser = argparse.ArgumentParser(prog="ncvi", description="Variational integrators for perturbed "
                                     "non-canonical Hamiltonian systems.")
    parser.add_argument("--version", action="version", version=f"ncvi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for key in ("system", "epsilon", "tau", "order", "n_steps", "init_mode", "out", "format",
                "seed_grid", "epsilons", "random_seed"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.z0 is not None:
        cfg.initial_conditions = [args.z0]
        cfg.initial_conditions_file = None
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list-systems":
        return cmd_list_systems(None)
    try:
        cfg = config_from_args(args).resolved()
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except NcviError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    _sys.exit(main())
