"""Command-line interface: ``seaqt {simulate,fit,tomo,compare}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .experiments import ExperimentPlan, default_delays, fit_ramsey, fit_t1, run_plan
from .fitting import PARAMS, FitProblem, fit
from .integrator import IntegrationError
from .io import ConfigError, config_hash, load_config, read_curve, write_curve, write_report
from .metrics import bell_fidelity, concurrence
from .qstate import BELL_PHI, KET0, StateError, ket2dm
from .tomography import TomographyError, reconstruct, simulate_tomography

OBSERVABLE = {"t1": "Z", "ramsey": "X"}


def _plan(args, cfg, kind, engine) -> ExperimentPlan:
    n = args.widths if kind == "entangle" else args.delays
    delays = default_delays(kind, n)
    if args.t_max is not None:
        delays = np.linspace(0.0, args.t_max, delays.size)
    seed = cfg.seed if args.seed is None else args.seed
    shots = cfg.shots if args.shots is None else args.shots
    return ExperimentPlan(kind, tuple(delays), shots, engine, seed, args.scenario)


def _run(args, engine):
    cfg = load_config(args.config)
    plan = _plan(args, cfg, args.kind, engine)
    if args.kind == "entangle":
        qubits = [cfg.qubit(i) for i in args.qubits]
        who = {"qubits": f"{args.qubits[0]},{args.qubits[1]}", "scenario": plan.scenario}
    else:
        qubits = cfg.qubit(args.qubit)
        who = {"qubit": args.qubit}
    curve = run_plan(plan, qubits, cfg.settings)
    header = {
        "engine": plan.engine,
        "seed": plan.seed,
        "shots": plan.shots,
        "config": cfg.name,
        "config_hash": config_hash(cfg),
        **who,
    }
    return curve, header


def cmd_simulate(args) -> int:
    curve, header = _run(args, args.engine)
    write_curve(curve, args.out, header)
    return 0


def cmd_compare(args) -> int:
    curve, header = _run(args, "both")
    for name in [n for n in curve.columns if n.startswith("seaqt_") and not n.endswith("_shots")]:
        other = "lindblad_" + name[len("seaqt_"):]
        if other in curve.columns:
            diff = curve.value(name) - curve.value(other)
            curve.columns["diff_" + name[len("seaqt_"):]] = (diff, np.zeros_like(diff))
    write_curve(curve, args.out, header)
    return 0


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    curve, header = read_curve(args.data)
    expected = config_hash(cfg)
    if header.get("config_hash") != expected and not args.force:
        raise ValueError(
            f"{args.data} was produced with config hash {header.get('config_hash')!r}, "
            f"but the supplied config hashes to {expected!r}; pass --force to fit anyway"
        )
    kind = curve.kind
    if kind not in OBSERVABLE:
        raise ValueError(f"fit supports t1 and ramsey curves, not {kind!r}")
    if "qubit" not in header:
        raise ValueError(f"{args.data}: header lacks the qubit index")
    q = cfg.qubit(int(header["qubit"]))
    column = args.column or f"{args.engine}_{OBSERVABLE[kind]}"
    if column not in curve.columns:
        raise ValueError(f"{args.data}: no column {column!r} (have {', '.join(curve.columns)})")
    y, std = curve.columns[column]
    std = std if np.all(std > 0) else None

    bounds = {}
    for name in args.param:
        if name not in PARAMS:
            raise ValueError(f"unknown parameter {name!r}; choose from {', '.join(sorted(PARAMS))}")
        if args.bounds:
            bounds[name] = tuple(args.bounds)
        else:
            ref = cfg.settings.beta_omega / q.omega_q if name == "beta_r" else _reference(q, name)
            bounds[name] = (ref / 4, ref * 4)
    plan = ExperimentPlan(kind, tuple(curve.times), int(header.get("shots", cfg.shots)), args.engine, int(header.get("seed", 0)))
    problem = FitProblem(args.engine, bounds, curve.times, y, plan, q, column.split("_", 1)[1], std, cfg.settings)
    res = fit(problem)
    report = {
        "data": str(args.data),
        "engine": args.engine,
        "column": column,
        "config_hash": expected,
        "params": res.params,
        "sse": res.sse,
        "iterations": res.iterations,
        "evaluations": res.evaluations,
        "converged": res.converged,
        "bounds": {k: list(v) for k, v in bounds.items()},
    }
    report.update(_closed_form(kind, curve.times, y, std))
    write_report(report, args.out)
    return 0


def _reference(q, name):
    owner, attr, fn = PARAMS[name]
    val = getattr(q, attr)
    if val is None:
        raise ValueError(f"qubit {q.index} has no {attr} to centre the default bounds; pass --bounds")
    return fn(val)


def _closed_form(kind, t, y, std) -> dict:
    try:
        if kind == "t1":
            f = fit_t1(t, (1 - y) / 2, None if std is None else std / 2, offset=True)
            return {"t1_fit_us": f.t1}
        f = fit_ramsey(t, y, std)
        return {"t2_star_fit_us": f.t2_star, "delta_f_fit_khz": f.delta_f_khz}
    except (ValueError, RuntimeError) as exc:
        return {"closed_form_fit": f"unavailable: {exc}"}


def cmd_tomo(args) -> int:
    rho = _tomo_state(args.state, args.p)
    records = simulate_tomography(rho, args.shots, args.seed)
    est = reconstruct(records)
    report = {
        "state": args.state,
        "shots": args.shots,
        "seed": args.seed,
        "counts": {r.setting[0] + r.setting[1]: list(r.counts) for r in records},
        "fidelity_true": float(bell_fidelity(rho)),
        "fidelity": float(bell_fidelity(est)),
        "concurrence_true": float(concurrence(rho)),
        "concurrence": float(concurrence(est, 1e-6)),
        "rho_real": np.round(est.real, 12).tolist(),
        "rho_imag": np.round(est.imag, 12).tolist(),
    }
    write_report(report, args.out)
    return 0


def _tomo_state(name, p):
    bell = ket2dm(BELL_PHI)
    if name == "bell":
        return bell
    if name == "product":
        return ket2dm(np.kron(KET0, KET0))
    if name == "werner":
        if not 0 <= p <= 1:
            raise ValueError("--p must lie in [0, 1]")
        return p * bell + (1 - p) * np.eye(4) / 4
    return np.eye(4, dtype=complex) / 4


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seaqt", description="SEAQT and Lindblad qubit simulations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_args(p):
        p.add_argument("--kind", choices=("t1", "ramsey", "entangle"), required=True)
        p.add_argument("--qubit", type=int, default=1, help="qubit index for t1/ramsey")
        p.add_argument("--qubits", type=int, nargs=2, default=(0, 1), metavar=("CONTROL", "TARGET"))
        p.add_argument("--config", default=None, help="device file (default: bundled table)")
        p.add_argument("--out", default="-", help="output file, '-' for stdout")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--shots", type=_positive_int, default=None)
        p.add_argument("--delays", type=_positive_int, default=25, help="number of delays (t1/ramsey)")
        p.add_argument("--widths", type=_positive_int, default=30, help="number of CR widths (entangle)")
        p.add_argument("--t-max", type=float, default=None, help="last delay or width in us")
        p.add_argument("--scenario", type=int, choices=(1, 2), default=1)

    p = sub.add_parser("simulate", help="run one experiment and write a curve file")
    experiment_args(p)
    p.add_argument("--engine", choices=("seaqt", "lindblad", "both"), default="both")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run both engines side by side, with difference columns")
    experiment_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit", help="fit engine parameters to a curve file")
    p.add_argument("--data", required=True)
    p.add_argument("--param", action="append", required=True, help="parameter to fit (repeatable)")
    p.add_argument("--engine", choices=("seaqt", "lindblad"), required=True)
    p.add_argument("--column", default=None, help="data column (default ENGINE_Z or ENGINE_X)")
    p.add_argument("--bounds", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="-")
    p.add_argument("--force", action="store_true", help="fit even if the config hash differs")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tomo", help="simulate nine-setting tomography and reconstruct")
    p.add_argument("--state", choices=("bell", "product", "werner", "mixed"), default="bell")
    p.add_argument("--p", type=float, default=0.5, help="Werner weight")
    p.add_argument("--shots", type=_positive_int, default=8192)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_tomo)
    return parser


def run_command(argv=None) -> int:
    """Parse ``argv`` and run; returns the exit status instead of exiting."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, StateError, TomographyError, IntegrationError, ValueError, OSError) as exc:
        print(f"seaqt {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command())
