"""Inversion recovery on every qubit with both engines; prints fitted T1 per engine."""
import argparse

import numpy as np

from seaqt.experiments import ExperimentPlan, fit_t1, inversion_recovery
from seaqt.io import config_hash, load_config, write_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--delays", type=int, default=40)
    ap.add_argument("--out-dir", default=None, help="write one curve file per qubit here")
    args = ap.parse_args()

    cfg = load_config(args.config)
    plan = ExperimentPlan("t1", delays=tuple(np.linspace(0, 300, args.delays)), shots=cfg.shots, seed=cfg.seed)
    print(f"{'qubit':>5} {'1/gamma1 (us)':>14} {'lindblad T1':>12} {'seaqt T1':>10} {'seaqt <Z>(end)':>15}")
    for q in cfg.qubits:
        curve = inversion_recovery(q, plan, cfg.settings)
        fits = {e: fit_t1(plan.times, (1 - curve.value(f"{e}_Z")) / 2, offset=True).t1 for e in ("lindblad", "seaqt")}
        print(f"{q.index:>5} {q.inv_gamma1:>14.2f} {fits['lindblad']:>12.2f} {fits['seaqt']:>10.2f} {curve.value('seaqt_Z')[-1]:>15.3f}")
        if args.out_dir:
            header = {"qubit": q.index, "engine": "both", "seed": plan.seed, "shots": plan.shots, "config": cfg.name, "config_hash": config_hash(cfg)}
            write_curve(curve, f"{args.out_dir}/t1_q{q.index}.csv", header)


if __name__ == "__main__":
    main()
