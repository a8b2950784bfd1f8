"""Concurrence and Bell fidelity versus CR width for both dephasing scenarios."""
import argparse

import numpy as np

from seaqt.experiments import ExperimentPlan, entangle_disentangle
from seaqt.io import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--widths", type=int, default=42)
    ap.add_argument("--engine", choices=("seaqt", "lindblad", "both"), default="seaqt")
    args = ap.parse_args()

    cfg = load_config(args.config)
    pair = (cfg.qubit(0), cfg.qubit(1))
    widths = tuple(np.linspace(0, 20.45, args.widths))
    curves = {
        k: entangle_disentangle(*pair, ExperimentPlan("entangle", widths, cfg.shots, args.engine, cfg.seed, k), cfg.settings)
        for k in (1, 2)
    }
    cols = [n for n in curves[1].columns if n.endswith("_concurrence")]
    print("width_us " + " ".join(f"s{k}:{c}" for k in (1, 2) for c in cols))
    for i, t in enumerate(widths):
        vals = " ".join(f"{curves[k].value(c)[i]:.4f}" for k in (1, 2) for c in cols)
        print(f"{t:8.3f} {vals}")


if __name__ == "__main__":
    main()
