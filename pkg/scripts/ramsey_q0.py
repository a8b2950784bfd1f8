"""Ramsey fringes on one qubit: FFT peak and damped-cosine fit for both engines."""
import argparse

from seaqt.experiments import ExperimentPlan, fft_peak, fit_ramsey, ramsey
from seaqt.io import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--qubit", type=int, default=0)
    args = ap.parse_args()

    cfg = load_config(args.config)
    q = cfg.qubit(args.qubit)
    plan = ExperimentPlan("ramsey", shots=cfg.shots, seed=cfg.seed)
    curve = ramsey(q, plan, cfg.settings)
    print(f"qubit {q.index}: detuning {q.delta_f_khz:.1f} kHz, tau_DJ {q.tau_dj} us, 1/gamma2 {q.inv_gamma2} us")
    for engine in plan.engines:
        x = curve.value(f"{engine}_X")
        f, width = fft_peak(plan.times, x)
        fit = fit_ramsey(plan.times, x)
        print(f"  {engine:>8}: FFT {f * 1e3:7.1f} +- {width * 1e3:.1f} kHz, fit {fit.delta_f_khz:7.2f} kHz, T2* {fit.t2_star:6.2f} us")


if __name__ == "__main__":
    main()
