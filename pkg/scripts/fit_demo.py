"""Self-consistency demo: simulate a curve at known parameters, then fit it back."""
import argparse

from seaqt import qstate
from seaqt.experiments import ExperimentPlan, pipeline_states
from seaqt.fitting import FitProblem, fit
from seaqt.io import load_config

CASES = {
    "x0": ("seaqt", "t1", "Z"),
    "tau_dj": ("seaqt", "ramsey", "X"),
    "gamma1": ("lindblad", "t1", "Z"),
    "gamma2": ("lindblad", "ramsey", "X"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--qubit", type=int, default=1)
    ap.add_argument("--param", choices=sorted(CASES), default="x0")
    args = ap.parse_args()

    cfg = load_config(args.config)
    q = cfg.qubit(args.qubit)
    engine, kind, obs = CASES[args.param]
    truth = {"x0": q.x0, "tau_dj": q.tau_dj, "gamma1": q.gamma1, "gamma2": q.gamma2}[args.param]
    plan = ExperimentPlan(kind, engine=engine)
    data = qstate.expectation(pipeline_states(plan, q, cfg.settings)[engine], qstate.PAULI[obs])
    problem = FitProblem(engine, {args.param: (0.35 * truth, 2.2 * truth)}, plan.times, data, plan, q, obs, settings=cfg.settings)
    res = fit(problem)
    got = res.params[args.param]
    print(f"{args.param}: true {truth:.6g}, fitted {got:.6g} ({got / truth - 1:+.2e}), "
          f"{res.iterations} iterations, {res.evaluations} simulations, converged {res.converged}")


if __name__ == "__main__":
    main()
