from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from seaqt.experiments import ExperimentPlan, NonIdentifiableError, run_plan
from seaqt.fitting import FitProblem, fit
from seaqt.integrator import IntegratorConfig

# coarse steps keep each objective evaluation cheap; data and model share them
DELAYS = tuple(np.linspace(0, 42.6, 10))


@pytest.fixture(scope="module")
def coarse(device):
    return replace(device.settings, integrator=IntegratorConfig(dt=0.05))


def _problem(device, coarse, engine, params, kind="t1", qubit=1, observable="Z", **kw):
    q = device.qubit(qubit)
    plan = ExperimentPlan(kind, DELAYS, engine=engine)
    data = run_plan(plan, q, coarse).value(f"{engine}_{observable}")
    return FitProblem(engine, params, plan.times, data, plan, q, observable, settings=coarse, **kw), q


def test_lindblad_gamma1_recovered(device, coarse):
    g1 = device.qubit(1).gamma1
    problem, _ = _problem(device, coarse, "lindblad", {"gamma1": (0.3 * g1, 2.5 * g1)})
    res = fit(problem)
    assert res.params["gamma1"] == pytest.approx(g1, rel=1e-3)
    assert res.converged
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))
    assert res.evaluations >= problem.grid_points


def test_seaqt_x0_recovered(device, coarse):
    x0 = device.qubit(1).x0
    problem, _ = _problem(device, coarse, "seaqt", {"x0": (0.4 * x0, 3.0 * x0)})
    assert fit(problem).params["x0"] == pytest.approx(x0, rel=1e-3)


def test_weighted_fit_uses_std(device, coarse):
    g1 = device.qubit(0).gamma1
    problem, _ = _problem(device, coarse, "lindblad", {"gamma1": (0.5 * g1, 1.7 * g1)}, qubit=0)
    weighted = replace(problem, std=np.full(len(DELAYS), 0.01))
    res = fit(weighted)
    assert res.params["gamma1"] == pytest.approx(g1, rel=1e-3)
    assert res.sse == pytest.approx(weighted.sse(res.params))


def test_iteration_cap_reports_not_converged(device, coarse):
    g1 = device.qubit(1).gamma1
    problem, _ = _problem(device, coarse, "lindblad", {"gamma1": (0.3 * g1, 2.5 * g1)}, max_iter=2)
    res = fit(problem)
    assert not res.converged and res.iterations == 2


def test_flat_data_not_identifiable(device, coarse):
    problem, _ = _problem(device, coarse, "lindblad", {"gamma1": (0.001, 0.1)})
    flat = replace(problem, values=np.full(len(DELAYS), 0.3))
    with pytest.raises(NonIdentifiableError):
        fit(flat)


def test_parameter_without_effect_not_identifiable(device, coarse):
    # Z dephasing leaves the inversion-recovery populations untouched
    problem, _ = _problem(device, coarse, "lindblad", {"gamma2": (0.001, 0.1)})
    with pytest.raises(NonIdentifiableError):
        fit(problem)


def test_problem_validation(device, coarse):
    problem, q = _problem(device, coarse, "lindblad", {"gamma1": (0.001, 0.1)})
    base = dict(engine="lindblad", free_params={"gamma1": (0.001, 0.1)}, times=problem.times, values=problem.values,
                plan=problem.plan, qubit=q, observable="Z", settings=coarse)
    for change in ({"engine": "qutip"}, {"free_params": {}}, {"free_params": {"speed": (1, 2)}},
                   {"free_params": {"x0": (1.0, 2.0)}}, {"free_params": {"gamma1": (0.1, 0.01)}},
                   {"free_params": {"gamma1": (0.0, 1.0)}}, {"values": problem.values[:-1]},
                   {"times": problem.times + 1}, {"std": np.zeros(len(DELAYS))}):
        with pytest.raises(ValueError):
            FitProblem(**{**base, **change})


def test_configure_maps_names_to_fields(device, coarse):
    problem, q = _problem(device, coarse, "seaqt", {"x0": (1, 2), "beta_r": (1e-3, 1e-1)})
    q2, s2 = problem.configure({"x0": 5.0, "beta_r": 0.01})
    assert q2.x0 == 5.0
    assert s2.beta_omega == pytest.approx(0.01 * q.omega_q)
    lind, _ = _problem(device, coarse, "lindblad", {"gamma1": (0.001, 0.1)})
    assert lind.configure({"gamma1": 0.02})[0].inv_gamma1 == pytest.approx(50.0)


@settings(max_examples=10, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.floats(0.0, 1.0))
def test_self_consistency_random_truth(device, coarse, u):
    # true gamma1 anywhere in [1/300, 1/30] per us, bounds fixed around the range
    lo, hi = 1 / 400, 1 / 20
    g1 = np.exp(np.log(1 / 300) + u * (np.log(1 / 30) - np.log(1 / 300)))
    q = replace(device.qubit(1), inv_gamma1=1 / g1)
    plan = ExperimentPlan("t1", DELAYS, engine="lindblad")
    data = run_plan(plan, q, coarse).value("lindblad_Z")
    problem = FitProblem("lindblad", {"gamma1": (lo, hi)}, plan.times, data, plan, device.qubit(1), "Z", settings=coarse)
    res = fit(problem)
    assert res.params["gamma1"] == pytest.approx(g1, rel=0.01)
    assert lo <= res.params["gamma1"] <= hi
