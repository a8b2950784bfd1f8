"""Weighted least-squares estimation of engine parameters from measured curves.

The simulator is an experiment pipeline; parameters are searched in log
space, first on a coarse grid over the bounds, then by a bounded
Nelder-Mead simplex started from the best grid point.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .experiments import (
    EngineSettings,
    ExperimentPlan,
    NonIdentifiableError,
    QubitParams,
    run_plan,
)

log = logging.getLogger(__name__)

# fit name -> (owner, field, transform to the stored field)
PARAMS = {
    "x0": ("qubit", "x0", lambda v: v),
    "tau_dj": ("qubit", "tau_dj", lambda v: v),
    "tau_dj_2q": ("qubit", "tau_dj_2q", lambda v: v),
    "gamma1": ("qubit", "inv_gamma1", lambda v: 1.0 / v),
    "gamma2": ("qubit", "inv_gamma2", lambda v: 1.0 / v),
    "beta_r": ("settings", "beta_omega", None),
}
ENGINE_PARAMS = {"seaqt": {"x0", "tau_dj", "tau_dj_2q", "beta_r"}, "lindblad": {"gamma1", "gamma2"}}

__all__ = ["FitProblem", "FitResult", "NonIdentifiableError", "fit", "PARAMS"]


@dataclass(frozen=True)
class FitProblem:
    """What to fit and against which data.

    ``free_params`` maps a parameter name (see ``PARAMS``) to finite positive
    bounds. ``observable`` is the pipeline column without its engine prefix,
    e.g. ``"Z"`` for inversion recovery or ``"X"`` for Ramsey. ``std`` of
    ``None`` gives unit weights.
    """

    engine: str
    free_params: dict
    times: np.ndarray
    values: np.ndarray
    plan: ExperimentPlan
    qubit: QubitParams
    observable: str
    std: np.ndarray | None = None
    settings: EngineSettings = field(default_factory=EngineSettings)
    init: dict = field(default_factory=dict)
    grid_points: int = 9
    max_iter: int = 500

    def __post_init__(self):
        if self.engine not in ENGINE_PARAMS:
            raise ValueError(f"unknown engine {self.engine!r}")
        if not self.free_params:
            raise ValueError("no free parameters")
        for name, (lo, hi) in self.free_params.items():
            if name not in PARAMS:
                raise ValueError(f"unknown parameter {name!r}; choose from {sorted(PARAMS)}")
            if name not in ENGINE_PARAMS[self.engine]:
                raise ValueError(f"parameter {name!r} does not enter the {self.engine} engine")
            if not (np.isfinite(lo) and np.isfinite(hi) and 0 < lo < hi):
                raise ValueError(f"bounds for {name!r} must be finite with 0 < lo < hi")
        t = np.asarray(self.times, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if t.size == 0 or t.shape != y.shape:
            raise ValueError("data must be non-empty with matching times and values")
        if not np.allclose(t, self.plan.times):
            raise ValueError("data times differ from the plan delays")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", y)
        if self.std is not None:
            s = np.asarray(self.std, dtype=float)
            if s.shape != y.shape or np.any(s <= 0):
                raise ValueError("std must be positive and match the data")
            object.__setattr__(self, "std", s)
        if self.plan.engine != self.engine:
            object.__setattr__(self, "plan", replace(self.plan, engine=self.engine))

    @property
    def names(self) -> list:
        return list(self.free_params)

    def configure(self, params: dict) -> tuple[QubitParams, EngineSettings]:
        q, s = self.qubit, self.settings
        for name, val in params.items():
            owner, attr, fn = PARAMS[name]
            if owner == "qubit":
                q = replace(q, **{attr: fn(val)})
            else:
                # beta_r is stored through the dimensionless product with omega_q
                s = replace(s, beta_omega=val * q.omega_q)
        return q, s

    def simulate(self, params: dict) -> np.ndarray:
        q, s = self.configure(params)
        curve = run_plan(self.plan, q, s)
        return curve.value(f"{self.engine}_{self.observable}")

    def sse(self, params: dict) -> float:
        r = self.simulate(params) - self.values
        if self.std is not None:
            r = r / self.std
        return float(r @ r)


@dataclass(frozen=True)
class FitResult:
    params: dict
    sse: float
    iterations: int
    converged: bool
    evaluations: int = 0
    history: tuple = ()  # best SSE after each simplex iteration


def fit(problem: FitProblem, window: int = 20, rtol: float = 1e-6) -> FitResult:
    """Minimise the weighted SSE; deterministic (no random restarts).

    Converged means the best SSE improved by less than ``rtol`` (relative)
    over the last ``window`` simplex iterations; hitting ``max_iter`` first
    returns ``converged=False``.
    """
    y = problem.values
    noise = float(np.median(problem.std)) if problem.std is not None else 0.0
    if np.ptp(y) <= max(noise, 1e-12):
        raise NonIdentifiableError("data are flat within noise; no parameter is identifiable")

    names = problem.names
    lo = np.log([problem.free_params[n][0] for n in names])
    hi = np.log([problem.free_params[n][1] for n in names])
    cache: dict = {}

    def objective(u):
        u = np.clip(u, lo, hi)
        key = tuple(np.round(u, 14))
        if key not in cache:
            cache[key] = problem.sse(dict(zip(names, np.exp(u))))
        return cache[key]

    axes = [np.linspace(a, b, problem.grid_points) for a, b in zip(lo, hi)]
    grid = [np.array(p) for p in itertools.product(*axes)]
    if problem.init:
        grid.append(np.log([problem.init.get(n, np.exp(0.5 * (a + b))) for n, a, b in zip(names, lo, hi)]))
    scores = np.array([objective(u) for u in grid])
    floor = 1.0 if problem.std is not None else 1e-12 * max(1.0, float(scores.min()))
    if np.ptp(scores) <= floor:
        raise NonIdentifiableError("SSE is flat across the search grid")
    start = grid[int(np.argmin(scores))]

    history: list = []

    def callback(intermediate_result):
        history.append(float(intermediate_result.fun))
        if len(history) > window:
            old, new = history[-window - 1], history[-1]
            if old - new <= rtol * max(abs(old), 1e-300):
                raise StopIteration

    step = (hi - lo) / (problem.grid_points - 1) / 2
    simplex = np.vstack([start] + [start + np.eye(len(names))[i] * step[i] * np.where(start[i] + step[i] > hi[i], -1, 1) for i in range(len(names))])
    res = minimize(
        objective,
        start,
        method="Nelder-Mead",
        bounds=list(zip(lo, hi)),
        callback=callback,
        options={"maxiter": problem.max_iter, "initial_simplex": simplex, "xatol": 1e-10, "fatol": 0.0},
    )
    best = np.clip(res.x, lo, hi)
    converged = bool(res.nit < problem.max_iter)
    params = {n: float(v) for n, v in zip(names, np.exp(best))}
    log.debug("fit %s: %s sse=%.4g after %d iterations", problem.engine, params, res.fun, res.nit)
    return FitResult(params, float(objective(best)), int(res.nit), converged, len(cache), tuple(history))
