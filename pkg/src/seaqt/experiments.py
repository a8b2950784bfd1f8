"""Inversion-recovery, Ramsey and cross-resonance entanglement pipelines.

Each pipeline prepares a state with an ideal gate (or, in pulse mode, by
integrating the DRAG drive), evolves it under one or both engines and
returns a :class:`Curve`. Because the free evolution is autonomous, one
trajectory sampled at every delay is equivalent to independent runs per
delay. Shot noise is drawn per point from seeds derived from
``(plan.seed, point, stream)``, so results do not depend on scheduling.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit

from . import qstate
from .hamiltonians import (
    CNOT_FRAME,
    HADAMARD,
    CRSpec,
    DriveSpec,
    PulseEnvelope,
    cr_hamiltonian,
    drive_hamiltonian,
    ghz_to_rad_per_us,
    khz_to_rad_per_us,
    rotation_amplitude,
    ry,
)
from .integrator import IntegratorConfig, integrate
from .lindblad import LindbladConfig, make_lindblad_rhs
from .metrics import bell_fidelity, concurrence
from .seaqt_engine import SeaqtConfig, make_seaqt_rhs, tau_dr
from .tomography import reconstruct, simulate_tomography

T1_HORIZON = 42.6
CR_HORIZON = 20.45
ENGINES = ("seaqt", "lindblad")
# shot-noise streams
_STREAMS = {"Z": 0, "X": 1, "Y": 2, "tomo": 3}


class ExperimentError(ValueError):
    pass


class NonIdentifiableError(ValueError):
    """The data cannot constrain the requested parameter(s)."""


@dataclass(frozen=True)
class QubitParams:
    """One row of the device table; times in us, ``freq_ghz`` in GHz, ``delta_f_khz`` in kHz."""

    index: int
    freq_ghz: float
    delta_f_khz: float
    x0: float
    tau_dj: float
    inv_gamma1: float
    inv_gamma2: float
    t1_ref: float | None = None
    t2_ref: float | None = None
    tau_dj_2q: float | None = None

    def __post_init__(self):
        if not 0 <= self.index <= 4:
            raise ValueError("index must lie in 0..4")
        for name in ("freq_ghz", "delta_f_khz", "x0", "tau_dj", "inv_gamma1", "inv_gamma2", "t1_ref", "t2_ref", "tau_dj_2q"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")

    @property
    def omega_q(self) -> float:
        return ghz_to_rad_per_us(self.freq_ghz)

    @property
    def delta_omega(self) -> float:
        return khz_to_rad_per_us(self.delta_f_khz)

    @property
    def gamma1(self) -> float:
        return 1.0 / self.inv_gamma1

    @property
    def gamma2(self) -> float:
        return 1.0 / self.inv_gamma2


def default_cr() -> CRSpec:
    # first concurrence maximum at nu*t = pi/2, about 3.3 us
    return CRSpec(nu_echo={"zx": 2 * np.pi * 0.075})


@dataclass(frozen=True)
class EngineSettings:
    """Engine choices shared by all pipelines.

    beta_omega:     product ``beta_R * omega_q``; each qubit's reservoir gets
                    ``beta_R = beta_omega / omega_q``.
    initial_mixing: depolarising weight mixed into SEAQT-prepared states,
                    since pure states do not evolve under SEAQT.
    pulse_resolved: integrate the DRAG preparation pulse instead of an ideal
                    gate, with step ``t_gate / 500``.
    """

    beta_omega: float = 1.25
    tau_floor_frac: float = 1e-3
    tau_sign: int = 1
    initial_mixing: float = 0.02
    form: str = "split"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    cr: CRSpec = field(default_factory=default_cr)
    pulse_resolved: bool = False
    envelope: PulseEnvelope = field(default_factory=PulseEnvelope)

    def __post_init__(self):
        if self.beta_omega <= 0:
            raise ValueError("beta_omega must be positive")
        if not 0 <= self.initial_mixing < 1:
            raise ValueError("initial_mixing must lie in [0, 1)")

    def seaqt(self, qubits, tau_dj) -> SeaqtConfig:
        return SeaqtConfig(
            tau_dj=tuple(tau_dj),
            x0=tuple(q.x0 for q in qubits),
            beta_r=tuple(self.beta_omega / q.omega_q for q in qubits),
            omega_q=tuple(q.omega_q for q in qubits),
            tau_floor_frac=self.tau_floor_frac,
            tau_sign=self.tau_sign,
            form=self.form,
            initial_mixing=self.initial_mixing,
        )

    @staticmethod
    def lindblad(qubits) -> LindbladConfig:
        return LindbladConfig(gamma1=tuple(q.gamma1 for q in qubits), gamma2=tuple(q.gamma2 for q in qubits))


def default_delays(kind: str, n: int | None = None) -> np.ndarray:
    if kind == "entangle":
        return np.linspace(0.0, CR_HORIZON, n or 30)
    return np.linspace(0.0, T1_HORIZON, n or 25)


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run: ``kind`` in t1 | ramsey | entangle, delays (or CR widths) in us."""

    kind: str
    delays: tuple | None = None
    shots: int = 8192
    engine: str = "both"
    seed: int = 0
    scenario: int = 1

    def __post_init__(self):
        if self.kind not in ("t1", "ramsey", "entangle"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        delays = default_delays(self.kind) if self.delays is None else np.asarray(self.delays, dtype=float)
        if delays.ndim != 1 or delays.size == 0:
            raise ValueError("delays must be a non-empty list")
        if np.any(np.diff(delays) < 0) or delays[0] < 0:
            raise ValueError("delays must be non-negative and non-decreasing")
        object.__setattr__(self, "delays", tuple(float(d) for d in delays))
        if int(self.shots) != self.shots or self.shots < 1:
            raise ValueError("shots must be a positive integer")
        if self.engine not in ENGINES + ("both",):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.scenario not in (1, 2):
            raise ValueError("scenario must be 1 or 2")

    @property
    def engines(self) -> tuple:
        return ENGINES if self.engine == "both" else (self.engine,)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.delays)


@dataclass
class Curve:
    """Per-point observables; ``columns[name] = (value, std)``."""

    kind: str
    times: np.ndarray
    columns: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def value(self, name: str) -> np.ndarray:
        return self.columns[name][0]

    def std(self, name: str) -> np.ndarray:
        return self.columns[name][1]


# -- shot noise ---------------------------------------------------------------


def point_seed(seed, index: int, stream: int = 0) -> np.random.SeedSequence:
    """Seed for point ``index`` of a plan, independent of evaluation order."""
    return np.random.SeedSequence([int(seed), int(index), int(stream)])


def shot_sample(p: float, shots: int, seed) -> tuple[float, float]:
    """Binomial estimate of ``p`` from ``shots`` draws and its std ``sqrt(p(1-p)/shots)``."""
    if not -1e-12 <= p <= 1 + 1e-12:
        raise ValueError(f"probability {p} outside [0, 1]")
    if int(shots) != shots or shots < 1:
        raise ValueError("shots must be a positive integer")
    p = min(max(float(p), 0.0), 1.0)
    k = np.random.default_rng(seed).binomial(int(shots), p)
    return k / shots, math.sqrt(p * (1 - p) / shots)


def _pauli_columns(prefix, values, plan, stream):
    """Exact expectation with its binomial std, plus a finite-shot estimate."""
    p1 = np.clip((1.0 - values) / 2.0, 0.0, 1.0)
    std = 2.0 * np.sqrt(p1 * (1 - p1) / plan.shots)
    shots = np.empty_like(values)
    for i, p in enumerate(p1):
        shots[i] = 1.0 - 2.0 * shot_sample(p, plan.shots, point_seed(plan.seed, i, stream))[0]
    return {prefix: (values, std), prefix + "_shots": (shots, std)}


# -- preparation and evolution -------------------------------------------------


def _workers() -> int:
    return max(1, int(os.environ.get("SEAQT_THREADS", "1")))


def _map(fn, items):
    items = list(items)
    if _workers() == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(_workers()) as pool:
        return list(pool.map(fn, items))


def _mix(rho: np.ndarray, eps: float) -> np.ndarray:
    d = rho.shape[-1]
    return (1 - eps) * rho + eps * np.eye(d) / d


def _engine_rhs(engine, h, qubits, settings, tau_dj):
    if engine == "seaqt":
        return make_seaqt_rhs(h, settings.seaqt(qubits, tau_dj))
    return make_lindblad_rhs(h, settings.lindblad(qubits))


def _prepare(engine, angle, delta_omega, q, settings):
    """Rotate ``|0>`` about y by ``angle``, ideally or by integrating the DRAG pulse."""
    rho0 = qstate.ket2dm(qstate.KET0)
    if not settings.pulse_resolved:
        u = ry(angle)
        rho = u @ rho0 @ qstate.dag(u)
    else:
        env = settings.envelope
        env = replace(env, amp=rotation_amplitude(env, angle))
        drive = DriveSpec(delta_omega, env)
        rhs = _engine_rhs(engine, lambda t: drive_hamiltonian(t, drive), [q], settings, [q.tau_dj])
        cfg = replace(settings.integrator, dt=env.t_gate / 500)
        if engine == "seaqt":
            rho0 = _mix(rho0, settings.initial_mixing)
        rho = integrate(rhs, rho0, env.t_gate, [env.t_gate], cfg, with_observables=False).states[-1]
        return qstate.hermitize(rho)
    return _mix(rho, settings.initial_mixing) if engine == "seaqt" else rho


def _evolve(rhs, rho0, times, settings):
    """Trajectory sampled at ``times`` (non-decreasing, may repeat or start at 0)."""
    uniq, inverse = np.unique(times, return_inverse=True)
    t_end = float(uniq[-1])
    if t_end == 0.0:
        states = np.broadcast_to(rho0, (len(uniq),) + rho0.shape).copy()
    else:
        samples = uniq if uniq[0] > 0 else uniq[1:]
        traj = integrate(rhs, rho0, t_end, samples, settings.integrator, with_observables=False)
        states = traj.states if uniq[0] > 0 else np.concatenate([rho0[None], traj.states])
    return states[inverse]


def _single_qubit_run(engine, q, plan, settings, angle, h, delta_omega):
    rho0 = _prepare(engine, angle, delta_omega, q, settings)
    return _evolve(_engine_rhs(engine, h, [q], settings, [q.tau_dj]), rho0, plan.times, settings)


def _scenario_taus(qubits, scenario):
    if scenario == 2:
        missing = [q.index for q in qubits if q.tau_dj_2q is None]
        if missing:
            raise ExperimentError(f"scenario 2 needs tau_dj_2q for qubit(s) {missing}")
        return [q.tau_dj_2q for q in qubits]
    return [q.tau_dj for q in qubits]


def _entangle_states(engine, qubits, plan, settings):
    h = cr_hamiltonian(settings.cr, echoed=True)
    psi = qstate.kron(HADAMARD, qstate.I2) @ np.kron(qstate.KET0, qstate.KET0)
    rho0 = qstate.ket2dm(psi)
    if engine == "seaqt":
        rho0 = _mix(rho0, settings.initial_mixing)
    tau_dj = _scenario_taus(qubits, plan.scenario)
    return _evolve(_engine_rhs(engine, h, qubits, settings, tau_dj), rho0, plan.times, settings)


def pipeline_states(plan: ExperimentPlan, qubits, settings: EngineSettings = EngineSettings()) -> dict:
    """Density matrices at every delay (or width) of ``plan``, keyed by engine.

    ``qubits`` is one QubitParams for t1/ramsey and a (control, target) pair
    for entangle. The curve builders derive their columns from these states.
    """
    if plan.kind == "entangle":
        pair = list(qubits)
        if len(pair) != 2:
            raise ExperimentError("entangle needs a (control, target) qubit pair")
        _scenario_taus(pair, plan.scenario)
        fn = lambda e: _entangle_states(e, pair, plan, settings)
    else:
        q = qubits[0] if isinstance(qubits, (list, tuple)) else qubits
        if plan.kind == "t1":
            # <Z> is frame-invariant, so the delay Hamiltonian is zero
            fn = lambda e: _single_qubit_run(e, q, plan, settings, np.pi, np.zeros((2, 2), dtype=complex), 0.0)
        else:
            fn = lambda e: _single_qubit_run(e, q, plan, settings, np.pi / 2, ramsey_hamiltonian(q), q.delta_omega / 2)
    return dict(zip(plan.engines, _map(fn, plan.engines)))


def inversion_recovery(q: QubitParams, plan: ExperimentPlan, settings: EngineSettings = EngineSettings()) -> Curve:
    """Prepare ``|1>``, wait, read ``<Z>``. The delay Hamiltonian is zero (``<Z>`` is frame-invariant)."""
    if plan.kind != "t1":
        raise ExperimentError(f"inversion_recovery needs a t1 plan, got {plan.kind!r}")
    curve = Curve("t1", plan.times, meta={"qubit": q.index})
    for engine, states in pipeline_states(plan, q, settings).items():
        z = qstate.expectation(states, qstate.Z)
        curve.columns.update(_pauli_columns(f"{engine}_Z", z, plan, _STREAMS["Z"]))
        if engine == "seaqt":
            tau = tau_dr(states, q.x0, settings.tau_floor_frac, settings.tau_sign)
            curve.columns["seaqt_tau_dr"] = (tau, np.zeros_like(tau))
    return curve


def ramsey_hamiltonian(q: QubitParams) -> np.ndarray:
    """Free-evolution Hamiltonian ``dw Z`` with ``dw`` chosen so ``<X>`` oscillates at ``delta_f``."""
    # dw Z precesses the Bloch vector at 2 dw, so dw is half the detuning
    return drive_hamiltonian(0.0, DriveSpec(q.delta_omega / 2, PulseEnvelope(amp=0.0)))


def ramsey(q: QubitParams, plan: ExperimentPlan, settings: EngineSettings = EngineSettings()) -> Curve:
    """Prepare ``|+>`` with a y-axis pi/2 rotation, precess at the detuning, read ``<X>, <Y>, <Z>``."""
    if plan.kind != "ramsey":
        raise ExperimentError(f"ramsey needs a ramsey plan, got {plan.kind!r}")
    curve = Curve("ramsey", plan.times, meta={"qubit": q.index})
    for engine, states in pipeline_states(plan, q, settings).items():
        for name in ("X", "Y", "Z"):
            vals = qstate.expectation(states, qstate.PAULI[name])
            curve.columns.update(_pauli_columns(f"{engine}_{name}", vals, plan, _STREAMS[name]))
    return curve


def framed_fidelity(rho: np.ndarray) -> np.ndarray:
    """|Phi> overlap after undoing the local frame that separates ZX(pi/2) from CNOT."""
    return bell_fidelity(CNOT_FRAME @ rho @ qstate.dag(CNOT_FRAME))


def entangle_disentangle(
    q0: QubitParams,
    q1: QubitParams,
    plan: ExperimentPlan,
    settings: EngineSettings = EngineSettings(),
    tomography: bool = True,
) -> Curve:
    """Hadamard on the control, then the echoed CR interaction for each width.

    Scenario 1 uses the single-qubit ``tau_dj``, scenario 2 the two-qubit
    ``tau_dj_2q``; relaxation uses ``x0`` in both. With ``tomography`` each
    point is also estimated from simulated nine-setting counts.
    """
    if plan.kind != "entangle":
        raise ExperimentError(f"entangle_disentangle needs an entangle plan, got {plan.kind!r}")
    runs = pipeline_states(plan, (q0, q1), settings)
    curve = Curve("entangle", plan.times, meta={"qubits": f"{q0.index},{q1.index}", "scenario": plan.scenario})
    for engine, states in runs.items():
        conc = concurrence(states, 1e-6)
        fid = framed_fidelity(states)
        zero = np.zeros_like(conc)
        curve.columns[f"{engine}_concurrence"] = (conc, zero)
        curve.columns[f"{engine}_fidelity"] = (fid, np.sqrt(fid * (1 - np.clip(fid, 0, 1)) / plan.shots))
        if tomography:
            est = np.array([
                reconstruct(simulate_tomography(rho, plan.shots, point_seed(plan.seed, i, _STREAMS["tomo"])))
                for i, rho in enumerate(states)
            ])
            curve.columns[f"{engine}_concurrence_shots"] = (concurrence(est, 1e-6), zero)
            curve.columns[f"{engine}_fidelity_shots"] = (framed_fidelity(est), zero)
    return curve


def run_plan(plan: ExperimentPlan, qubits, settings: EngineSettings = EngineSettings()) -> Curve:
    """Dispatch on ``plan.kind``; ``qubits`` is one QubitParams (or a pair for entangle)."""
    if plan.kind == "entangle":
        q0, q1 = qubits
        return entangle_disentangle(q0, q1, plan, settings)
    q = qubits[0] if isinstance(qubits, (list, tuple)) else qubits
    return inversion_recovery(q, plan, settings) if plan.kind == "t1" else ramsey(q, plan, settings)


# -- closed-form fits -----------------------------------------------------------


@dataclass(frozen=True)
class T1Fit:
    t1: float
    amplitude: float
    offset: float
    residual: float


@dataclass(frozen=True)
class RamseyFit:
    t2_star: float
    delta_f_khz: float
    amplitude: float
    phase: float
    offset: float
    residual: float
    bounded: bool  # True when the decay is unresolved and t2_star is the +inf sentinel


def _check_varying(y, std, what):
    noise = float(np.median(std)) if std is not None else 0.0
    if np.ptp(y) <= max(noise, 1e-12):
        raise NonIdentifiableError(f"{what}: data are flat within noise")


def fit_t1(times, p1, std=None, offset: bool = False) -> T1Fit:
    """Weighted least squares of ``P1(t) = A exp(-t/T1) (+ c)``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(p1, dtype=float)
    if np.unique(t).size < 3:
        raise ValueError("fit_t1 needs at least 3 distinct delays")
    _check_varying(y, std, "fit_t1")
    sigma = None if std is None else np.maximum(np.asarray(std, dtype=float), 1e-9)
    pos = y > 1e-6
    if pos.sum() >= 2 and np.ptp(t[pos]) > 0:
        slope, icpt = np.polyfit(t[pos], np.log(y[pos]), 1)
    else:
        slope, icpt = -1.0 / np.ptp(t), np.log(max(y.max(), 1e-6))
    t1_0 = -1.0 / slope if slope < 0 else 10 * np.ptp(t)
    if offset:
        model = lambda t, a, t1, c: a * np.exp(-t / t1) + c
        p0, bounds = (np.exp(icpt), t1_0, 0.0), ([0, 1e-9, -1], [np.inf, np.inf, 1])
    else:
        model = lambda t, a, t1: a * np.exp(-t / t1)
        p0, bounds = (np.exp(icpt), t1_0), ([0, 1e-9], [np.inf, np.inf])
    popt, _ = curve_fit(model, t, y, p0=p0, sigma=sigma, bounds=bounds, xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=10000)
    res = float(np.sum(((model(t, *popt) - y) / (1 if sigma is None else sigma)) ** 2))
    return T1Fit(float(popt[1]), float(popt[0]), float(popt[2]) if offset else 0.0, res)


def fft_peak(times, signal) -> tuple[float, float]:
    """Peak frequency (MHz when ``times`` are in us) of the mean-removed signal and the bin width."""
    t = np.asarray(times, dtype=float)
    dt = np.diff(t)
    if t.size < 4 or not np.allclose(dt, dt[0], rtol=1e-9):
        raise ValueError("FFT needs at least 4 uniformly spaced samples")
    y = np.asarray(signal, dtype=float) - np.mean(signal)
    spec = np.abs(np.fft.rfft(y))
    freqs = np.fft.rfftfreq(t.size, dt[0])
    k = int(np.argmax(spec[1:]) + 1)
    return float(freqs[k]), float(freqs[1])


def fit_ramsey(times, signal, std=None) -> RamseyFit:
    """Damped cosine ``A exp(-t/T2*) cos(2 pi f t + phi) + c``, frequency seeded from the FFT peak."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(signal, dtype=float)
    _check_varying(y, std, "fit_ramsey")
    f0, _ = fft_peak(t, y)
    if f0 * np.ptp(t) < 2.0:
        raise NonIdentifiableError("fewer than two oscillation periods in the record")
    sigma = None if std is None else np.maximum(np.asarray(std, dtype=float), 1e-9)
    model = lambda t, a, k, f, phi, c: a * np.exp(-k * t) * np.cos(2 * np.pi * f * t + phi) + c
    c0 = float(np.mean(y))
    a0 = float(np.max(np.abs(y - c0)))
    best = None
    for phi0 in np.linspace(-np.pi, np.pi, 4, endpoint=False):
        try:
            popt, _ = curve_fit(
                model, t, y, p0=(a0, 1.0 / np.ptp(t), f0, phi0, c0), sigma=sigma,
                bounds=([0, 0, 0.5 * f0, -2 * np.pi, -np.inf], [np.inf, np.inf, 1.5 * f0, 2 * np.pi, np.inf]),
                xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=20000,
            )
        except RuntimeError:
            continue
        res = float(np.sum(((model(t, *popt) - y) / (1 if sigma is None else sigma)) ** 2))
        if best is None or res < best[1]:
            best = (popt, res)
    if best is None:
        raise NonIdentifiableError("damped-cosine fit did not converge")
    (a, k, f, phi, c), res = best
    bounded = k * np.ptp(t) < 1e-9
    return RamseyFit(math.inf if bounded else 1.0 / k, f * 1e3, float(a), float(phi), float(c), res, bool(bounded))
