"""Fixed-step RK4 for density-matrix ODEs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import qstate
from .metrics import bell_fidelity, concurrence


class IntegrationError(RuntimeError):
    pass


class TraceDriftError(IntegrationError):
    pass


class PositivityError(IntegrationError):
    pass


class NonFiniteStateError(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.005
    tol_trace: float = 1e-8
    tol_psd: float = 1e-9
    resym: bool = True
    check_every: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")


@dataclass
class Trajectory:
    """Sampled states; ``states`` has shape ``(len(times), ..., d, d)``."""

    times: np.ndarray
    states: np.ndarray
    observables: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.observables[name]


def observables(states: np.ndarray, tol_psd: float = 1e-6) -> dict:
    """Pauli expectations per qubit, entropy and purity; concurrence and |Phi> fidelity for pairs."""
    n = qstate.n_qubits(states)
    out = {}
    for q in range(n):
        suffix = "" if n == 1 else str(q)
        for name in ("X", "Y", "Z"):
            op = qstate.embed(qstate.PAULI[name], q, n)
            out[name + suffix] = qstate.expectation(states, op)
    out["entropy"] = qstate.von_neumann_entropy(states, tol_psd=tol_psd)
    out["purity"] = qstate.purity(states)
    if n == 2:
        out["concurrence"] = concurrence(states, tol_psd)
        out["fidelity"] = bell_fidelity(states)
    return out


def rk4_step(rhs: Callable, t: float, rho: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, rho)
    k2 = rhs(t + h / 2, rho + (h / 2) * k1)
    k3 = rhs(t + h / 2, rho + (h / 2) * k2)
    k4 = rhs(t + h, rho + h * k3)
    return rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def min_eigenvalue(rho: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of the hermitian part; closed form for 2x2."""
    if rho.shape[-1] == 2:
        a, d = rho[..., 0, 0].real, rho[..., 1, 1].real
        off = 0.5 * (rho[..., 0, 1] + rho[..., 1, 0].conj())
        return 0.5 * (a + d) - np.sqrt(0.25 * (a - d) ** 2 + np.abs(off) ** 2)
    return np.linalg.eigvalsh(qstate.hermitize(rho))[..., 0]


def _check(rho: np.ndarray, t: float, cfg: IntegratorConfig, psd: bool) -> None:
    if not np.all(np.isfinite(rho)):
        raise NonFiniteStateError(f"non-finite state at t={t:.6g} us")
    drift = np.max(np.abs(qstate.trace(rho) - 1.0))
    if drift > cfg.tol_trace:
        raise TraceDriftError(f"trace drift {drift:.3e} at t={t:.6g} us exceeds {cfg.tol_trace:.1e}")
    if psd:
        lam = np.min(min_eigenvalue(rho))
        if lam < -cfg.tol_psd * 1e3:
            raise PositivityError(f"eigenvalue {lam:.3e} at t={t:.6g} us")


def integrate(
    rhs: Callable,
    rho0: np.ndarray,
    t_end: float,
    samples: Sequence[float],
    cfg: IntegratorConfig = IntegratorConfig(),
    with_observables: bool = True,
) -> Trajectory:
    """Integrate ``d rho/dt = rhs(t, rho)`` from ``t = 0`` and record ``rho`` at ``samples``.

    Every interval between consecutive samples is split into equal steps no
    longer than ``cfg.dt``, so samples are hit exactly. No renormalisation
    is applied: trace drift or lost positivity raise.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("samples must be a non-empty 1-D sequence")
    if np.any(np.diff(samples) <= 0):
        raise ValueError("samples must be strictly increasing")
    if samples[0] < 0 or samples[-1] > t_end * (1 + 1e-12):
        raise ValueError("samples must lie within [0, t_end]")
    rho = qstate.validate_density(np.array(rho0, dtype=complex), tol_psd=cfg.tol_psd)

    states = np.empty((samples.size,) + rho.shape, dtype=complex)
    t = 0.0
    step = 0
    for i, ts in enumerate(samples):
        n = math.ceil((ts - t) / cfg.dt - 1e-9)
        if n > 0:
            h = (ts - t) / n
            for k in range(n):
                rho = rk4_step(rhs, t + k * h, rho, h)
                if cfg.resym:
                    rho = qstate.hermitize(rho)
                step += 1
                last = k == n - 1
                _check(rho, t + (k + 1) * h, cfg, psd=last or step % cfg.check_every == 0)
            t = ts
        states[i] = rho
    traj = Trajectory(samples, states)
    if with_observables:
        traj.observables = observables(states, cfg.tol_psd * 1e3)
    return traj
