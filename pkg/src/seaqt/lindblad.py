"""GKLS master equation with amplitude damping and Z dephasing per qubit."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .qstate import LOWER, Z, dag, embed, n_qubits


@dataclass(frozen=True)
class LindbladConfig:
    """Per-qubit rates in 1/us; a scalar applies to every qubit.

    The jump operators are the bare lowering operator and ``Z``; each rate
    enters once, as the prefactor of its dissipator.
    """

    gamma1: tuple = (0.0,)
    gamma2: tuple = (0.0,)

    def __post_init__(self):
        for name in ("gamma1", "gamma2"):
            vals = tuple(float(v) for v in np.atleast_1d(getattr(self, name)))
            if min(vals) < 0:
                raise ValueError(f"{name} must be non-negative")
            object.__setattr__(self, name, vals)

    def rate(self, name: str, q: int) -> float:
        vals = getattr(self, name)
        return vals[0] if len(vals) == 1 else vals[q]


def _dissipate(rho, op, rate):
    op_d = dag(op)
    return rate * (op @ rho @ op_d - 0.5 * (op_d @ op @ rho + rho @ op_d @ op))


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, cfg: LindbladConfig) -> np.ndarray:
    if rho.shape[-1] != h.shape[-1]:
        raise ValueError(f"dimension mismatch: state {rho.shape[-1]} vs Hamiltonian {h.shape[-1]}")
    n = n_qubits(rho)
    out = -1j * (h @ rho - rho @ h)
    for q in range(n):
        g1, g2 = cfg.rate("gamma1", q), cfg.rate("gamma2", q)
        if g1:
            out = out + _dissipate(rho, embed(LOWER, q, n), g1)
        if g2:
            out = out + _dissipate(rho, embed(Z, q, n), g2)
    return out


def liouvillian(h: np.ndarray, cfg: LindbladConfig) -> np.ndarray:
    """Superoperator ``L`` with ``vec(d rho/dt) = L vec(rho)`` (row-major ``vec``)."""
    d = h.shape[-1]
    basis = np.eye(d * d, dtype=complex).reshape(d * d, d, d)
    return lindblad_rhs(basis, h, cfg).reshape(d * d, d * d).T


def make_lindblad_rhs(h, cfg: LindbladConfig) -> Callable:
    """Bind ``h`` (a matrix or a function of time) into ``rhs(t, rho)``.

    The equation is linear, so the dissipative part (and the coherent part
    for constant ``h``) is applied as a precomputed superoperator.
    """
    if callable(h):
        d = np.asarray(h(0.0)).shape[-1]
        sup = liouvillian(np.zeros((d, d), dtype=complex), cfg).T

        def rhs(t, rho):
            hh = h(t)
            diss = (rho.reshape(rho.shape[:-2] + (d * d,)) @ sup).reshape(rho.shape)
            return diss - 1j * (hh @ rho - rho @ hh)

        return rhs
    h = np.asarray(h, dtype=complex)
    d = h.shape[-1]
    sup = liouvillian(h, cfg).T
    return lambda t, rho: (rho.reshape(rho.shape[:-2] + (d * d,)) @ sup).reshape(rho.shape)
