"""Two-qubit entanglement metrics."""
from __future__ import annotations

import numpy as np

from .qstate import BELL_PHI, Y, kron, matrix_sqrt

YY = kron(Y, Y)


def concurrence(rho: np.ndarray, tol_psd: float = 1e-9) -> np.ndarray:
    """Wootters concurrence ``max(0, l1 - l2 - l3 - l4)``.

    The ``l_i`` are the square roots of the eigenvalues of
    ``rho (Y(x)Y) rho* (Y(x)Y)``, equivalently the singular values of
    ``sqrt(rho) sqrt(rho~)``. The SVD form keeps the small ``l_i`` accurate
    to machine precision instead of the square root of round-off.
    """
    if rho.shape[-2:] != (4, 4):
        raise ValueError("concurrence needs a two-qubit state")
    sq = matrix_sqrt(rho, tol_psd)
    lam = np.linalg.svd(sq @ YY @ sq.conj() @ YY, compute_uv=False)
    return np.maximum(0.0, lam[..., 0] - lam[..., 1] - lam[..., 2] - lam[..., 3])


def bell_fidelity(rho: np.ndarray, target: np.ndarray = BELL_PHI) -> np.ndarray:
    """Overlap ``<Phi|rho|Phi>`` with a pure target (|Phi> by default)."""
    return np.einsum("i,...ij,j->...", target.conj(), rho, target).real
