"""Slow, independent reference implementations used only by the tests.

Everything here is written from the defining formulas with explicit loops,
scipy matrix functions and numeric determinants; nothing is shared with
the package internals.
"""
import numpy as np
from scipy.linalg import logm, sqrtm


def partial_trace(m, keep):
    out = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for k in range(2):
            for e in range(2):
                out[i, k] += m[2 * i + e, 2 * k + e] if keep == 0 else m[2 * e + i, 2 * e + k]
    return out


def local_projection(f, rho, j):
    """(F)^A = Tr_B[(I (x) rho_B) F], (F)^B = Tr_A[(rho_A (x) I) F]."""
    if rho.shape[0] == 2:
        return np.array(f, dtype=complex)
    eye = np.eye(2)
    if j == 0:
        return partial_trace(np.kron(eye, partial_trace(rho, 1)) @ f, 0)
    return partial_trace(np.kron(partial_trace(rho, 0), eye) @ f, 1)


def reduced(rho, j):
    if rho.shape[0] == 2:
        return rho
    return partial_trace(rho, j)


def hs_inner(f, g, rho, j=0):
    fj, gj = local_projection(f, rho, j), local_projection(g, rho, j)
    return np.trace(reduced(rho, j) @ (fj @ gj + gj @ fj)).real


def dephasing_dissipator(rho, h, j=0):
    """D_J from the operator determinant ratio, full-rank states only."""
    log_rho = logm(rho)
    eye = np.eye(rho.shape[0])
    cols = [log_rho, eye, h]
    rows = [eye, h]
    g = np.array([[hs_inner(r, c, rho, j) for c in cols] for r in rows])
    gamma = np.linalg.det(g[:, 1:])
    ops = [local_projection(c, rho, j) for c in cols]
    num = sum((-1) ** k * ops[k] * np.linalg.det(np.delete(g, k, axis=1)) for k in range(3))
    sq = sqrtm(reduced(rho, j))
    dt = sq @ num / gamma
    a = sq @ dt
    return 0.5 * (a + a.conj().T)


def lifted(d_j, rho, j):
    if rho.shape[0] == 2:
        return d_j
    return np.kron(d_j, reduced(rho, 1)) if j == 0 else np.kron(reduced(rho, 0), d_j)


def entropy(rho):
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log(w)))
