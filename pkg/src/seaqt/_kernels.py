"""Compiled single-qubit dissipator.

Same formulas as the array code in :mod:`seaqt.seaqt_engine`, written for one
unbatched 2x2 state so long single-qubit trajectories avoid per-call numpy
overhead. The array code remains the reference; tests compare the two.
"""
from __future__ import annotations

import numpy as np
from numba import njit

OK, DEGENERATE, NEGATIVE = 0, 1, 2


@njit(cache=True)
def _re_tr(a, b):
    return (a[0, 0] * b[0, 0] + a[0, 1] * b[1, 0] + a[1, 0] * b[0, 1] + a[1, 1] * b[1, 1]).real


@njit(cache=True)
def _anticomm(rho, bracket):
    a = rho @ bracket
    return 0.5 * (a + a.conj().T)


@njit(cache=True)
def qubit_dissipation(rho, h, tau_dj, x0, beta_r, floor_frac, sign, rank_eps, tol_psd, gram_eps):
    """Return ``(D_J / tau_DJ + D_JR / tau_DR, status)`` for a single 2x2 state.

    ``tau_dj <= 0`` or ``x0 <= 0`` switches the corresponding term off. On a
    degenerate Gram determinant the dephasing term is zero and ``status`` is
    ``DEGENERATE``; a negative eigenvalue beyond ``tol_psd`` gives ``NEGATIVE``.
    """
    out = np.zeros((2, 2), dtype=np.complex128)
    status = OK
    eye = np.eye(2, dtype=np.complex128)
    if tau_dj > 0:
        w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        logw = np.zeros(2)
        for i in range(2):
            if w[i] < -tol_psd:
                return out, NEGATIVE
            if w[i] > rank_eps:
                logw[i] = np.log(w[i])
        log_rho = (v * logw) @ v.conj().T
        hc = h - 0.5 * (h[0, 0] + h[1, 1]).real * eye
        tr_rho = (rho[0, 0] + rho[1, 1]).real
        e_log = _re_tr(rho, log_rho)
        e_h = _re_tr(rho, hc)
        rho_h = rho @ hc
        g_il, g_ii, g_ih = 2 * e_log, 2 * tr_rho, 2 * e_h
        g_hl, g_hi, g_hh = 2 * _re_tr(rho_h, log_rho), 2 * e_h, 2 * _re_tr(rho_h, hc)
        m11 = g_ii * g_hh - g_ih * g_hi
        m12 = g_il * g_hh - g_ih * g_hl
        m13 = g_il * g_hi - g_ii * g_hl
        if m11 <= gram_eps * abs(g_ii * g_hh):
            status = DEGENERATE
        else:
            bracket = log_rho - (m12 / m11) * eye + (m13 / m11) * hc
            out += _anticomm(rho, bracket) / tau_dj
    if x0 > 0:
        e = _re_tr(rho, h)
        z = (rho[0, 0] - rho[1, 1]).real
        tau = max(x0 * (1.0 + sign * z), x0 * floor_frac)
        out += _anticomm(rho, beta_r * (h - e * eye)) / tau
    return out, status
