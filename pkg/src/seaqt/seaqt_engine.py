"""Steepest-entropy-ascent equation of motion for one or two qubits.

The right-hand side is

    d rho/dt = -i[H, rho] - sum_J ( D_J (x) rho_Jbar / tau_DJ
                                    + D_JR (x) rho_Jbar / tau_DR )

where ``D_J`` is the dephasing dissipator built from the determinant ratio
of local Hilbert-Schmidt inner products (energy- and trace-conserving) and
``D_JR`` is the reservoir relaxation term. ``tau_DR`` depends on the qubit
state through ``x0 * (1 + <Z>)``.

Functions accept stacked states of shape ``(..., d, d)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .qstate import (
    I2,
    RANK_EPS,
    StateError,
    Z,
    _subsystem,
    dag,
    expectation,
    kron,
    log_and_entropy,
    n_qubits,
    partial_trace,
    sqrt_and_log,
    trace,
)

log = logging.getLogger(__name__)

GRAM_EPS = 1e-14


class DegenerateStateError(ArithmeticError):
    """The Gram determinant of {I, H} vanishes (state or H_J is degenerate)."""


def _per_qubit(value) -> tuple | None:
    if value is None:
        return None
    return tuple(float(v) for v in np.atleast_1d(value))


@dataclass(frozen=True)
class SeaqtConfig:
    """Per-qubit SEAQT parameters; scalars are broadcast to every qubit.

    tau_dj:  dephasing relaxation time (us); ``None`` switches dephasing off.
    x0:      reservoir constant in ``tau_DR = x0 (1 + <Z>)`` (us); ``None``
             switches relaxation off.
    beta_r:  reservoir inverse temperature (1 / (rad/us)).
    omega_q: lab-frame qubit frequency (rad/us). When given, the dissipators
             use ``-omega_q Z / 2`` as the qubit energy operator, independent
             of the frame of the coherent Hamiltonian.
    form:    ``"split"`` (separate dephasing and relaxation terms) or
             ``"combined"`` (single reservoir dissipator with rate 1/tau_dj).
    initial_mixing: depolarising weight mixed into prepared states by the
             experiment pipelines; pure states are fixed points of SEAQT.
    compiled: use the compiled kernel for unbatched single-qubit states in
             the split form (same formulas, lower call overhead).
    stage_tol_psd: eigenvalues above ``-stage_tol_psd`` are treated as zero
             inside the right-hand side. Intermediate Runge-Kutta stages of
             near-pure states dip below zero at O(dt^2); completed steps are
             checked by the integrator at its own, tighter tolerance.

    An infinite ``tau_dj`` or ``x0`` switches that qubit's term off.
    """

    tau_dj: tuple | None = None
    x0: tuple | None = None
    beta_r: tuple | None = None
    omega_q: tuple | None = None
    tau_floor_frac: float = 1e-3
    tau_sign: int = 1
    rank_eps: float = RANK_EPS
    form: str = "split"
    initial_mixing: float = 0.0
    strict: bool = False
    compiled: bool = True
    stage_tol_psd: float = 1e-4

    def __post_init__(self):
        for name in ("tau_dj", "x0", "beta_r", "omega_q"):
            object.__setattr__(self, name, _per_qubit(getattr(self, name)))
        if self.tau_dj is not None and min(self.tau_dj) <= 0:
            raise ValueError("tau_dj must be positive")
        if self.x0 is not None:
            if min(self.x0) <= 0:
                raise ValueError("x0 must be positive")
            if self.beta_r is None:
                raise ValueError("relaxation (x0) needs beta_r")
        if not 0 < self.tau_floor_frac < 1:
            raise ValueError("tau_floor_frac must lie in (0, 1)")
        if self.tau_sign not in (1, -1):
            raise ValueError("tau_sign must be +1 or -1")
        if self.form not in ("split", "combined"):
            raise ValueError(f"unknown form {self.form!r}")
        if self.form == "combined" and self.beta_r is None:
            raise ValueError("combined form needs beta_r")
        if not 0 <= self.initial_mixing < 1:
            raise ValueError("initial_mixing must lie in [0, 1)")
        if self.stage_tol_psd <= 0:
            raise ValueError("stage_tol_psd must be positive")

    @cached_property
    def kernel_args(self) -> tuple:
        """Scalar arguments of the compiled single-qubit kernel (qubit 0)."""
        # zero switches a term off in the kernel
        return (
            self.active("tau_dj", 0) or 0.0,
            self.active("x0", 0) or 0.0,
            self.qubit("beta_r", 0) if self.beta_r is not None else 0.0,
            self.tau_floor_frac,
            float(self.tau_sign),
            self.rank_eps,
            self.stage_tol_psd,
            GRAM_EPS,
        )

    def qubit(self, name: str, q: int) -> float:
        vals = getattr(self, name)
        return vals[0] if len(vals) == 1 else vals[q]

    def active(self, name: str, q: int) -> float | None:
        """Finite ``tau_dj`` or ``x0`` of qubit ``q``, or ``None`` when the term is off."""
        if getattr(self, name) is None:
            return None
        v = self.qubit(name, q)
        return v if math.isfinite(v) else None


# -- local operators and inner products --------------------------------------


def local_projection(f: np.ndarray, rho: np.ndarray, j) -> np.ndarray:
    """``(F)^A = Tr_B[(I (x) rho_B) F]`` and ``(F)^B = Tr_A[(rho_A (x) I) F]``.

    For a single-qubit ``rho`` the operator is returned unchanged.
    """
    if rho.shape[-1] == 2:
        if f.shape[-1] != 2:
            raise ValueError("operator and state dimensions differ")
        return f
    if f.shape[-2:] != (4, 4) or rho.shape[-2:] != (4, 4):
        raise ValueError(f"local_projection needs 4x4 operands, got {f.shape[-2:]} and {rho.shape[-2:]}")
    f4 = f.reshape(f.shape[:-2] + (2, 2, 2, 2))
    if _subsystem(j) == 0:
        return np.einsum("...bc,...acdb->...ad", partial_trace(rho, "B"), f4)
    return np.einsum("...ac,...cbad->...bd", partial_trace(rho, "A"), f4)


def _reduced(rho: np.ndarray, j) -> np.ndarray:
    return rho if rho.shape[-1] == 2 else partial_trace(rho, j)


def _anticomm_inner(rho_j: np.ndarray, fj: np.ndarray, gj: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ji->...", rho_j, fj @ gj + gj @ fj).real


def hs_inner(f: np.ndarray, g: np.ndarray, rho: np.ndarray, j=None) -> np.ndarray:
    """``(F, G)^J = Tr_J(rho_J {(F)^J, (G)^J})`` (no factor 1/2)."""
    return _anticomm_inner(_reduced(rho, j), local_projection(f, rho, j), local_projection(g, rho, j))


def _re_tr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ji->...", a, b).real


def _cofactors(g_il, g_ii, g_ih, g_hl, g_hi, g_hh, strict):
    """First-row cofactors of the 3x3 determinant, normalised by the Gram determinant.

    Returns ``(c_log, c_eye, c_h)`` with ``D~ = sqrt(rho)(c_log L + c_eye I + c_h H)``
    and a mask of degenerate entries, whose coefficients are zero.
    """
    m11 = g_ii * g_hh - g_ih * g_hi
    m12 = g_il * g_hh - g_ih * g_hl
    m13 = g_il * g_hi - g_ii * g_hl
    degenerate = m11 <= GRAM_EPS * np.abs(g_ii * g_hh)
    if np.any(degenerate):
        if strict:
            raise DegenerateStateError("Gram determinant of {I, H} vanishes")
        log.debug("degenerate Gram determinant in %d state(s); dissipator set to zero", np.sum(degenerate))
        keep = ~degenerate
        safe = np.where(degenerate, 1.0, m11)
        return keep * 1.0, keep * -m12 / safe, keep * m13 / safe
    return np.ones_like(m11), -m12 / m11, m13 / m11


def _combine(c_log, c_eye, c_h, log_j, h_j):
    eye = np.eye(h_j.shape[-1])
    return c_log[..., None, None] * log_j + c_eye[..., None, None] * eye + c_h[..., None, None] * h_j


def dissipation_direction(
    sqrt_rho_j: np.ndarray,
    log_j: np.ndarray,
    h_j: np.ndarray,
    gram: np.ndarray,
    strict: bool = False,
) -> np.ndarray:
    """``D~_J`` from the 3x3 operator determinant over the 2x2 Gram determinant.

    ``gram[..., r, c]`` holds the inner products with rows (I, H) and columns
    (B ln rho, I, H). The operator-valued first row is expanded by cofactors.
    """
    coeffs = _cofactors(
        gram[..., 0, 0], gram[..., 0, 1], gram[..., 0, 2],
        gram[..., 1, 0], gram[..., 1, 1], gram[..., 1, 2],
        strict,
    )
    return sqrt_rho_j @ _combine(*coeffs, log_j, h_j)


def _symmetrized(sqrt_rho_j: np.ndarray, dtilde: np.ndarray) -> np.ndarray:
    a = sqrt_rho_j @ dtilde
    return 0.5 * (a + dag(a))


def _anticomm(rho_j: np.ndarray, bracket: np.ndarray) -> np.ndarray:
    # sqrt(rho) D~ = sqrt(rho) sqrt(rho) [..] = rho [..], so D = {rho, [..]} / 2
    a = rho_j @ bracket
    return 0.5 * (a + dag(a))


def _dephasing(rho, log_rho, h, j, strict, local_h=False):
    """Dephasing dissipator of qubit ``j``; ``local_h`` means ``h`` already acts on qubit ``j``."""
    rho_j = _reduced(rho, j)
    log_j = local_projection(log_rho, rho, j)
    h_j = h if local_h else local_projection(h, rho, j)
    # shifting H_J by a multiple of I leaves the projection unchanged; centre it for conditioning
    d = h_j.shape[-1]
    h_j = h_j - (trace(h_j).real / d)[..., None, None] * np.eye(d)
    # (F, G) = Tr(rho {F, G}) = 2 Re Tr(rho F G) for hermitian F, G
    tr_rho = trace(rho_j).real
    e_log = _re_tr(rho_j, log_j)
    e_h = _re_tr(rho_j, h_j)
    rho_h = rho_j @ h_j
    bracket = _combine(
        *_cofactors(2 * e_log, 2 * tr_rho, 2 * e_h, 2 * _re_tr(rho_h, log_j), 2 * e_h, 2 * _re_tr(rho_h, h_j), strict),
        log_j,
        h_j,
    )
    return _anticomm(rho_j, bracket)


def dephasing_dissipator(rho: np.ndarray, h: np.ndarray, j=None, rank_eps: float = RANK_EPS, strict: bool = False) -> np.ndarray:
    """Energy- and trace-conserving SEA dissipator ``D_J`` for qubit ``j``.

    ``rho`` and ``h`` are the full (one- or two-qubit) state and Hamiltonian;
    the result acts on qubit ``j`` only.
    """
    n_qubits(rho)
    log_rho = log_and_entropy(rho, rank_eps)[0]
    return _dephasing(rho, log_rho, h, j, strict)


def single_qubit_dephasing_dissipator(rho: np.ndarray, rank_eps: float = RANK_EPS) -> np.ndarray:
    """Dephasing part of the reservoir dissipator: ``D~ = sqrt(rho)(B ln rho + <s> I)``."""
    sq, log_rho, s = sqrt_and_log(rho, rank_eps)
    dtilde = sq @ (log_rho + s[..., None, None] * np.eye(rho.shape[-1]))
    return _symmetrized(sq, dtilde)


def relaxation_dissipator(rho: np.ndarray, h: np.ndarray, beta_r) -> np.ndarray:
    """``D_JR`` with ``D~_JR = sqrt(rho) beta_R (H - <e> I)``."""
    sq = sqrt_and_log(rho)[0]
    e = expectation(rho, h)
    beta = np.asarray(beta_r, dtype=float)[..., None, None]
    dtilde = sq @ (beta * (h - e[..., None, None] * np.eye(rho.shape[-1])))
    return _symmetrized(sq, dtilde)


def _relaxation(rho_j, h_j, beta_r):
    e = _re_tr(rho_j, h_j)
    return _anticomm(rho_j, beta_r * (h_j - e[..., None, None] * np.eye(h_j.shape[-1])))


def _reservoir(rho_j, log_j, s_j, h_j, beta_r):
    eye = np.eye(h_j.shape[-1])
    e = _re_tr(rho_j, h_j)
    bracket = log_j + s_j[..., None, None] * eye + beta_r * (h_j - e[..., None, None] * eye)
    return _anticomm(rho_j, bracket)


def reservoir_dissipator(rho: np.ndarray, h: np.ndarray, beta_r, rank_eps: float = RANK_EPS) -> np.ndarray:
    """Combined dephasing + relaxation term for a qubit coupled to a canonical reservoir.

    ``D~ = sqrt(rho)(B ln rho + <s> I + beta_R (H - <e> I))``; it vanishes at
    the Gibbs state of ``H`` at ``beta_R``.
    """
    return single_qubit_dephasing_dissipator(rho, rank_eps) + relaxation_dissipator(rho, h, beta_r)


# -- reservoir determinants ---------------------------------------------------


@dataclass(frozen=True)
class ReservoirMoments:
    """Entries of the system-reservoir Gram determinants.

    ``p_*`` are the identity-identity entries, the rest are the expected
    entropy, energy, energy-entropy and squared energy of each side.
    """

    p_j: float
    s_j: float
    e_j: float
    es_j: float
    e2_j: float
    p_r: float
    s_r: float
    e_r: float
    es_r: float
    e2_r: float

    def __post_init__(self):
        if self.p_r < 1 and not np.isclose(self.p_r, 1.0):
            raise ValueError("p_r must be >= 1")
        for side in ("j", "r"):
            e, e2 = getattr(self, f"e_{side}"), getattr(self, f"e2_{side}")
            if e2 - e**2 < -1e-12 * max(1.0, e2):
                raise ValueError(f"negative energy variance on side {side}")


def _moments(p: np.ndarray, energies: np.ndarray) -> tuple[float, float, float, float]:
    nz = p > 0
    logp = np.zeros_like(p)
    logp[nz] = np.log(p[nz])
    return float(-np.sum(p * logp)), float(np.sum(p * energies)), float(-np.sum(p * energies * logp)), float(np.sum(p * energies**2))


def canonical_moments(beta: float, energies: np.ndarray) -> tuple[float, float, float, float]:
    """``(<s>, <e>, <es>, <e^2>)`` of the Gibbs distribution over ``energies``."""
    energies = np.asarray(energies, dtype=float)
    w = -beta * (energies - energies.min())
    p = np.exp(w - np.logaddexp.reduce(w))
    return _moments(p, energies)


def system_moments(rho_j: np.ndarray, h_j: np.ndarray) -> tuple[float, float, float, float]:
    """``(<s>, <e>, <es>, <e^2>)`` with ``<es> = -Tr(rho H ln rho)``."""
    _, log_rho, s = sqrt_and_log(rho_j)
    e = expectation(rho_j, h_j)
    es = -np.trace(rho_j @ h_j @ log_rho).real
    e2 = expectation(rho_j, h_j @ h_j)
    return float(s), float(e), float(es), float(e2)


def reservoir_moments(
    rho_j: np.ndarray,
    h_j: np.ndarray,
    beta_r: float,
    reservoir_energies: np.ndarray,
    weighting: str = "state",
) -> ReservoirMoments:
    """Assemble determinant entries for a system facing a canonical reservoir.

    ``weighting="state"`` uses the state-weighted identity entries
    ``Tr(rho_X) = 1`` consistent with every other entry; ``"count"`` uses the
    number of eigenlevels of each side instead.
    """
    if weighting not in ("state", "count"):
        raise ValueError(f"unknown weighting {weighting!r}")
    sj, ej, esj, e2j = system_moments(rho_j, h_j)
    sr, er, esr, e2r = canonical_moments(beta_r, reservoir_energies)
    pj, pr = (1.0, 1.0) if weighting == "state" else (float(h_j.shape[-1]), float(len(reservoir_energies)))
    return ReservoirMoments(pj, sj, ej, esj, e2j, pr, sr, er, esr, e2r)


def reservoir_determinants(m: ReservoirMoments) -> tuple[float, float, float]:
    """``(B1, B3, Gamma)`` evaluated as 3x3 determinants."""
    es = m.es_j + m.es_r
    e2 = m.e2_j + m.e2_r
    b1 = np.linalg.det(np.array([[m.s_j, 0.0, m.e_j], [m.s_r, m.p_r, m.e_r], [es, m.e_r, e2]]))
    b3 = np.linalg.det(np.array([[m.s_j, m.p_j, 0.0], [m.s_r, 0.0, m.p_r], [es, m.e_j, m.e_r]]))
    gamma = np.linalg.det(np.array([[m.p_j, 0.0, m.e_j], [0.0, m.p_r, m.e_r], [m.e_j, m.e_r, e2]]))
    return float(b1), float(b3), float(gamma)


def reservoir_coefficients(m: ReservoirMoments) -> tuple[float, float]:
    """``(B1/Gamma, B3/Gamma)`` in the orientation of ``D~ = sqrt(rho)(B ln rho - B1/Gamma I - B3/Gamma H)``.

    The determinant ratios solve the Gram system for the projection of
    ``-ln rho``; the expanded dissipator carries them with the opposite sign,
    so a canonical reservoir gives ``B3/Gamma -> -beta_R``.
    """
    b1, b3, gamma = reservoir_determinants(m)
    if abs(gamma) <= GRAM_EPS * max(1.0, abs(m.p_j * m.p_r * (m.e2_j + m.e2_r))):
        raise ZeroDivisionError("Gamma determinant vanishes")
    return -b1 / gamma, -b3 / gamma


def reservoir_b3_over_gamma(m: ReservoirMoments) -> float:
    return reservoir_coefficients(m)[1]


def reservoir_b3_over_gamma_limit(m: ReservoirMoments) -> float:
    """Large-reservoir limit: minus the reservoir energy-entropy covariance over its energy variance."""
    var = m.e2_r - m.e_r**2
    if var <= 0:
        raise ZeroDivisionError("reservoir energy variance vanishes")
    return -(m.es_r - m.e_r * m.s_r) / var


def reservoir_dissipator_exact(rho: np.ndarray, h: np.ndarray, m: ReservoirMoments, rank_eps: float = RANK_EPS) -> np.ndarray:
    """Reservoir dissipator with the exact determinant coefficients instead of the beta_R limit."""
    b1g, b3g = reservoir_coefficients(m)
    sq, log_rho, _ = sqrt_and_log(rho, rank_eps)
    dtilde = sq @ (log_rho - b1g * np.eye(rho.shape[-1]) - b3g * h)
    return _symmetrized(sq, dtilde)


# -- relaxation time and the full right-hand side ----------------------------


def tau_dr(rho_j: np.ndarray, x0: float, floor_frac: float = 1e-3, sign: int = 1) -> np.ndarray:
    """``x0 (1 + <Z>)`` floored at ``floor_frac * x0``."""
    z = (rho_j[..., 0, 0] - rho_j[..., 1, 1]).real
    return np.maximum(x0 * (1.0 + sign * z), x0 * floor_frac)


def lift(d_j: np.ndarray, rho: np.ndarray, j) -> np.ndarray:
    """``D_A (x) rho_B`` for ``j='A'``, ``rho_A (x) D_B`` for ``j='B'``."""
    if rho.shape[-1] == 2:
        return d_j
    if _subsystem(j) == 0:
        a, b = d_j, partial_trace(rho, "B")
    else:
        a, b = partial_trace(rho, "A"), d_j
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    return out.reshape(out.shape[:-4] + (4, 4))


def lab_hamiltonian(omega_q: Sequence[float], n: int) -> np.ndarray:
    w = list(omega_q) * n if len(omega_q) == 1 else list(omega_q)
    if n == 1:
        return -0.5 * w[0] * Z
    return -0.5 * w[0] * kron(Z, I2) - 0.5 * w[1] * kron(I2, Z)


def seaqt_rhs(rho: np.ndarray, h: np.ndarray, cfg: SeaqtConfig, t: float | None = None, h_diss: np.ndarray | None = None) -> np.ndarray:
    """Time derivative of ``rho``.

    ``h`` generates the coherent part. Dissipators use ``h_diss`` if given,
    else the lab qubit Hamiltonian from ``cfg.omega_q``, else ``h``.
    """
    n = n_qubits(rho)
    out = -1j * (h @ rho - rho @ h)
    if cfg.tau_dj is None and cfg.x0 is None:
        return out
    # the lab Hamiltonian is a sum of local terms: its projection on qubit q is -omega_q Z / 2 plus a multiple of I
    lab = h_diss is None and cfg.omega_q is not None
    if h_diss is None and not lab:
        h_diss = h
    if cfg.compiled and n == 1 and rho.ndim == 2 and cfg.form == "split":
        h_j = -0.5 * cfg.qubit("omega_q", 0) * Z if lab else np.asarray(h_diss, dtype=complex)
        return out - _compiled_qubit(rho, h_j, cfg)
    log_rho = s_rho = None
    if cfg.tau_dj is not None and (cfg.form == "split" or n == 1):
        log_rho, s_rho = log_and_entropy(rho, cfg.rank_eps, cfg.stage_tol_psd, check=False)
    for q in range(n):
        j = None if n == 1 else q
        rho_j = _reduced(rho, q)
        h_j = -0.5 * cfg.qubit("omega_q", q) * Z if lab else _reduced_energy(h_diss, rho, q)
        if cfg.form == "combined":
            if cfg.tau_dj is not None:
                if n == 1:
                    log_j, s_j = log_rho, s_rho
                else:
                    log_j, s_j = log_and_entropy(rho_j, cfg.rank_eps, cfg.stage_tol_psd, check=False)
                if cfg.active("tau_dj", q):
                    d = _reservoir(rho_j, log_j, s_j, h_j, cfg.qubit("beta_r", q))
                    out = out - lift(d, rho, q) / cfg.qubit("tau_dj", q)
            continue
        if cfg.active("tau_dj", q):
            d = _dephasing(rho, log_rho, h_j if lab else h_diss, j, cfg.strict, local_h=lab)
            out = out - lift(d, rho, q) / cfg.qubit("tau_dj", q)
        if cfg.active("x0", q):
            d = _relaxation(rho_j, h_j, cfg.qubit("beta_r", q))
            tau = tau_dr(rho_j, cfg.qubit("x0", q), cfg.tau_floor_frac, cfg.tau_sign)
            out = out - lift(d, rho, q) / tau[..., None, None]
    return out


def _compiled_qubit(rho, h_j, cfg):
    d, status = _kernels.qubit_dissipation(
        np.ascontiguousarray(rho, dtype=complex), np.ascontiguousarray(h_j, dtype=complex), *cfg.kernel_args
    )
    if status == _kernels.NEGATIVE:
        raise StateError("negative eigenvalue beyond tolerance in SEAQT right-hand side")
    if status == _kernels.DEGENERATE:
        if cfg.strict:
            raise DegenerateStateError("Gram determinant of {I, H} vanishes")
        log.debug("degenerate Gram determinant; dephasing set to zero")
    return d


def _reduced_energy(h: np.ndarray, rho: np.ndarray, q: int) -> np.ndarray:
    return h if rho.shape[-1] == 2 else local_projection(h, rho, q)


def make_seaqt_rhs(h, cfg: SeaqtConfig, h_diss: np.ndarray | None = None) -> Callable:
    """Bind ``h`` (a matrix or a function of time) into ``rhs(t, rho)``."""
    if callable(h):
        return lambda t, rho: seaqt_rhs(rho, h(t), cfg, t, h_diss)
    return lambda t, rho: seaqt_rhs(rho, h, cfg, t, h_diss)
