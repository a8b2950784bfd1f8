"""Dense density-matrix primitives.

Everything here works on plain ``numpy`` arrays of shape ``(..., d, d)`` so a
stack of states can be pushed through in one call. A density operator is just
such an array that is hermitian, unit trace and positive semidefinite within
the module tolerances.

Basis convention: ``|0> = (1, 0)``, ``Z|0> = +|0>``. The ground state has
``<Z> = +1`` and ``P(|1>) = (1 - <Z>) / 2``.
"""
from __future__ import annotations

import numpy as np

TOL_HERM = 1e-10
TOL_TRACE = 1e-8
TOL_PSD = 1e-9
RANK_EPS = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

# annihilation operator, lowers |1> -> |0>
LOWER = np.array([[0, 1], [0, 0]], dtype=complex)

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
BELL_PHI = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


class StateError(ValueError):
    """Input is not a valid density operator (or not the expected shape)."""


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def ket2dm(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.einsum("...i,...j->...ij", psi, psi.conj())


def trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


def hermitian_residual(a: np.ndarray) -> np.ndarray:
    return np.max(np.abs(a - dag(a)), axis=(-2, -1))


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dag(a))


def n_qubits(rho: np.ndarray) -> int:
    d = rho.shape[-1]
    if rho.shape[-2] != d or d not in (2, 4):
        raise StateError(f"expected a 2x2 or 4x4 operator, got {rho.shape[-2:]}")
    return 1 if d == 2 else 2


def validate_density(
    rho: np.ndarray,
    tol_herm: float = TOL_HERM,
    tol_trace: float = TOL_TRACE,
    tol_psd: float = TOL_PSD,
) -> np.ndarray:
    """Raise :class:`StateError` unless every matrix in ``rho`` is a valid state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim < 2 or rho.shape[-1] != rho.shape[-2]:
        raise StateError(f"density operator must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise StateError("density operator has non-finite entries")
    herm = np.max(hermitian_residual(rho))
    if herm > tol_herm:
        raise StateError(f"not hermitian: residual {herm:.3e} > {tol_herm:.1e}")
    tr = np.max(np.abs(trace(rho) - 1.0))
    if tr > tol_trace:
        raise StateError(f"trace deviates from 1 by {tr:.3e}")
    lam_min = np.min(np.linalg.eigvalsh(hermitize(rho)))
    if lam_min < -tol_psd:
        raise StateError(f"negative eigenvalue {lam_min:.3e}")
    return rho


def spectrum(a: np.ndarray, tol_herm: float = TOL_HERM, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a hermitian matrix, eigenvalues in descending order.

    Single backend for square roots, logarithms, entropies and PSD checks.
    ``check=False`` skips the hermiticity test (hot loops on states that are
    hermitian by construction).
    """
    if check:
        herm = np.max(hermitian_residual(a)) if a.size else 0.0
        if herm > tol_herm:
            raise StateError(f"not hermitian: residual {herm:.3e} > {tol_herm:.1e}")
        a = hermitize(a)
    w, v = np.linalg.eigh(a)
    return w[..., ::-1], v[..., ::-1]


def _clamped(w: np.ndarray, tol_psd: float) -> np.ndarray:
    if np.min(w) < -tol_psd:
        raise StateError(f"negative eigenvalue {np.min(w):.3e} beyond tolerance {tol_psd:.1e}")
    return np.clip(w, 0.0, None)


def from_spectrum(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (v * w[..., None, :]) @ dag(v)


def matrix_sqrt(rho: np.ndarray, tol_psd: float = TOL_PSD) -> np.ndarray:
    w, v = spectrum(rho)
    return from_spectrum(np.sqrt(_clamped(w, tol_psd)), v)


def range_log(rho: np.ndarray, rank_eps: float = RANK_EPS, tol_psd: float = TOL_PSD) -> np.ndarray:
    """``B ln rho``: the logarithm restricted to the support of ``rho``.

    Eigenvalues at or below ``rank_eps`` are treated as the kernel and
    contribute zero.
    """
    if rank_eps <= 0:
        raise ValueError("rank_eps must be positive")
    return log_and_entropy(rho, rank_eps, tol_psd)[0]


def log_and_entropy(
    rho: np.ndarray, rank_eps: float = RANK_EPS, tol_psd: float = TOL_PSD, check: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """``(B ln rho, entropy)`` from a single eigen-decomposition."""
    w, v = spectrum(rho, check=check)
    w = _clamped(w, tol_psd)
    support = w > rank_eps
    logw = np.where(support, np.log(np.where(support, w, 1.0)), 0.0)
    return from_spectrum(logw, v), -np.sum(w * logw, axis=-1)


def sqrt_and_log(
    rho: np.ndarray, rank_eps: float = RANK_EPS, tol_psd: float = TOL_PSD, check: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(sqrt(rho), B ln rho, entropy)`` from a single eigen-decomposition."""
    w, v = spectrum(rho, check=check)
    w = _clamped(w, tol_psd)
    support = w > rank_eps
    logw = np.where(support, np.log(np.where(support, w, 1.0)), 0.0)
    entropy = -np.sum(w * logw, axis=-1)
    return from_spectrum(np.sqrt(w), v), from_spectrum(logw, v), entropy


def expectation(rho: np.ndarray, obs: np.ndarray, tol_herm: float = 1e-8) -> np.ndarray:
    """Real expectation value ``Tr(rho obs)``."""
    if rho.shape[-1] != obs.shape[-1]:
        raise StateError(f"dimension mismatch: state {rho.shape[-1]} vs observable {obs.shape[-1]}")
    val = np.einsum("...ij,...ji->...", rho, obs)
    if np.max(np.abs(val.imag)) > tol_herm:
        raise StateError(f"expectation has imaginary residue {np.max(np.abs(val.imag)):.3e}")
    return val.real


def von_neumann_entropy(rho: np.ndarray, rank_eps: float = RANK_EPS, tol_psd: float = TOL_PSD) -> np.ndarray:
    w = _clamped(spectrum(rho)[0], tol_psd)
    support = w > rank_eps
    return -np.sum(np.where(support, w * np.log(np.where(support, w, 1.0)), 0.0), axis=-1)


def purity(rho: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ji->...", rho, rho).real


def _subsystem(keep) -> int:
    if keep in ("A", 0):
        return 0
    if keep in ("B", 1):
        return 1
    raise ValueError(f"subsystem must be 'A'/'B' (or 0/1), got {keep!r}")


def partial_trace(rho: np.ndarray, keep) -> np.ndarray:
    """Reduce a two-qubit operator to qubit ``keep`` ('A' is the first factor)."""
    if rho.shape[-2:] != (4, 4):
        raise StateError(f"partial_trace needs a 4x4 operator, got {rho.shape[-2:]}")
    r = rho.reshape(rho.shape[:-2] + (2, 2, 2, 2))
    if _subsystem(keep) == 0:
        return np.einsum("...ijkj->...ik", r)
    return np.einsum("...ijik->...jk", r)


def embed(op: np.ndarray, qubit, n: int) -> np.ndarray:
    """Lift a single-qubit operator onto qubit ``qubit`` of an ``n``-qubit register."""
    if n == 1:
        return op
    q = _subsystem(qubit)
    return kron(op, I2) if q == 0 else kron(I2, op)


def gibbs_state(h: np.ndarray, beta: float) -> np.ndarray:
    w, v = spectrum(h)
    p = np.exp(-beta * (w - np.min(w)))
    return from_spectrum(p / p.sum(), v)


def random_density(dim: int, rng: np.random.Generator, size=(), rank: int | None = None) -> np.ndarray:
    """Ginibre-ensemble random states, full rank unless ``rank`` is given."""
    rank = dim if rank is None else rank
    shape = tuple(np.atleast_1d(size)) if size != () else ()
    g = rng.normal(size=shape + (dim, rank)) + 1j * rng.normal(size=shape + (dim, rank))
    rho = g @ dag(g)
    return rho / trace(rho)[..., None, None]


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def propagator(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` for hermitian ``h``."""
    w, v = spectrum(h)
    return from_spectrum(np.exp(-1j * w * t), v)
