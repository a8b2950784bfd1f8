"""Two-qubit state tomography from the nine Pauli measurement settings.

Each setting measures qubit A in the eigenbasis of ``P_a`` and qubit B in
that of ``P_b``. Linear inversion recovers all 15 Pauli expectations (the
single-qubit ones averaged over the three settings that contain them) and
the estimate is mapped to the closest valid state by eigenvalue clipping
with uniform redistribution of the negative weight.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .qstate import I2, PAULI, dag, hermitize, kron, n_qubits, trace

SETTINGS = tuple(itertools.product("XYZ", repeat=2))
OUTCOMES = ("++", "+-", "-+", "--")
_SIGNS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])


class TomographyError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementRecord:
    """Outcome counts for one setting, ordered ``(++, +-, -+, --)``.

    Counts may be non-integer expected counts (the infinite-shot limit is
    expressed as probabilities times ``shots``).
    """

    setting: tuple
    counts: tuple
    shots: float

    def __post_init__(self):
        setting = tuple(self.setting)
        if len(setting) != 2 or any(p not in "XYZ" or len(p) != 1 for p in setting):
            raise TomographyError(f"setting must be a pair drawn from X, Y, Z; got {self.setting!r}")
        counts = tuple(self.counts)
        if len(counts) != 4 or min(counts) < 0:
            raise TomographyError("counts must be four non-negative numbers")
        if self.shots <= 0:
            raise TomographyError("shots must be positive")
        if not np.isclose(sum(counts), self.shots, rtol=1e-12, atol=0):
            raise TomographyError(f"counts {counts} do not sum to shots {self.shots}")
        object.__setattr__(self, "setting", setting)
        object.__setattr__(self, "counts", counts)

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.shots


def _projector(pauli: str, sign: int) -> np.ndarray:
    return 0.5 * (I2 + sign * PAULI[pauli])


def outcome_probabilities(rho: np.ndarray, setting) -> np.ndarray:
    """Probabilities of ``(++, +-, -+, --)`` for a projective ``P_a (x) P_b`` measurement."""
    if n_qubits(rho) != 2:
        raise TomographyError("tomography needs a two-qubit state")
    a, b = setting
    probs = np.array([trace(rho @ kron(_projector(a, sa), _projector(b, sb))).real for sa, sb in _SIGNS])
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def simulate_counts(rho: np.ndarray, setting, shots: int, seed) -> MeasurementRecord:
    """Multinomial draw of ``shots`` outcomes for one setting."""
    if int(shots) != shots or shots < 1:
        raise TomographyError("shots must be a positive integer")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(int(shots), outcome_probabilities(rho, setting))
    return MeasurementRecord(tuple(setting), tuple(int(c) for c in counts), int(shots))


def simulate_tomography(rho: np.ndarray, shots: int, seed) -> list[MeasurementRecord]:
    """Counts for all nine settings; each setting draws from its own child seed."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(len(SETTINGS))
    return [simulate_counts(rho, s, shots, c) for s, c in zip(SETTINGS, children)]


def exact_records(rho: np.ndarray, shots: float = 1.0) -> list[MeasurementRecord]:
    """Infinite-shot records: expected counts ``shots * p``."""
    return [MeasurementRecord(s, tuple(shots * outcome_probabilities(rho, s)), shots) for s in SETTINGS]


def pauli_expectations(records) -> dict:
    """Estimate the 15 non-trivial Pauli expectations keyed ``'XY'``, ``'XI'``, ``'IZ'`` ...

    Two-qubit terms come from the joint outcome parity of their setting;
    single-qubit terms are the mean of the marginal over the three settings
    that measure that Pauli.
    """
    by_setting = {}
    for rec in records:
        if rec.setting in by_setting:
            raise TomographyError(f"duplicate setting {rec.setting}")
        by_setting[rec.setting] = rec.frequencies
    missing = [s for s in SETTINGS if s not in by_setting]
    if missing:
        raise TomographyError(f"missing setting(s): {', '.join(a + b for a, b in missing)}")
    out = {}
    marg_a = {p: [] for p in "XYZ"}
    marg_b = {p: [] for p in "XYZ"}
    for (a, b), f in by_setting.items():
        out[a + b] = float(f @ (_SIGNS[:, 0] * _SIGNS[:, 1]))
        marg_a[a].append(float(f @ _SIGNS[:, 0]))
        marg_b[b].append(float(f @ _SIGNS[:, 1]))
    for p in "XYZ":
        out[p + "I"] = float(np.mean(marg_a[p]))
        out["I" + p] = float(np.mean(marg_b[p]))
    return out


def linear_inversion(records) -> np.ndarray:
    """``rho_lin = (1/4) sum_ij c_ij P_i (x) P_j`` with ``c_II = 1``; unit trace, possibly not PSD."""
    coeffs = pauli_expectations(records)
    rho = kron(I2, I2) / 4
    for key, c in coeffs.items():
        rho = rho + c * kron(PAULI[key[0]], PAULI[key[1]]) / 4
    return rho


def project_psd(mu: np.ndarray) -> np.ndarray:
    """Closest probability vector to the unit-sum eigenvalues ``mu`` under the clipping rule.

    Walking up from the smallest eigenvalue, negative values are zeroed and
    their weight is spread evenly over the remaining ones until none is
    negative.
    """
    order = np.argsort(mu)[::-1]
    m = np.asarray(mu, dtype=float)[order]
    lam = np.zeros_like(m)
    i = len(m)
    acc = 0.0
    while i > 0 and m[i - 1] + acc / i < 0:
        acc += m[i - 1]
        i -= 1
    lam[:i] = m[:i] + acc / i
    out = np.empty_like(lam)
    out[order] = lam
    return out


def nearest_state(rho: np.ndarray) -> np.ndarray:
    """Map a unit-trace hermitian matrix to the closest density operator (eigenvalue clipping)."""
    w, v = np.linalg.eigh(hermitize(rho))
    w = w / np.sum(w)
    lam = project_psd(w)
    out = (v * lam) @ dag(v)
    return hermitize(out)


def reconstruct(records) -> np.ndarray:
    """Linear inversion followed by the PSD projection."""
    return nearest_state(linear_inversion(records))
