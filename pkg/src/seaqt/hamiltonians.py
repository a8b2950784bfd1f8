"""Hamiltonians, pulse envelopes and ideal gates.

Units: hbar = 1, time in microseconds, angular frequencies in rad/us.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qstate import I2, X, Y, Z, kron, propagator

TWO_PI = 2.0 * np.pi


def ghz_to_rad_per_us(f_ghz: float) -> float:
    return TWO_PI * 1e3 * f_ghz


def khz_to_rad_per_us(f_khz: float) -> float:
    return TWO_PI * 1e-3 * f_khz


def mhz_to_rad_per_us(f_mhz: float) -> float:
    return TWO_PI * f_mhz


@dataclass(frozen=True)
class TransmonSpec:
    omega: float
    delta: float = 0.0
    levels: int = 2

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("a transmon needs at least 2 levels")
        if self.omega <= 0:
            raise ValueError("transmon frequency must be positive")


@dataclass(frozen=True)
class PulseEnvelope:
    """Gaussian drive with an optional derivative (DRAG) component.

    ``t_gate`` and ``sigma`` are in microseconds; ``sigma`` defaults to a
    quarter of the gate time and ``t0`` to its midpoint.
    """

    t_gate: float = 0.0352
    sigma: float | None = None
    t0: float | None = None
    amp: float = 1.0
    drag_beta: float = 0.0

    def __post_init__(self):
        if self.t_gate <= 0:
            raise ValueError("t_gate must be positive")
        if self.sigma is None:
            object.__setattr__(self, "sigma", self.t_gate / 4)
        if self.t0 is None:
            object.__setattr__(self, "t0", self.t_gate / 2)
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class DriveSpec:
    delta_omega: float
    envelope: PulseEnvelope = field(default_factory=PulseEnvelope)


@dataclass(frozen=True)
class CRSpec:
    """Cross-resonance coefficients in rad/us.

    ``nu`` holds the direct-drive terms (zx, iz, ix, zi, zz); ``nu_echo`` the
    terms left after the echo (zx, iy, iz, plus optional zy/zz crosstalk).
    ``amp_scale`` records the CR amplitude (relative to the default pulse)
    at which the coefficients apply; it is carried as metadata only.
    """

    nu: dict = field(default_factory=dict)
    nu_echo: dict = field(default_factory=dict)
    amp_scale: float = 0.1
    width: float = 0.0

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("CR width must be non-negative")
        bad = set(self.nu) - {"zx", "iz", "ix", "zi", "zz"}
        bad |= set(self.nu_echo) - {"zx", "iy", "iz", "zy", "zz"}
        if bad:
            raise ValueError(f"unknown CR coefficient(s): {sorted(bad)}")


def transmon_hamiltonian(spec: TransmonSpec) -> np.ndarray:
    """Duffing transmon truncated to ``spec.levels`` levels (diagonal)."""
    j = np.arange(spec.levels)
    omega_j = (spec.omega - spec.delta / 2) * j + (spec.delta / 2) * j**2
    return np.diag(omega_j).astype(complex)


def two_level_hamiltonian(omega_q: float) -> np.ndarray:
    return -0.5 * omega_q * Z


def drag_envelope(t, env: PulseEnvelope):
    """Gaussian ``exp(-((t-t0)/sigma)^2) / (sqrt(2 pi) sigma)`` plus ``drag_beta`` times its derivative."""
    u = (np.asarray(t, dtype=float) - env.t0) / env.sigma
    g = np.exp(-(u**2)) / (np.sqrt(2 * np.pi) * env.sigma)
    dg = -2.0 * u / env.sigma * g
    return env.amp * (g + env.drag_beta * dg)


def rotation_amplitude(env: PulseEnvelope, angle: float) -> float:
    """Amplitude that makes ``theta_G(t) Y`` rotate by ``angle`` over the gate window."""
    from scipy.special import erf

    # H = theta(t) Y rotates by 2 * integral(theta) over [0, t_gate]; the
    # derivative part integrates to g(t_gate) - g(0), zero for a centred pulse
    lo, hi = -env.t0 / env.sigma, (env.t_gate - env.t0) / env.sigma
    area = (erf(hi) - erf(lo)) / (2 * np.sqrt(2))
    return angle / (2.0 * area)


def drive_hamiltonian(t: float, drive: DriveSpec) -> np.ndarray:
    return drive.delta_omega * Z + drag_envelope(t, drive.envelope) * Y


def _pp(a, b):
    return kron(a, b)


ZX, IZ, IX, ZI, ZZ = _pp(Z, X), _pp(I2, Z), _pp(I2, X), _pp(Z, I2), _pp(Z, Z)
IY, ZY = _pp(I2, Y), _pp(Z, Y)


def cr_hamiltonian(spec: CRSpec, sign: int = 1, echoed: bool = False) -> np.ndarray:
    """Effective CR Hamiltonian; the control qubit is the first tensor factor.

    With ``echoed`` the post-echo form is returned. Otherwise ``sign=-1``
    gives ``H(-Omega)``: only the drive-odd terms (zx, ix) flip.
    """
    h = np.zeros((4, 4), dtype=complex)
    if echoed:
        terms = {"zx": ZX, "iy": IY, "iz": IZ, "zy": ZY, "zz": ZZ}
        for k, v in spec.nu_echo.items():
            h += v * terms[k] / 2
        return h
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    odd = {"zx", "ix"}
    terms = {"zx": ZX, "iz": IZ, "ix": IX, "zi": ZI, "zz": ZZ}
    for k, v in spec.nu.items():
        h += (sign if k in odd else 1) * v * terms[k] / 2
    return h


XI = _pp(X, I2)


def echo_propagator(spec: CRSpec, t_g: float) -> np.ndarray:
    """``XI . exp(-i H(-Omega) t_g) . XI . exp(-i H(Omega) t_g)``."""
    if t_g < 0:
        raise ValueError("t_g must be non-negative")
    u_plus = propagator(cr_hamiltonian(spec, +1), t_g)
    u_minus = propagator(cr_hamiltonian(spec, -1), t_g)
    return XI @ u_minus @ XI @ u_plus


def ry(angle: float) -> np.ndarray:
    return propagator(Y, angle / 2)


def rx(angle: float) -> np.ndarray:
    return propagator(X, angle / 2)


def rz(angle: float) -> np.ndarray:
    return propagator(Z, angle / 2)


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

# The ZX(pi/2) rotation equals CNOT up to Rz(-pi/2) on the control and
# Rx(-pi/2) on the target. Applying this frame maps the ZX-rotated state onto
# the |Phi> target used for the fidelity.
CNOT_FRAME = kron(rz(-np.pi / 2), rx(-np.pi / 2))
