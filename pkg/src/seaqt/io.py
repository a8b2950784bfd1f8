"""Device configuration, curve files and fit reports.

The device file is YAML. Physical quantities carry their unit in the key
suffix (``freq_ghz``, ``delta_f_khz``, ``x0_us``, ``dt_ns`` ...) and are
converted at load to the internal units of :class:`QubitParams` (GHz, kHz,
us). Curve files are comma-separated text behind a ``# key: value`` header.
"""
from __future__ import annotations

import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .experiments import Curve, EngineSettings, QubitParams
from .hamiltonians import CRSpec, PulseEnvelope, mhz_to_rad_per_us
from .integrator import IntegratorConfig

FORMAT_TAG = "seaqt-curve 1"
_TIME = {"us": 1.0, "ns": 1e-3, "ms": 1e3}
_FREQ_GHZ = {"ghz": 1.0, "mhz": 1e-3, "khz": 1e-6}
_FREQ_KHZ = {"ghz": 1e6, "mhz": 1e3, "khz": 1.0}
_FREQ_MHZ = {"ghz": 1e3, "mhz": 1.0, "khz": 1e-3}


class ConfigError(ValueError):
    pass


def bundled_config_path() -> Path:
    return Path(str(resources.files("seaqt").joinpath("data/bogota.config")))


@dataclass(frozen=True)
class DeviceConfig:
    name: str
    qubits: tuple
    settings: EngineSettings = field(default_factory=EngineSettings)
    seed: int = 0
    shots: int = 8192

    def __post_init__(self):
        idx = [q.index for q in self.qubits]
        if len(set(idx)) != len(idx):
            raise ConfigError("qubit indices must be unique")
        if self.shots < 1:
            raise ConfigError("shots must be a positive integer")

    def qubit(self, index: int) -> QubitParams:
        for q in self.qubits:
            if q.index == index:
                return q
        raise ConfigError(f"no qubit with index {index} in config {self.name!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def config_hash(cfg: DeviceConfig) -> str:
    """Short sha256 of the canonical JSON form of ``cfg``."""
    text = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- loading -------------------------------------------------------------------


def _quantity(node: dict, base: str, units: dict, where: str, required: bool = True, used: set | None = None):
    """Value of ``base`` in the unit scale ``units`` (bare key means scale 1)."""
    hits = [(k, units[k[len(base) + 1:]]) for k in node if k.startswith(base + "_") and k[len(base) + 1:] in units]
    if base in node:
        hits.append((base, 1.0))
    if len(hits) > 1:
        raise ConfigError(f"{where}: field '{base}' given more than once ({', '.join(k for k, _ in hits)})")
    if not hits:
        if required:
            raise ConfigError(f"{where}: missing field '{base}'")
        return None
    key, scale = hits[0]
    if used is not None:
        used.add(key)
    val = node[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}: field '{base}' must be a number, got {val!r}")
    return float(val) * scale


def _plain(node: dict, key: str, kind, default, where: str, used: set):
    if key not in node:
        return default
    used.add(key)
    val = node[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
        raise ConfigError(f"{where}: field '{key}' must be {kind.__name__}, got {val!r}")
    return val


def _check_unused(node: dict, used: set, where: str):
    extra = sorted(set(node) - used)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(extra)}")


def _qubit(node, i: int) -> QubitParams:
    where = f"qubits[{i}]"
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping")
    used: set = set()
    index = _plain(node, "index", int, None, where, used)
    if index is None:
        raise ConfigError(f"{where}: missing field 'index'")
    vals = {
        "freq_ghz": _quantity(node, "freq", _FREQ_GHZ, where, used=used),
        "delta_f_khz": _quantity(node, "delta_f", _FREQ_KHZ, where, used=used),
    }
    for name in ("x0", "tau_dj", "inv_gamma1", "inv_gamma2"):
        vals[name] = _quantity(node, name, _TIME, where, used=used)
    for name in ("tau_dj_2q", "t1_ref", "t2_ref"):
        vals[name] = _quantity(node, name, _TIME, where, required=False, used=used)
    _check_unused(node, used, where)
    try:
        return QubitParams(index=index, **vals)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _settings(engine: dict, integ: dict) -> EngineSettings:
    used: set = set()
    where = "engine"
    kw = {
        "beta_omega": _plain(engine, "beta_omega", float, 1.25, where, used),
        "tau_floor_frac": _plain(engine, "tau_floor_frac", float, 1e-3, where, used),
        "tau_sign": _plain(engine, "tau_sign", int, 1, where, used),
        "initial_mixing": _plain(engine, "initial_mixing", float, 0.02, where, used),
        "form": _plain(engine, "form", str, "split", where, used),
        "pulse_resolved": _plain(engine, "pulse_resolved", bool, False, where, used),
    }
    zx = _quantity(engine, "cr_zx", _FREQ_MHZ, where, required=False, used=used)
    if zx is not None:
        kw["cr"] = CRSpec(nu_echo={"zx": mhz_to_rad_per_us(zx)})
    t_gate = _quantity(engine, "t_gate", _TIME, where, required=False, used=used)
    if t_gate is not None:
        kw["envelope"] = PulseEnvelope(t_gate=t_gate)
    _check_unused(engine, used, where)

    used = set()
    where = "integrator"
    ikw = {}
    dt = _quantity(integ, "dt", _TIME, where, required=False, used=used)
    if dt is not None:
        ikw["dt"] = dt
    for key in ("tol_trace", "tol_psd"):
        if key in integ:
            ikw[key] = _plain(integ, key, float, None, where, used)
    _check_unused(integ, used, where)
    try:
        return EngineSettings(integrator=IntegratorConfig(**ikw), **kw)
    except ValueError as exc:
        raise ConfigError(f"engine: {exc}") from None


def parse_config(text: str, source: str = "<string>") -> DeviceConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}:{mark.column + 1}" if mark is not None else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{source}{line}: parse error: {problem}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    used: set = set()
    where = source
    name = _plain(doc, "device", str, Path(source).stem, where, used)
    seed = _plain(doc, "seed", int, 0, where, used)
    shots = _plain(doc, "shots", int, 8192, where, used)
    if shots < 1:
        raise ConfigError(f"{source}: field 'shots' must be a positive integer, got {shots}")
    if seed < 0:
        raise ConfigError(f"{source}: field 'seed' must be non-negative")
    engine = _plain(doc, "engine", dict, {}, where, used)
    integ = _plain(doc, "integrator", dict, {}, where, used)
    qubits = _plain(doc, "qubits", list, None, where, used)
    if not qubits:
        raise ConfigError(f"{source}: missing field 'qubits'")
    _check_unused(doc, used, where)
    return DeviceConfig(name, tuple(_qubit(q, i) for i, q in enumerate(qubits)), _settings(engine, integ), seed, shots)


def load_config(path=None) -> DeviceConfig:
    """Read and validate a device file; ``None`` loads the bundled table."""
    path = bundled_config_path() if path is None else Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


# -- curve files ---------------------------------------------------------------


def _fmt(v) -> str:
    return f"{float(v):.12g}"


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the target directory and rename; ``-`` is stdout."""
    if str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_curve(curve: Curve, header: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# format: {FORMAT_TAG}\n")
    buf.write(f"# kind: {curve.kind}\n")
    for key in sorted(header):
        buf.write(f"# {key}: {header[key]}\n")
    names = list(curve.columns)
    cols = ["t_us"] + [c for n in names for c in (n, n + "_std")]
    buf.write(",".join(cols) + "\n")
    for i, t in enumerate(curve.times):
        row = [_fmt(t)]
        for n in names:
            val, std = curve.columns[n]
            row += [_fmt(val[i]), _fmt(std[i])]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def write_curve(curve: Curve, path, header: dict) -> None:
    atomic_write(path, format_curve(curve, header))


def read_curve(path) -> tuple[Curve, dict]:
    """Inverse of :func:`write_curve`; returns the curve and its header."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ValueError(f"cannot read curve file {path}: {exc.strerror}") from None
    header = {}
    body = []
    for n, line in enumerate(lines, 1):
        if line.startswith("#"):
            key, sep, val = line[1:].partition(":")
            if not sep:
                raise ValueError(f"{path}:{n}: malformed header line")
            header[key.strip()] = val.strip()
        elif line.strip():
            body.append((n, line))
    if header.get("format") != FORMAT_TAG:
        raise ValueError(f"{path}: not a curve file (missing '# format: {FORMAT_TAG}')")
    if not body:
        raise ValueError(f"{path}: no column header")
    cols = body[0][1].split(",")
    if cols[0] != "t_us" or len(cols) % 2 == 0:
        raise ValueError(f"{path}:{body[0][0]}: expected t_us followed by value/std column pairs")
    rows = []
    for n, line in body[1:]:
        parts = line.split(",")
        if len(parts) != len(cols):
            raise ValueError(f"{path}:{n}: expected {len(cols)} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(f"{path}:{n}: non-numeric field") from None
    data = np.array(rows, dtype=float).reshape(len(rows), len(cols))
    kind = header.pop("kind", "")
    header.pop("format")
    curve = Curve(kind, data[:, 0])
    for j in range(1, len(cols), 2):
        curve.columns[cols[j]] = (data[:, j], data[:, j + 1])
    return curve, header


def write_report(report: dict, path) -> None:
    atomic_write(path, yaml.safe_dump(report, sort_keys=True, default_flow_style=False))
