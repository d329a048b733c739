"""Declarative experiment configuration.

A config is a JSON object with a ``kind`` and up to six blocks::

    {"kind": "GrRamsey",
     "atom": {...}, "drive": {...}, "noise": {...},
     "detection": {"p1d": 0.972, "prd": 0.887},
     "scan": {"variable": "gap", "values": {"start": "0us", "stop": "20us", "num": 41}},
     "sequence": {...}}

Quantities accept unit strings (see :mod:`rydcoh.units`); everything is
stored in SI with angular frequencies. Unknown keys anywhere are an error.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .atoms import AtomPhysicalParams
from .constants import TWO_PI
from .units import UnitError, parse_quantity


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


KINDS = (
    "RabiScan",
    "GroundRamsey",
    "GrRamsey",
    "SpinEcho",
    "T1TwoPi",
    "PiTrain",
    "ControlFringe",
    "CzGate",
    "CzDetuningScan",
    "TemperatureSweep",
    "BellSequence",
)

# scan variable expected by each kind, None for kinds without a scan
SCAN_VARIABLE = {
    "RabiScan": "duration",
    "GroundRamsey": "gap",
    "GrRamsey": "gap",
    "SpinEcho": "gap",
    "T1TwoPi": "gap",
    "PiTrain": "n_pulses",
    "ControlFringe": "T",
    "CzGate": None,
    "CzDetuningScan": "control_detuning",
    "TemperatureSweep": "temperature",
    "BellSequence": "phase",
}

SCAN_UNIT = {
    "duration": "time",
    "gap": "time",
    "T": "time",
    "n_pulses": "number",
    "control_detuning": "frequency",
    "temperature": "temperature",
    "phase": "number",
}

DETECTION_KINDS = {"RabiScan", "GrRamsey", "SpinEcho", "T1TwoPi", "PiTrain"}
GATE_KINDS = {"CzGate", "CzDetuningScan", "TemperatureSweep", "BellSequence"}


def _unit(kind: str, **kw):
    return field(metadata={"unit": kind}, **kw)


@dataclass(frozen=True)
class DriveConfig:
    """Laser and microwave drives.

    ``rydberg_rabi`` is the ground-Rydberg Rabi frequency used by the
    effective (two- or three-level) models and the gates; the ``omega_*``
    and ``delta1`` fields describe the two-photon ladder.
    """

    omega_red: float = _unit("frequency", default=TWO_PI * 215e6)
    omega_blue: float = _unit("frequency", default=TWO_PI * 62e6)
    delta1: float = _unit("frequency", default=-TWO_PI * 5.7e9)
    compensate_stark: bool = True
    rydberg_rabi: float = _unit("frequency", default=TWO_PI * 1.188e6)
    rydberg_detuning: float = _unit("frequency", default=0.0)
    ground_rabi: float = _unit("frequency", default=TWO_PI * 33.9e3)
    ground_detuning: float = _unit("frequency", default=0.0)
    fringe_frequency: float = _unit("frequency", default=0.0)
    blockade: float = _unit("frequency", default=TWO_PI * 1e9)
    model: str = "effective"
    transition: str = "two_photon"


@dataclass(frozen=True)
class NoiseConfig:
    """Noise channels.

    ``sigma_red``/``sigma_blue`` are absolute Rabi deviations of the two
    ladder lasers; effective models convert them to a relative deviation of
    the ground-Rydberg Rabi frequency. ``t1`` lists Rydberg decay channels
    (lifetimes), ``t2_prime`` adds homogeneous dephasing of the
    ground-Rydberg coherence.
    """

    temperature: float = _unit("temperature", default=0.0)
    doppler: bool = True
    rabi: bool = True
    sigma_red: float = _unit("frequency", default=0.0)
    sigma_blue: float = _unit("frequency", default=0.0)
    t2_prime: float | None = _unit("time", default=None)
    t1: tuple = _unit("time", default=())
    ground_t2_star: float | None = _unit("time", default=None)
    doppler_atoms: str = "both"
    spontaneous_decay: bool = True


@dataclass(frozen=True)
class DetectionConfig:
    p1d: float = _unit("number", default=1.0)
    prd: float = _unit("number", default=1.0)
    pre: float = _unit("number", default=1.0)


@dataclass(frozen=True)
class ScanConfig:
    variable: str
    values: tuple


@dataclass(frozen=True)
class SequenceConfig:
    """Kind-specific sequence options.

    ``dt_values``: wait grid of the control fringe. ``ramsey_gaps``: gap
    grid of the temperature sweep's Ramsey runs (empty picks one from the
    expected Doppler time). ``readout`` selects populations or quadrature
    contrast for Ramsey-type kinds. ``fidelity`` and ``phase_reference``
    select the gate figure of merit.
    """

    dt_values: tuple = _unit("time", default=())
    ramsey_gaps: tuple = _unit("time", default=())
    readout: str = "population"
    fidelity: str = "average"
    phase_reference: str = "calibrated"
    control_detuning: float = _unit("frequency", default=0.0)
    target_detuning: float = _unit("frequency", default=0.0)


_CHOICES = {
    ("drive", "model"): ("effective", "four_level"),
    ("drive", "transition"): ("two_photon", "single_photon"),
    ("noise", "doppler_atoms"): ("control", "both"),
    ("sequence", "readout"): ("population", "contrast"),
    ("sequence", "fidelity"): ("average", "process"),
    ("sequence", "phase_reference"): ("calibrated", "optimized"),
}

_ATOM_UNITS = {
    "mass": "mass",
    "wavelength_red": "length",
    "wavelength_blue": "length",
    "counter_propagating": "bool",
    "gamma_p": "frequency",
    "rydberg_lifetime": "time",
    "branching_to_dark": "number",
    "wavelength_single": "length",
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    atom: AtomPhysicalParams = field(default_factory=AtomPhysicalParams)
    drive: DriveConfig = field(default_factory=DriveConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    detection: DetectionConfig | None = None
    scan: ScanConfig | None = None
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    seed: int | None = None
    shots: int | None = None
    description: str = ""

    def __post_init__(self):
        validate(self)

    @property
    def scan_values(self) -> np.ndarray:
        return np.array(self.scan.values if self.scan else (), dtype=float)

    @property
    def k_drive(self) -> float:
        """Wave-vector magnitude of the ground-Rydberg excitation."""
        if self.drive.transition == "single_photon":
            return self.atom.k_single
        return self.atom.k_eff

    def replace(self, **blocks) -> "ExperimentConfig":
        """Copy with whole blocks or block fields replaced.

        ``cfg.replace(noise={"temperature": 1e-6})`` updates one field of a
        block; passing a block object replaces it entirely.
        """
        changes = {}
        for name, value in blocks.items():
            current = getattr(self, name)
            if isinstance(value, Mapping):
                if dataclasses.is_dataclass(current):
                    value = dataclasses.replace(current, **value)
                elif name in _BLOCKS:
                    value = _BLOCKS[name](**value)
            changes[name] = value
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """Plain-JSON form in SI units; parses back to an equal config."""
        out: dict[str, Any] = {"kind": self.kind}
        for name in ("atom", "drive", "noise", "detection", "scan", "sequence"):
            block = getattr(self, name)
            if block is not None:
                out[name] = {k: _jsonable(v) for k, v in dataclasses.asdict(block).items()}
        for name in ("seed", "shots"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        if self.description:
            out["description"] = self.description
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


_BLOCKS = {
    "atom": AtomPhysicalParams,
    "drive": DriveConfig,
    "noise": NoiseConfig,
    "detection": DetectionConfig,
    "scan": ScanConfig,
    "sequence": SequenceConfig,
}


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def _parse_value(path: str, raw, unit: str, optional: bool = False):
    if raw is None:
        if optional:
            return None
        raise ConfigError(path, "value required")
    if unit == "bool":
        if not isinstance(raw, bool):
            raise ConfigError(path, f"expected true/false, got {raw!r}")
        return raw
    try:
        return parse_quantity(raw, unit)
    except UnitError as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_grid(path: str, raw, unit: str) -> tuple:
    if isinstance(raw, Mapping):
        unknown = set(raw) - {"start", "stop", "num"}
        if unknown:
            raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
        for key in ("start", "stop", "num"):
            if key not in raw:
                raise ConfigError(f"{path}.{key}", "missing")
        num = raw["num"]
        if isinstance(num, bool) or not isinstance(num, int) or num < 1:
            raise ConfigError(f"{path}.num", "must be a positive integer")
        start = _parse_value(f"{path}.start", raw["start"], unit)
        stop = _parse_value(f"{path}.stop", raw["stop"], unit)
        return tuple(float(x) for x in np.linspace(start, stop, num))
    if isinstance(raw, (list, tuple)):
        return tuple(_parse_value(f"{path}[{i}]", x, unit) for i, x in enumerate(raw))
    raise ConfigError(path, "expected a list or {start, stop, num}")


def _parse_block(name: str, cls, raw, units: Mapping[str, str] | None = None):
    if not isinstance(raw, Mapping):
        raise ConfigError(name, "expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        path = f"{name}.{key}"
        if key not in fields:
            raise ConfigError(path, "unknown key")
        f = fields[key]
        unit = units[key] if units else f.metadata.get("unit")
        if (name, key) in _CHOICES:
            if value not in _CHOICES[(name, key)]:
                raise ConfigError(path, f"expected one of {_CHOICES[(name, key)]}, got {value!r}")
            kwargs[key] = value
        elif unit is None:
            if f.type in ("bool", bool):
                kwargs[key] = _parse_value(path, value, "bool")
            else:
                kwargs[key] = value
        elif isinstance(f.default, tuple):
            kwargs[key] = _parse_grid(path, value, unit)
        else:
            kwargs[key] = _parse_value(path, value, unit, optional=f.default is None)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, str(exc)) from None


_TOP_KEYS = {"kind", "atom", "drive", "noise", "detection", "scan", "sequence", "seed", "shots", "description"}


def parse_config(raw: Mapping) -> ExperimentConfig:
    """Build a validated :class:`ExperimentConfig` from parsed JSON."""
    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "config must be a JSON object")
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(key, "unknown key")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError("kind", f"expected one of {KINDS}, got {kind!r}")

    blocks: dict[str, Any] = {}
    if "atom" in raw:
        blocks["atom"] = _parse_block("atom", AtomPhysicalParams, raw["atom"], _ATOM_UNITS)
    if "drive" in raw:
        blocks["drive"] = _parse_block("drive", DriveConfig, raw["drive"])
    if "noise" in raw:
        blocks["noise"] = _parse_block("noise", NoiseConfig, raw["noise"])
    if raw.get("detection") is not None:
        blocks["detection"] = _parse_block("detection", DetectionConfig, raw["detection"])
    if "sequence" in raw:
        blocks["sequence"] = _parse_block("sequence", SequenceConfig, raw["sequence"])
    if raw.get("scan") is not None:
        scan = raw["scan"]
        if not isinstance(scan, Mapping):
            raise ConfigError("scan", "expected an object")
        for key in scan:
            if key not in ("variable", "values"):
                raise ConfigError(f"scan.{key}", "unknown key")
        variable = scan.get("variable")
        if variable not in SCAN_UNIT:
            raise ConfigError("scan.variable", f"unknown scan variable {variable!r}")
        if "values" not in scan:
            raise ConfigError("scan.values", "missing")
        blocks["scan"] = ScanConfig(variable, _parse_grid("scan.values", scan["values"], SCAN_UNIT[variable]))
    for key in ("seed", "shots"):
        if key in raw and raw[key] is not None:
            v = raw[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 0 or (key == "shots" and v < 1):
                raise ConfigError(key, "must be a non-negative integer" if key == "seed" else "must be >= 1")
            blocks[key] = v
    if "description" in raw:
        blocks["description"] = str(raw["description"])
    return ExperimentConfig(kind=kind, **blocks)


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file (``OSError`` on I/O failure)."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return parse_config(raw)


def validate(cfg: ExperimentConfig) -> None:
    kind = cfg.kind
    if kind not in KINDS:
        raise ConfigError("kind", f"unknown kind {kind!r}")

    expected = SCAN_VARIABLE[kind]
    if expected is None:
        if cfg.scan is not None:
            raise ConfigError("scan", f"{kind} takes no scan")
    else:
        if cfg.scan is None:
            raise ConfigError("scan", f"{kind} needs a scan over {expected!r}")
        if cfg.scan.variable != expected:
            raise ConfigError("scan.variable", f"{kind} scans {expected!r}, got {cfg.scan.variable!r}")
        values = np.asarray(cfg.scan.values, dtype=float)
        if values.size == 0:
            raise ConfigError("scan.values", "grid is empty")
        if not np.all(np.isfinite(values)):
            raise ConfigError("scan.values", "grid contains non-finite values")
        if np.any(np.diff(values) <= 0):
            raise ConfigError("scan.values", "grid must be strictly increasing")
        if expected in ("duration", "gap", "T") and values[0] < 0:
            raise ConfigError("scan.values", "times must be >= 0")
        if expected == "temperature" and values[0] <= 0:
            raise ConfigError("scan.values", "temperatures must be positive")
        if expected == "n_pulses":
            if np.any(values != np.round(values)) or np.any(values < 1):
                raise ConfigError("scan.values", "pulse counts must be positive integers")
            if np.any(values % 2 == 0):
                raise ConfigError("scan.values", "pulse counts must be odd")

    if cfg.detection is not None:
        if kind not in DETECTION_KINDS:
            raise ConfigError("detection", f"{kind} does not use a detection model")
        for name in ("p1d", "prd", "pre"):
            v = getattr(cfg.detection, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"detection.{name}", f"must lie in [0, 1], got {v}")
    elif kind == "PiTrain":
        raise ConfigError("detection", "PiTrain needs detection efficiencies")

    d, n, s = cfg.drive, cfg.noise, cfg.sequence
    for name in ("omega_red", "omega_blue", "rydberg_rabi", "ground_rabi", "blockade"):
        if getattr(d, name) < 0:
            raise ConfigError(f"drive.{name}", "must be >= 0")
    if d.model == "four_level":
        if kind != "RabiScan":
            raise ConfigError("drive.model", "the four-level model is only used by RabiScan")
        if d.delta1 == 0:
            raise ConfigError("drive.delta1", "one-photon detuning must be nonzero")
    if kind in ("GrRamsey", "SpinEcho", "T1TwoPi", "ControlFringe") or kind in GATE_KINDS:
        if d.rydberg_rabi <= 0:
            raise ConfigError("drive.rydberg_rabi", f"{kind} needs a nonzero Rydberg drive")
    if kind in ("GroundRamsey", "ControlFringe", "BellSequence") and d.ground_rabi <= 0:
        raise ConfigError("drive.ground_rabi", f"{kind} needs a nonzero ground drive")

    if n.temperature < 0:
        raise ConfigError("noise.temperature", "must be >= 0")
    for name in ("sigma_red", "sigma_blue"):
        if getattr(n, name) < 0:
            raise ConfigError(f"noise.{name}", "must be >= 0")
    if (n.sigma_red > 0 and d.omega_red == 0) or (n.sigma_blue > 0 and d.omega_blue == 0):
        raise ConfigError("noise", "Rabi deviation given for a laser that is off")
    if n.t2_prime is not None and n.t2_prime <= 0:
        raise ConfigError("noise.t2_prime", "must be positive")
    if any(t <= 0 for t in n.t1):
        raise ConfigError("noise.t1", "lifetimes must be positive")
    if n.ground_t2_star is not None and n.ground_t2_star <= 0:
        raise ConfigError("noise.ground_t2_star", "must be positive")

    if kind == "ControlFringe":
        dt = np.asarray(s.dt_values, dtype=float)
        if dt.size < 8:
            raise ConfigError("sequence.dt_values", "need at least 8 wait times for a fringe")
        if np.any(dt < 0) or np.any(np.diff(dt) <= 0):
            raise ConfigError("sequence.dt_values", "must be >= 0 and strictly increasing")
        if d.fringe_frequency == 0:
            raise ConfigError("drive.fringe_frequency", "ControlFringe needs a nonzero fringe frequency")
    if s.ramsey_gaps:
        g = np.asarray(s.ramsey_gaps, dtype=float)
        if g.size < 4 or np.any(g < 0) or np.any(np.diff(g) <= 0):
            raise ConfigError("sequence.ramsey_gaps", "need >= 4 increasing non-negative gaps")
    if s.readout == "contrast" and kind not in ("GroundRamsey", "GrRamsey", "SpinEcho"):
        raise ConfigError("sequence.readout", f"contrast readout is not defined for {kind}")
    if cfg.shots is not None and cfg.shots < 1:
        raise ConfigError("shots", "must be >= 1")


def effective_relative_sigma(cfg: ExperimentConfig) -> float:
    """Relative spread of the ground-Rydberg Rabi frequency implied by the
    ladder-laser deviations (``Omega_0`` is bilinear in both fields)."""
    d, n = cfg.drive, cfg.noise
    terms = []
    if n.sigma_red > 0:
        terms.append(n.sigma_red / d.omega_red)
    if n.sigma_blue > 0:
        terms.append(n.sigma_blue / d.omega_blue)
    return math.sqrt(sum(t * t for t in terms))
