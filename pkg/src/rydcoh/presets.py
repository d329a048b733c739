"""Figure-reproduction presets.

Each preset is a JSON-style dict (unit strings included) that goes through
the same parser as a user config, so presets double as config examples.
"""

from __future__ import annotations

import copy

from .config import DETECTION_KINDS, SCAN_VARIABLE, ExperimentConfig, parse_config

# laboratory noise budget of the ground-Rydberg transition
_LAB_NOISE = {
    "temperature": "5.2uK",
    "sigma_red": "2pi*2.1MHz",
    "sigma_blue": "2pi*1MHz",
    "t1": ["209us", "940us"],
    "t2_prime": "74us",
}
_DETECTION = {"p1d": 0.972, "prd": 0.887, "pre": 0.984}
_GATE_DRIVE = {
    "rydberg_rabi": "2pi*1MHz",
    "blockade": "2pi*1000MHz",
    "transition": "single_photon",
}

PRESETS: dict[str, dict] = {
    "fig2b": {
        "kind": "GroundRamsey",
        "description": "microwave Ramsey with thermal light-shift dephasing",
        "drive": {"ground_rabi": "2pi*33.9kHz", "ground_detuning": "2pi*300Hz"},
        "noise": {"ground_t2_star": "7.2ms"},
        "scan": {"variable": "gap", "values": {"start": "0ms", "stop": "20ms", "num": 81}},
        "shots": 400,
    },
    "fig3a": {
        "kind": "RabiScan",
        "description": "four-level ground-Rydberg Rabi oscillation with lab noise",
        "drive": {"model": "four_level"},
        "noise": {"temperature": "5.2uK", "sigma_red": "2pi*2.1MHz", "sigma_blue": "2pi*1MHz"},
        "detection": {"p1d": 0.972, "prd": 0.887},
        "scan": {"variable": "duration", "values": {"start": "0us", "stop": "6us", "num": 121}},
        "shots": 500,
    },
    "fig3b": {
        "kind": "PiTrain",
        "description": "odd pi-pulse trains for detection calibration",
        "detection": _DETECTION,
        "scan": {"variable": "n_pulses", "values": list(range(1, 62, 4))},
        "shots": 2000,
    },
    "fig4a": {
        "kind": "GrRamsey",
        "description": "ground-Rydberg Ramsey with the full noise budget",
        "drive": {"fringe_frequency": "2pi*300kHz"},
        "noise": _LAB_NOISE,
        "detection": {"p1d": 0.972, "prd": 0.887},
        "scan": {"variable": "gap", "values": {"start": "0us", "stop": "20us", "num": 81}},
        "shots": 500,
    },
    "fig4b": {
        "kind": "T1TwoPi",
        "description": "Rydberg lifetime from pi-gap-pi",
        "noise": {"t1": ["209us", "940us"]},
        "scan": {"variable": "gap", "values": {"start": "0us", "stop": "300us", "num": 31}},
        "shots": 1,
    },
    "fig5": {
        "kind": "ControlFringe",
        "description": "control-atom fringe contrast versus Rydberg gap",
        "drive": {"fringe_frequency": "2pi*500kHz"},
        "noise": _LAB_NOISE,
        "scan": {"variable": "T", "values": ["0us", "4us", "8us", "12us", "16us", "20us"]},
        "sequence": {"dt_values": {"start": "0us", "stop": "2us", "num": 16}},
        "shots": 300,
    },
    "fig6": {
        "kind": "CzDetuningScan",
        "description": "gate error versus static control detuning",
        "drive": _GATE_DRIVE,
        "scan": {
            "variable": "control_detuning",
            "values": {"start": "-2pi*100kHz", "stop": "2pi*100kHz", "num": 21},
        },
        "shots": 1,
    },
    "fig7": {
        "kind": "TemperatureSweep",
        "description": "Doppler dephasing time and gate error versus temperature, single-photon drive",
        "drive": _GATE_DRIVE,
        "noise": {"doppler_atoms": "both"},
        "scan": {"variable": "temperature", "values": ["1uK", "2uK", "3uK", "4uK", "5uK"]},
        "shots": 1000,
    },
    "fig8": {
        "kind": "TemperatureSweep",
        "description": "same sweep for the two-photon ladder, effective Rabi frequency from adiabatic elimination",
        "drive": {
            "rydberg_rabi": "2pi*1.1693MHz",
            "blockade": "2pi*1000MHz",
            "transition": "two_photon",
        },
        "noise": {"doppler_atoms": "both"},
        "scan": {"variable": "temperature", "values": ["5uK", "10uK", "15uK", "20uK", "25uK"]},
        "shots": 1000,
    },
    "bell": {
        "kind": "BellSequence",
        "description": "Bell-state preparation and parity fringe with the two-photon drive",
        "drive": {
            "rydberg_rabi": "2pi*1.1693MHz",
            "ground_rabi": "2pi*33.9kHz",
            "blockade": "2pi*1000MHz",
            "transition": "two_photon",
        },
        "noise": {"temperature": "5.2uK", "doppler_atoms": "both"},
        "scan": {"variable": "phase", "values": {"start": 0.0, "stop": 3.141592653589793, "num": 13}},
        "shots": 200,
    },
}


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    return copy.deepcopy(PRESETS[name])


def load_preset(name: str, kind: str | None = None) -> ExperimentConfig:
    """Validated preset config; ``kind`` re-targets the preset's parameters
    at another experiment (e.g. the Ramsey preset as a spin echo)."""
    raw = preset_dict(name)
    if kind is not None:
        raw["kind"] = kind
        if SCAN_VARIABLE.get(kind, "") is None:
            raw.pop("scan", None)
        if kind not in DETECTION_KINDS:
            raw.pop("detection", None)
    return parse_config(raw)
