import json
import math

import pytest

from rydcoh.config import ConfigError, load_config, parse_config
from rydcoh.presets import PRESETS, load_preset, preset_dict
from rydcoh.units import UnitError, parse_quantity

TWO_PI = 2 * math.pi


@pytest.mark.parametrize(
    "text, kind, value",
    [
        ("5.2uK", "temperature", 5.2e-6),
        ("29.5us", "time", 29.5e-6),
        ("780nm", "length", 780e-9),
        ("1.443e-25kg", "mass", 1.443e-25),
        ("2pi*1MHz", "frequency", TWO_PI * 1e6),
        ("1MHz", "frequency", TWO_PI * 1e6),
        ("-2pi*5.7GHz", "frequency", -TWO_PI * 5.7e9),
        ("2π×62MHz", "frequency", TWO_PI * 62e6),
        ("6.28e6rad/s", "frequency", 6.28e6),
        ("2pi*1", "frequency", TWO_PI),
        (0.5, "number", 0.5),
        ("7.2ms", "time", 7.2e-3),
    ],
)
def test_unit_grammar(text, kind, value):
    assert parse_quantity(text, kind) == pytest.approx(value, rel=1e-12)


@pytest.mark.parametrize("text, kind", [("5uK", "time"), ("3 parsecs", "length"), ("2pi*5us", "time"), (True, "time")])
def test_unit_errors(text, kind):
    with pytest.raises(UnitError):
        parse_quantity(text, kind)


def _ramsey():
    return {
        "kind": "GrRamsey",
        "drive": {"rydberg_rabi": "2pi*1.188MHz"},
        "noise": {"temperature": "5.2uK", "t1": ["209us", "940us"]},
        "scan": {"variable": "gap", "values": {"start": "0us", "stop": "20us", "num": 5}},
        "seed": 3,
    }


def test_parse_converts_to_si():
    cfg = parse_config(_ramsey())
    assert cfg.noise.temperature == pytest.approx(5.2e-6)
    assert cfg.noise.t1 == pytest.approx((209e-6, 940e-6))
    assert list(cfg.scan_values) == pytest.approx([0, 5e-6, 10e-6, 15e-6, 20e-6])
    assert cfg.drive.rydberg_rabi == pytest.approx(TWO_PI * 1.188e6)


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"bogus": 1}, "bogus"),
        ({"noise": {"temprature": "1uK"}}, "noise.temprature"),
        ({"noise": {"temperature": "-1uK"}}, "noise.temperature"),
        ({"scan": {"variable": "gap", "values": ["2us", "1us"]}}, "scan.values"),
        ({"scan": {"variable": "gap", "values": []}}, "scan.values"),
        ({"scan": {"variable": "duration", "values": ["1us"]}}, "scan.variable"),
        ({"kind": "Nope"}, "kind"),
        ({"detection": {"p1d": 1.5}}, "detection.p1d"),
        ({"shots": 0}, "shots"),
        ({"sequence": {"readout": "sideways"}}, "sequence.readout"),
        ({"drive": {"rydberg_rabi": "5us"}}, "drive.rydberg_rabi"),
    ],
)
def test_invalid_configs_name_the_field(patch, field):
    raw = {**_ramsey(), **patch}
    with pytest.raises(ConfigError) as info:
        parse_config(raw)
    assert info.value.field == field
    assert field in str(info.value)


def test_pi_train_rules():
    raw = preset_dict("fig3b")
    raw["scan"]["values"] = [1, 2, 3]
    with pytest.raises(ConfigError, match="odd"):
        parse_config(raw)
    raw = preset_dict("fig3b")
    del raw["detection"]
    with pytest.raises(ConfigError, match="detection"):
        parse_config(raw)


def test_hash_stable_under_key_order():
    raw = _ramsey()
    shuffled = json.loads(json.dumps(dict(reversed(list(raw.items())))))
    shuffled["noise"] = dict(reversed(list(raw["noise"].items())))
    assert parse_config(raw).config_hash() == parse_config(shuffled).config_hash()
    raw["seed"] = 4
    assert parse_config(raw).config_hash() != parse_config(shuffled).config_hash()


def test_round_trip_through_dict(tmp_path):
    cfg = load_preset("fig5")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    again = load_config(path)
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()


def test_replace_updates_fields():
    cfg = parse_config(_ramsey())
    hot = cfg.replace(noise={"temperature": 20e-6})
    assert hot.noise.temperature == 20e-6
    assert hot.noise.t1 == cfg.noise.t1
    with pytest.raises(ConfigError):
        cfg.replace(noise={"temperature": -1.0})


def test_load_config_errors(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


@pytest.mark.parametrize("name", ["fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "fig5", "fig6", "fig7", "fig8", "bell"])
def test_presets_validate(name):
    assert name in PRESETS
    cfg = load_preset(name)
    assert cfg.kind == PRESETS[name]["kind"]


def test_preset_retarget():
    echo = load_preset("fig4a", "SpinEcho")
    assert echo.kind == "SpinEcho"
    assert echo.noise == load_preset("fig4a").noise
    gate = load_preset("fig6", "CzGate")
    assert gate.scan is None
    with pytest.raises(KeyError):
        preset_dict("fig99")
