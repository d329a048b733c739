"""Tiny unit grammar for config values.

Accepted forms::

    5.2uK   29.5us   780nm   1.443e-25kg   0.5
    2pi*1MHz   -2pi*5.7GHz   2π×62MHz   6.28e6rad/s

Frequencies are stored as angular frequencies (rad/s). A bare cycles/s
value such as ``"1MHz"`` in a frequency field has the factor 2π applied
on ingest, so ``"1MHz"`` and ``"2pi*1MHz"`` are the same quantity. Plain
numbers are taken as SI (rad/s for frequencies).
"""

from __future__ import annotations

import math
import re

_PREFIX = {"": 1.0, "G": 1e9, "M": 1e6, "k": 1e3, "m": 1e-3, "u": 1e-6, "µ": 1e-6, "n": 1e-9}

_UNITS = {
    "s": "time",
    "Hz": "frequency",
    "K": "temperature",
    "m": "length",
    "kg": "mass",
    "rad/s": "frequency",
}

_PATTERN = re.compile(
    r"""^\s*(?P<sign>[-+]?)\s*
        (?:(?P<twopi>2\s*(?:pi|π))\s*[*×x]\s*)?
        (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*
        (?P<unit>[A-Za-zµ/]*)\s*$""",
    re.VERBOSE,
)


class UnitError(ValueError):
    pass


def _split_unit(unit: str) -> tuple[float, str]:
    if unit in ("kg", "rad/s"):
        return 1.0, unit
    for base in ("Hz", "s", "K", "m"):
        if unit.endswith(base):
            prefix = unit[: -len(base)]
            if prefix in _PREFIX:
                return _PREFIX[prefix], base
    raise UnitError(f"unknown unit {unit!r}")


def parse_quantity(value, kind: str) -> float:
    """Parse ``value`` as a quantity of ``kind`` and return SI float.

    ``kind`` is one of ``time, frequency, temperature, length, mass,
    number``.
    """
    if isinstance(value, bool):
        raise UnitError(f"expected a {kind}, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise UnitError(f"expected a {kind}, got {type(value).__name__}")
    m = _PATTERN.match(value)
    if m is None:
        raise UnitError(f"cannot parse {value!r}")
    number = float(m.group("num"))
    if m.group("sign") == "-":
        number = -number
    unit = m.group("unit")
    twopi = m.group("twopi") is not None
    if not unit:
        if twopi and kind != "frequency":
            raise UnitError(f"2pi factor only valid for frequencies: {value!r}")
        return number * (2.0 * math.pi if twopi else 1.0)
    scale, base = _split_unit(unit)
    found = _UNITS[base]
    if found != kind:
        raise UnitError(f"{value!r} is a {found}, expected a {kind}")
    if base == "Hz":
        # cycles/s in; the 2pi is applied whether or not it was written
        return number * scale * 2.0 * math.pi
    if twopi:
        raise UnitError(f"2pi factor only valid with Hz: {value!r}")
    return number * scale
