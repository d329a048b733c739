"""Level schemes and Hamiltonians for the atom models.

Conventions used throughout: all frequencies are angular (rad/s); a drive
between ``lower`` and ``upper`` with Rabi frequency ``rabi``, phase ``phase``
and detuning ``detuning`` (laser minus atom) contributes

    (rabi/2) (e^{-i phase} |lower><upper| + h.c.) - detuning |upper><upper|

in the rotating frame.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .constants import (
    RB87_GAMMA_P,
    RB87_MASS,
    RB87_RYDBERG_LIFETIME,
    TWO_PI,
    WAVELENGTH_BLUE,
    WAVELENGTH_RED,
    WAVELENGTH_SINGLE_PHOTON,
)
from .engine import CollapseOperator, HamiltonianSegment, LevelBasis


@dataclass(frozen=True)
class AtomPhysicalParams:
    mass: float = RB87_MASS
    wavelength_red: float = WAVELENGTH_RED
    wavelength_blue: float = WAVELENGTH_BLUE
    counter_propagating: bool = True
    gamma_p: float = RB87_GAMMA_P
    rydberg_lifetime: float = RB87_RYDBERG_LIFETIME
    branching_to_dark: float = 0.5
    wavelength_single: float = WAVELENGTH_SINGLE_PHOTON

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if min(self.wavelength_red, self.wavelength_blue, self.wavelength_single) <= 0:
            raise ValueError("wavelengths must be positive")
        if not 0.0 <= self.branching_to_dark <= 1.0:
            raise ValueError("branching_to_dark must lie in [0, 1]")
        if self.gamma_p < 0 or self.rydberg_lifetime <= 0:
            raise ValueError("decay parameters must be positive")

    @property
    def k_eff(self) -> float:
        """Two-photon wave-vector magnitude (rad/m)."""
        kr = TWO_PI / self.wavelength_red
        kb = TWO_PI / self.wavelength_blue
        return abs(kb - kr) if self.counter_propagating else kb + kr

    @property
    def k_single(self) -> float:
        return TWO_PI / self.wavelength_single


@dataclass(frozen=True)
class DriveParams:
    rabi: float
    detuning: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.rabi < 0:
            raise ValueError(f"Rabi frequency must be >= 0, got {self.rabi}")

    def scaled(self, factor: float) -> "DriveParams":
        return DriveParams(self.rabi * factor, self.detuning, self.phase)

    def shifted(self, extra_detuning: float) -> "DriveParams":
        return DriveParams(self.rabi, self.detuning + extra_detuning, self.phase)

    def with_phase(self, phase: float) -> "DriveParams":
        return DriveParams(self.rabi, self.detuning, phase)


@dataclass(frozen=True)
class TwoPhotonReduction:
    effective_rabi: float
    differential_stark_shift: float


def add_drive(h: np.ndarray, lower: int, upper: int, drive: DriveParams) -> np.ndarray:
    """Add one drive term to ``h`` in place and return it."""
    coupling = 0.5 * drive.rabi * np.exp(-1j * drive.phase)
    h[lower, upper] += coupling
    h[upper, lower] += np.conj(coupling)
    h[upper, upper] -= drive.detuning
    return h


TWO_LEVEL = LevelBasis(("g", "e"))


def two_level_hamiltonian(drive: DriveParams) -> np.ndarray:
    return add_drive(np.zeros((2, 2), dtype=complex), 0, 1, drive)


def build_two_level(
    drive: DriveParams,
) -> tuple[LevelBasis, Callable[[float], HamiltonianSegment]]:
    """Resonant or detuned drive on ``{g, e}``.

    Returns the basis and a builder mapping a duration to a segment.
    """
    h = two_level_hamiltonian(drive)
    return TWO_LEVEL, lambda duration: HamiltonianSegment(h, duration)


def generalized_rabi_excitation(rabi: float, detuning: float, t: float) -> float:
    """Analytic excited population of a driven two-level atom from ``|g>``."""
    w = math.hypot(rabi, detuning)
    if w == 0:
        return 0.0
    return (rabi / w) ** 2 * math.sin(0.5 * w * t) ** 2


def reduce_two_photon(red: DriveParams, blue: DriveParams, delta1: float) -> TwoPhotonReduction:
    """Adiabatic elimination of the intermediate level of a ladder."""
    if delta1 == 0:
        raise ValueError("one-photon detuning must be nonzero")
    return TwoPhotonReduction(
        effective_rabi=red.rabi * blue.rabi / (2.0 * abs(delta1)),
        differential_stark_shift=(red.rabi**2 - blue.rabi**2) / (4.0 * delta1),
    )


LADDER_BASIS = LevelBasis(("1", "p", "r", "g'"))


def ladder_hamiltonian(
    red_rabi: float, blue_rabi: float, delta1: float, delta2: float
) -> np.ndarray:
    """Four-level ladder ``|1> -red- |p> -blue- |r>`` plus a dark ``|g'>``.

    ``delta1`` is the red one-photon detuning and ``delta2`` the two-photon
    detuning; both enter as ``-delta`` on the upper level of their leg.
    """
    h = np.zeros((4, 4), dtype=complex)
    h[0, 1] = h[1, 0] = 0.5 * red_rabi
    h[1, 2] = h[2, 1] = 0.5 * blue_rabi
    h[1, 1] = -delta1
    h[2, 2] = -delta2
    return h


def ladder_collapses(params: AtomPhysicalParams) -> list[CollapseOperator]:
    b = LADDER_BASIS
    ops = []
    bright = (1.0 - params.branching_to_dark) * params.gamma_p
    dark = params.branching_to_dark * params.gamma_p
    if bright > 0:
        ops.append(CollapseOperator.decay(b, "1", "p", bright))
    if dark > 0:
        ops.append(CollapseOperator.decay(b, "g'", "p", dark))
    ops.append(CollapseOperator.decay(b, "1", "r", 1.0 / params.rydberg_lifetime))
    return ops


def build_ladder_4level(
    red: DriveParams,
    blue: DriveParams,
    params: AtomPhysicalParams,
    two_photon_detuning: float = 0.0,
    compensate_stark: bool = True,
) -> tuple[LevelBasis, Callable[[float], HamiltonianSegment], list[CollapseOperator]]:
    """Ladder model with intermediate-state scattering into a dark ground level.

    ``red.detuning`` is the one-photon detuning. With ``compensate_stark`` the
    differential light shift of the nominal drives is removed from the
    two-photon detuning so a zero ``two_photon_detuning`` is resonant.
    """
    if params.gamma_p < 0:
        raise ValueError("negative decay rate")
    delta1 = red.detuning
    if abs(delta1) < 10 * params.gamma_p:
        warnings.warn("one-photon detuning is not large compared with the intermediate linewidth")
    delta2 = two_photon_detuning
    if compensate_stark and delta1 != 0:
        delta2 -= reduce_two_photon(red, blue, delta1).differential_stark_shift
    h = ladder_hamiltonian(red.rabi, blue.rabi, delta1, delta2)
    return (
        LADDER_BASIS,
        lambda duration: HamiltonianSegment(h, duration),
        ladder_collapses(params),
    )


def scattering_rate(rabi: float, delta1: float, gamma: float) -> float:
    """Off-resonant photon scattering rate ``rabi^2 gamma / (4 delta1^2)``."""
    return rabi**2 * gamma / (4.0 * delta1**2)


SINGLE_ATOM = LevelBasis(("0", "1", "r"))


def single_atom_hamiltonian(
    ground: DriveParams | None = None, rydberg: DriveParams | None = None
) -> np.ndarray:
    """``{0, 1, r}`` atom: ground drive on 0-1, Rydberg drive on 1-r.

    The ground detuning enters on ``|0>``, the Rydberg detuning on ``|r>``.
    """
    h = np.zeros((3, 3), dtype=complex)
    if ground is not None:
        add_drive(h, 1, 0, ground)
    if rydberg is not None:
        add_drive(h, 1, 2, rydberg)
    return h


TWO_ATOM = SINGLE_ATOM.tensor(SINGLE_ATOM)
COMPUTATIONAL = ("00", "01", "10", "11")
COMPUTATIONAL_INDEX = tuple(TWO_ATOM.index(s) for s in COMPUTATIONAL)


def blockade_projector() -> np.ndarray:
    return TWO_ATOM.projector("rr").real


def two_atom_hamiltonian(
    control: np.ndarray | DriveParams | None,
    target: np.ndarray | DriveParams | None,
    blockade: float,
) -> np.ndarray:
    """``H_c (x) I + I (x) H_t + B |rr><rr|``.

    Each side is either a :class:`DriveParams` on the 1-r transition, a full
    single-atom ``3 x 3`` Hamiltonian, or ``None`` for no drive.
    """
    if blockade < 0:
        raise ValueError("blockade must be >= 0")

    def single(x):
        if x is None:
            return np.zeros((3, 3), dtype=complex)
        if isinstance(x, DriveParams):
            return single_atom_hamiltonian(rydberg=x)
        return np.asarray(x, dtype=complex)

    eye = np.eye(3)
    return np.kron(single(control), eye) + np.kron(eye, single(target)) + blockade * blockade_projector()


def build_two_atom_blockade(
    control_drive: DriveParams | None,
    target_drive: DriveParams | None,
    blockade: float,
) -> tuple[LevelBasis, Callable[[float], HamiltonianSegment]]:
    h = two_atom_hamiltonian(control_drive, target_drive, blockade)
    return TWO_ATOM, lambda duration: HamiltonianSegment(h, duration)


def _check_probability(name: str, value) -> None:
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(~np.isfinite(arr)):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def detection_model(ground_population, p1d: float, prd: float):
    """Observed survival probability given the true ground population.

    Ground atoms are recaptured with probability ``p1d``; Rydberg atoms are
    removed with efficiency ``prd``, so survival is
    ``p1d - prd * (1 - ground_population)``. Results below zero (only
    possible for unphysical parameter pairs with ``prd > p1d``) are clipped
    to zero.
    """
    for name, v in (("ground_population", ground_population), ("p1d", p1d), ("prd", prd)):
        _check_probability(name, v)
    observed = p1d - prd * (1.0 - np.asarray(ground_population, dtype=float))
    observed = np.clip(observed, 0.0, 1.0)
    return float(observed) if observed.ndim == 0 else observed


def pi_train_survival(n, p1d: float, prd: float, pre: float):
    """Survival after ``n`` (odd) Rydberg pi pulses, ``p1d - prd * pre**n``."""
    _check_probability("pre", pre)
    rydberg = np.power(pre, np.asarray(n, dtype=float))
    return detection_model(1.0 - rydberg, p1d, prd)
