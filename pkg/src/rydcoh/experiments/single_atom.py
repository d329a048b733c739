"""Single-atom pulse-sequence experiments.

Each experiment is an immutable object exposing ``scan_values``, ``noise``
and ``observe(shot)``; :func:`rydcoh.noise.run_ensemble` averages it over
shots. Pulse durations are fixed from the nominal Rabi frequency, so a
per-shot Rabi deviation shows up as a pulse-area error, as in the lab.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..atoms import (
    AtomPhysicalParams,
    DriveParams,
    detection_model,
    ladder_collapses,
    ladder_hamiltonian,
    reduce_two_photon,
    single_atom_hamiltonian,
    two_level_hamiltonian,
)
from ..config import DetectionConfig
from ..noise import NOISELESS, NoiseSpec, ShotSample
from .common import RYDBERG_DRIVE, Propagation, apply, decay_operators

# two-level index convention: 0 = lower (|1> for Rydberg, |1> for ground
# qubit), 1 = upper (|r> or |0>)
_G, _E = 0, 1


def _observe_ground(p_ground: np.ndarray, detection: DetectionConfig | None) -> np.ndarray:
    p = np.clip(p_ground, 0.0, 1.0)
    if detection is None:
        return p
    return np.asarray(detection_model(p, detection.p1d, detection.prd), dtype=float)


@dataclass(frozen=True)
class RabiScan:
    """Ground-Rydberg Rabi oscillation; observable is the (detected)
    ground-state probability versus pulse duration.

    ``model="four_level"`` integrates the full ladder ``{1, p, r, g'}``
    with intermediate-state scattering; the light shift of the nominal
    lasers is compensated once, so per-shot intensity noise also produces
    a fluctuating light shift. ``model="effective"`` drives ``{1, r}``
    directly at ``rabi``.
    """

    durations: np.ndarray
    model: str = "effective"
    rabi: float = 0.0
    omega_red: float = 0.0
    omega_blue: float = 0.0
    delta1: float = 0.0
    detuning: float = 0.0
    compensate_stark: bool = True
    atom: AtomPhysicalParams = field(default_factory=AtomPhysicalParams)
    spontaneous_decay: bool = True
    t1: tuple = ()
    t2_prime: float | None = None
    detection: DetectionConfig | None = None
    noise: NoiseSpec = NOISELESS

    @property
    def scan_values(self) -> np.ndarray:
        return np.asarray(self.durations, dtype=float)

    def _four_level(self, shot: ShotSample):
        red = self.omega_red * shot.scale("red")
        blue = self.omega_blue * shot.scale("blue")
        delta2 = self.detuning + shot.doppler_detuning
        if self.compensate_stark:
            nominal = reduce_two_photon(DriveParams(self.omega_red), DriveParams(self.omega_blue), self.delta1)
            delta2 -= nominal.differential_stark_shift
        h = ladder_hamiltonian(red, blue, self.delta1, delta2)
        collapse = []
        if self.spontaneous_decay:
            collapse = [c.matrix for c in ladder_collapses(self.atom)]
        collapse += list(decay_operators(4, 0, 2, self.t1, self.t2_prime))
        return h, collapse, (0, 3)

    def _effective(self, shot: ShotSample):
        drive = DriveParams(self.rabi * shot.scale(RYDBERG_DRIVE), self.detuning + shot.doppler_detuning)
        h = two_level_hamiltonian(drive)
        return h, list(decay_operators(2, _G, _E, self.t1, self.t2_prime)), (_G,)

    def observe(self, shot: ShotSample) -> np.ndarray:
        if self.model == "four_level":
            h, collapse, ground = self._four_level(shot)
        else:
            h, collapse, ground = self._effective(shot)
        t = self.scan_values
        prop = Propagation(h.shape[0], tuple(collapse))
        if prop.open:
            # one Liouvillian eigendecomposition serves every duration
            gen = prop.generator(h)
            w, v = np.linalg.eig(gen)
            coeff = np.linalg.solve(v, prop.ket(0))
            states = (v[None] * (coeff * np.exp(np.outer(t, w)))[:, None, :]).sum(axis=-1)
        else:
            states = apply(prop.step(h, t), prop.ket(0))
        pops = prop.populations(states)
        return _observe_ground(pops[:, list(ground)].sum(axis=1), self.detection)


@dataclass(frozen=True)
class _RamseyBase:
    """Shared machinery of the pi/2 - free - pi/2 family on a two-level
    system. The analysis pulse gets the phase ``fringe * gap + offset``."""

    gaps: np.ndarray
    rabi: float
    detuning: float = 0.0
    fringe_frequency: float = 0.0
    phase_offset: float = 0.0
    t1: tuple = ()
    t2_prime: float | None = None
    detection: DetectionConfig | None = None
    noise: NoiseSpec = NOISELESS

    @property
    def scan_values(self) -> np.ndarray:
        return np.asarray(self.gaps, dtype=float)

    def with_offset(self, offset: float):
        return replace(self, phase_offset=offset)

    def _shot_drive(self, shot: ShotSample) -> tuple[float, float]:
        return self.rabi * shot.scale(RYDBERG_DRIVE), self.detuning + shot.doppler_detuning

    def _parts(self, shot: ShotSample):
        rabi, det = self._shot_drive(shot)
        prop = Propagation(2, decay_operators(2, _G, _E, self.t1, self.t2_prime))
        t_half = 0.5 * np.pi / self.rabi
        half = prop.step(two_level_hamiltonian(DriveParams(rabi, det)), t_half)
        free = two_level_hamiltonian(DriveParams(0.0, det))
        phases = self.fringe_frequency * self.scan_values + self.phase_offset
        h_last = np.stack([two_level_hamiltonian(DriveParams(rabi, det, p)) for p in phases])
        last = prop.step(h_last, t_half)
        return prop, rabi, det, half, free, last


@dataclass(frozen=True)
class GrRamsey(_RamseyBase):
    """Ground-Rydberg Ramsey: ``pi/2 - gap - pi/2``; observable is the
    (detected) ground probability."""

    def observe(self, shot: ShotSample) -> np.ndarray:
        prop, _, _, half, free, last = self._parts(shot)
        x = apply(half, prop.ket(_G))
        x = apply(prop.step(free, self.scan_values), x)
        x = apply(last, x)
        return _observe_ground(prop.populations(x)[:, _G], self.detection)


@dataclass(frozen=True)
class SpinEcho(_RamseyBase):
    """``pi/2 - gap/2 - pi - gap/2 - pi/2``; ``gap`` is the total free time."""

    def observe(self, shot: ShotSample) -> np.ndarray:
        prop, rabi, det, half, free, last = self._parts(shot)
        pi = prop.step(two_level_hamiltonian(DriveParams(rabi, det)), np.pi / self.rabi)
        wait = prop.step(free, 0.5 * self.scan_values)
        x = apply(half, prop.ket(_G))
        x = apply(wait, x)
        x = apply(pi, x)
        x = apply(wait, x)
        x = apply(last, x)
        return _observe_ground(prop.populations(x)[:, _G], self.detection)


@dataclass(frozen=True)
class GroundRamsey(_RamseyBase):
    """Microwave Ramsey between the qubit levels: start in ``|1>``, two
    pi/2 pulses, observable ``P(|0>)``. Thermal light-shift noise enters
    through ``shot.ground_detuning``; ``detuning`` is the fringe offset
    ``delta'``."""

    def _shot_drive(self, shot: ShotSample) -> tuple[float, float]:
        return self.rabi, self.detuning + shot.ground_detuning

    def observe(self, shot: ShotSample) -> np.ndarray:
        prop, _, _, half, free, last = self._parts(shot)
        x = apply(half, prop.ket(_G))
        x = apply(prop.step(free, self.scan_values), x)
        x = apply(last, x)
        return prop.populations(x)[:, _E]


@dataclass(frozen=True)
class T1TwoPi:
    """``pi - gap - pi``: Rydberg population decays back to ground during
    the gap, observable is the (detected) ground probability."""

    gaps: np.ndarray
    rabi: float
    detuning: float = 0.0
    t1: tuple = ()
    t2_prime: float | None = None
    detection: DetectionConfig | None = None
    noise: NoiseSpec = NOISELESS

    @property
    def scan_values(self) -> np.ndarray:
        return np.asarray(self.gaps, dtype=float)

    def observe(self, shot: ShotSample) -> np.ndarray:
        rabi = self.rabi * shot.scale(RYDBERG_DRIVE)
        det = self.detuning + shot.doppler_detuning
        prop = Propagation(2, decay_operators(2, _G, _E, self.t1, self.t2_prime))
        pi = prop.step(two_level_hamiltonian(DriveParams(rabi, det)), np.pi / self.rabi)
        free = prop.step(two_level_hamiltonian(DriveParams(0.0, det)), self.scan_values)
        x = apply(pi, prop.ket(_G))
        x = apply(free, x)
        x = apply(pi, x)
        return _observe_ground(prop.populations(x)[:, _G], self.detection)


@dataclass(frozen=True)
class PiTrain:
    """Shot-level simulation of the pi-pulse-train calibration.

    Each shot is one atom: after ``n`` pulses it is in ``|r>`` with
    probability ``pre**n`` (excitation errors compound), a Rydberg atom is
    removed with probability ``prd`` and any atom is recaptured with
    probability ``p1d``. The observable is 0/1 survival, so the ensemble
    mean follows ``p1d - prd * pre**n`` with binomial scatter.
    """

    n_pulses: np.ndarray
    p1d: float
    prd: float
    pre: float
    noise: NoiseSpec = NOISELESS

    @property
    def scan_values(self) -> np.ndarray:
        return np.asarray(self.n_pulses, dtype=float)

    def observe(self, shot: ShotSample) -> np.ndarray:
        u = shot.rng().random((len(self.scan_values), 2))
        rydberg = u[:, 0] < self.pre**self.scan_values
        keep = np.where(rydberg, max(self.p1d - self.prd, 0.0), self.p1d)
        return (u[:, 1] < keep).astype(float)


@dataclass(frozen=True)
class ControlFringe:
    """Control-atom sequence of the pi-gap-pi gate, read out as a fringe.

    ``GND pi/2 - dt - Ryd pi - T - Ryd pi (phase pi) - dt - GND pi/2`` on
    ``{0, 1, r}``, starting in ``|1>``; the final ground pulse carries the
    analysis phase ``fringe * 2 dt + offset``. The observable is
    ``P(|0>)`` for every ``(T, dt)`` pair, flattened T-major.
    """

    t_values: np.ndarray
    dt_values: np.ndarray
    rydberg_rabi: float
    ground_rabi: float
    fringe_frequency: float
    rydberg_detuning: float = 0.0
    ground_detuning: float = 0.0
    phase_offset: float = 0.0
    t1: tuple = ()
    t2_prime: float | None = None
    noise: NoiseSpec = NOISELESS

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.t_values), len(self.dt_values)

    @property
    def scan_values(self) -> np.ndarray:
        return np.repeat(np.asarray(self.t_values, dtype=float), len(self.dt_values))

    def with_offset(self, offset: float):
        return replace(self, phase_offset=offset)

    def observe(self, shot: ShotSample) -> np.ndarray:
        rabi = self.rydberg_rabi * shot.scale(RYDBERG_DRIVE)
        det_r = self.rydberg_detuning + shot.doppler_detuning
        det_g = self.ground_detuning + shot.ground_detuning
        prop = Propagation(3, decay_operators(3, 1, 2, self.t1, self.t2_prime))

        def h(ground_rabi=0.0, ground_phase=0.0, ryd_rabi=0.0, ryd_phase=0.0):
            return single_atom_hamiltonian(
                ground=DriveParams(ground_rabi, det_g, ground_phase),
                rydberg=DriveParams(ryd_rabi, det_r, ryd_phase),
            )

        t_gnd = 0.5 * np.pi / self.ground_rabi
        t_pi = np.pi / self.rydberg_rabi
        dt = np.asarray(self.dt_values, dtype=float)
        first = prop.step(h(self.ground_rabi), t_gnd)
        pi_up = prop.step(h(ryd_rabi=rabi), t_pi)
        pi_down = prop.step(h(ryd_rabi=rabi, ryd_phase=np.pi), t_pi)
        wait_dt = prop.step(h(), dt)
        wait_t = prop.step(h(), np.asarray(self.t_values, dtype=float))
        phases = self.fringe_frequency * 2.0 * dt + self.phase_offset
        last = prop.step(np.stack([h(self.ground_rabi, p) for p in phases]), t_gnd)

        x = apply(first, prop.ket(1))
        x = apply(wait_dt, x)
        x = apply(pi_up, x)
        x = apply(wait_t[:, None], x[None])
        x = apply(pi_down, x)
        x = apply(wait_dt[None], x)
        x = apply(last[None], x)
        return prop.populations(x)[..., 0].reshape(-1)
