"""Two-atom blockade gate: pi(control) - 2pi(target) - pi(control).

The 9-level product space ``{0,1,r} (x) {0,1,r}`` is ordered
``3 * control + target``; the computational block is
``|00>, |01>, |10>, |11>`` with the control written first. With resonant
square pulses and a large blockade the sequence maps the block to
``diag(1, -1, -1, -1)``, which is C_Z up to single-qubit Z rotations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..atoms import COMPUTATIONAL_INDEX, DriveParams, single_atom_hamiltonian, two_atom_hamiltonian
from ..engine import unitary
from ..noise import NOISELESS, NoiseSpec, ShotSample
from .common import RYDBERG_DRIVE, Propagation, apply, atom_detunings, decay_operators

CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
_DIM = 4


@dataclass(frozen=True)
class GateOutcome:
    final_map: np.ndarray
    leakage: np.ndarray
    fidelity: float
    error: float
    local_phases: tuple[float, float]
    kind: str = "average"

    def __post_init__(self):
        if np.any(self.leakage < -1e-12):
            raise ValueError("negative leakage")
        if not -1e-12 <= self.fidelity <= 1.0 + 1e-12:
            raise ValueError(f"fidelity {self.fidelity} outside [0, 1]")


def cz_unitary(
    rabi: float,
    blockade: float,
    control_detuning: float = 0.0,
    target_detuning: float = 0.0,
    control_scale: float = 1.0,
    target_scale: float = 1.0,
) -> np.ndarray:
    """Full 9x9 propagator of the contiguous pi-2pi-pi sequence.

    Pulse lengths come from the nominal ``rabi``; ``*_scale`` multiply the
    actual Rabi frequencies and ``*_detuning`` act on each atom's ``|r>``
    throughout, including while the other atom is driven.
    """
    free_c = single_atom_hamiltonian(rydberg=DriveParams(0.0, control_detuning))
    free_t = single_atom_hamiltonian(rydberg=DriveParams(0.0, target_detuning))
    drive_c = single_atom_hamiltonian(rydberg=DriveParams(rabi * control_scale, control_detuning))
    drive_t = single_atom_hamiltonian(rydberg=DriveParams(rabi * target_scale, target_detuning))
    t_pi = np.pi / rabi
    u_c = unitary(two_atom_hamiltonian(drive_c, free_t, blockade), t_pi)
    u_t = unitary(two_atom_hamiltonian(free_c, drive_t, blockade), 2.0 * t_pi)
    return u_c @ u_t @ u_c


def computational_map(u: np.ndarray) -> np.ndarray:
    idx = list(COMPUTATIONAL_INDEX)
    return u[np.ix_(idx, idx)]


def _phase_overlap(m: np.ndarray, theta_c: float, theta_t: float) -> complex:
    # Tr(CZ^dag D M) with D = diag(1, e^{i t}, e^{i c}, e^{i (c + t)})
    d = np.array([1.0, np.exp(1j * theta_t), np.exp(1j * theta_c), np.exp(1j * (theta_c + theta_t))])
    return complex(np.sum(np.diag(CZ).conj() * d * np.diag(m)))


def optimal_local_phases(m: np.ndarray) -> tuple[float, float]:
    """Z phases ``(theta_c, theta_t)`` maximising ``|Tr(CZ^dag D M)|``.

    The overlap is ``a + b e^{i theta}`` in either phase with the other
    fixed, whose maximum modulus is closed form; alternate the two updates
    from several starts.
    """
    diag = np.diag(m)
    best, best_val = (0.0, 0.0), -1.0
    for start in np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False):
        tc, tt = 0.0, float(start)
        prev = -1.0
        for _ in range(200):
            et = np.exp(1j * tt)
            a, b = diag[0] + et * diag[1], diag[2] - et * diag[3]
            if abs(b) > 0:
                tc = float(np.angle(a) - np.angle(b))
            ec = np.exp(1j * tc)
            a, b = diag[0] + ec * diag[2], diag[1] - ec * diag[3]
            if abs(b) > 0:
                tt = float(np.angle(a) - np.angle(b))
            val = abs(_phase_overlap(m, tc, tt))
            if val - prev < 1e-15:
                break
            prev = val
        if val > best_val:
            best, best_val = (tc % (2 * np.pi), tt % (2 * np.pi)), val
    return best


def gate_fidelity(m: np.ndarray, phases: tuple[float, float], kind: str = "average") -> float:
    """Fidelity of the (possibly leaky) block ``m`` to C_Z after local Z
    corrections. ``process``: ``|Tr(CZ^dag D M)/4|^2``. ``average``: the
    average gate fidelity ``(Tr(M M^dag) + |Tr(CZ^dag D M)|^2) / 20``."""
    overlap = abs(_phase_overlap(m, *phases)) ** 2
    if kind == "process":
        f = overlap / _DIM**2
    elif kind == "average":
        f = (np.trace(m @ m.conj().T).real + overlap) / (_DIM * (_DIM + 1))
    else:
        raise ValueError(f"unknown fidelity kind {kind!r}")
    return float(min(max(f, 0.0), 1.0))


def evaluate_gate(
    u: np.ndarray, kind: str = "average", phases: tuple[float, float] | None = None
) -> GateOutcome:
    """Score a 9x9 propagator; ``phases=None`` optimises the local Z phases."""
    m = computational_map(u)
    leakage = np.clip(1.0 - np.sum(np.abs(m) ** 2, axis=0), 0.0, None)
    if phases is None:
        phases = optimal_local_phases(m)
    f = gate_fidelity(m, phases, kind)
    return GateOutcome(m, leakage, f, 1.0 - f, (float(phases[0]), float(phases[1])), kind)


def calibrate_phases(rabi: float, blockade: float) -> tuple[float, float]:
    """Local Z corrections of the noiseless, resonant gate."""
    return optimal_local_phases(computational_map(cz_unitary(rabi, blockade)))


@dataclass(frozen=True)
class CzErrorShot:
    """Monte-Carlo C_Z error: one observable, the gate error of this shot's
    Doppler detunings and Rabi deviation, scored with fixed ``phases``
    (``None`` re-optimises them per shot)."""

    rabi: float
    blockade: float
    phases: tuple[float, float] | None
    fidelity_kind: str = "average"
    doppler_atoms: str = "control"
    control_detuning: float = 0.0
    target_detuning: float = 0.0
    noise: NoiseSpec = NOISELESS

    @property
    def scan_values(self) -> np.ndarray:
        return np.zeros(1)

    def observe(self, shot: ShotSample) -> np.ndarray:
        dc, dt = atom_detunings(shot, self.doppler_atoms)
        s = shot.scale(RYDBERG_DRIVE)
        u = cz_unitary(
            self.rabi,
            self.blockade,
            self.control_detuning + dc,
            self.target_detuning + dt,
            s,
            s,
        )
        return np.array([evaluate_gate(u, self.fidelity_kind, self.phases).error])


@dataclass(frozen=True)
class CzDetuningError:
    """Noiseless gate error versus a static control-atom detuning."""

    detunings: np.ndarray
    rabi: float
    blockade: float
    phases: tuple[float, float] | None
    fidelity_kind: str = "average"
    target_detuning: float = 0.0
    noise: NoiseSpec = NOISELESS

    @property
    def scan_values(self) -> np.ndarray:
        return np.asarray(self.detunings, dtype=float)

    def observe(self, shot: ShotSample) -> np.ndarray:
        return np.array(
            [
                evaluate_gate(
                    cz_unitary(self.rabi, self.blockade, d, self.target_detuning), self.fidelity_kind, self.phases
                ).error
                for d in self.scan_values
            ]
        )


# Bell preparation: start |11>, control GND pi/2 (phase 0), target GND pi/2
# (phase 0), gate, target GND pi/2 (phase pi) -> (|00> + |11>)/sqrt(2) up
# to a global phase; then GND pi/2 on both atoms at analysis phase phi.
BELL_TARGET_PHASES = (0.0, np.pi)


@dataclass(frozen=True)
class BellSequence:
    """H-C_Z-H Bell-state preparation followed by a parity analysis.

    The observable has ``len(phases) + 2`` entries: the parity
    ``P00 + P11 - P01 - P10`` after the analysis pulses at each phase, then
    ``P00`` and ``P11`` of the prepared state.
    """

    phases: np.ndarray
    rabi: float
    ground_rabi: float
    blockade: float
    doppler_atoms: str = "both"
    rydberg_detuning: float = 0.0
    t1: tuple = ()
    t2_prime: float | None = None
    noise: NoiseSpec = NOISELESS

    @property
    def scan_values(self) -> np.ndarray:
        return np.asarray(self.phases, dtype=float)

    def _two_atom(self, single_c: np.ndarray, single_t: np.ndarray) -> np.ndarray:
        return two_atom_hamiltonian(single_c, single_t, self.blockade)

    def observe(self, shot: ShotSample) -> np.ndarray:
        dc, dt = atom_detunings(shot, self.doppler_atoms)
        dc += self.rydberg_detuning
        dt += self.rydberg_detuning
        s = shot.scale(RYDBERG_DRIVE)
        single = decay_operators(3, 1, 2, self.t1, self.t2_prime)
        eye = np.eye(3)
        collapse = tuple(np.kron(c, eye) for c in single) + tuple(np.kron(eye, c) for c in single)
        prop = Propagation(9, collapse)

        def atom(rabi_r=0.0, det=0.0, ground=0.0, phase=0.0):
            return single_atom_hamiltonian(
                ground=DriveParams(ground, 0.0, phase), rydberg=DriveParams(rabi_r, det)
            )

        t_gnd = 0.5 * np.pi / self.ground_rabi
        t_pi = np.pi / self.rabi
        idle_c, idle_t = atom(det=dc), atom(det=dt)
        steps = [
            (self._two_atom(atom(det=dc, ground=self.ground_rabi), idle_t), t_gnd),
            (self._two_atom(idle_c, atom(det=dt, ground=self.ground_rabi, phase=BELL_TARGET_PHASES[0])), t_gnd),
            (self._two_atom(atom(self.rabi * s, dc), idle_t), t_pi),
            (self._two_atom(idle_c, atom(self.rabi * s, dt)), 2.0 * t_pi),
            (self._two_atom(atom(self.rabi * s, dc), idle_t), t_pi),
            (self._two_atom(idle_c, atom(det=dt, ground=self.ground_rabi, phase=BELL_TARGET_PHASES[1])), t_gnd),
        ]
        x = prop.ket(3 * 1 + 1)
        for h, t in steps:
            x = apply(prop.step(h, t), x)
        pops = prop.populations(x)
        p00, p11 = pops[0], pops[4]

        h_analysis = np.stack(
            [
                self._two_atom(atom(det=dc, ground=self.ground_rabi, phase=p), atom(det=dt, ground=self.ground_rabi, phase=p))
                for p in self.scan_values
            ]
        )
        y = apply(prop.step(h_analysis, t_gnd), x)
        q = prop.populations(y)
        parity = q[:, 0] + q[:, 4] - q[:, 1] - q[:, 3]
        return np.concatenate([parity, [p00, p11]])
