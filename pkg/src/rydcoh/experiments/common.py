"""Pieces shared by the canned experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..config import ExperimentConfig, effective_relative_sigma
from ..engine import liouvillian, superoperator, unitary
from ..noise import NoiseSpec, ShotSample

RYDBERG_DRIVE = "rydberg"
QUADRATURE_OFFSETS = (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)


@dataclass(frozen=True)
class Propagation:
    """Pure-state or Liouville-space propagation on a ``dim``-level system.

    Without collapse operators states are kets and propagators unitaries;
    otherwise states are row-major ``vec(rho)`` and propagators
    superoperators. Both accept batched Hamiltonians or duration arrays.
    """

    dim: int
    collapse: tuple = ()

    @property
    def open(self) -> bool:
        return len(self.collapse) > 0

    def step(self, h, duration):
        if self.open:
            return superoperator(h, self.collapse, duration)
        return unitary(h, duration)

    def ket(self, index: int) -> np.ndarray:
        if self.open:
            v = np.zeros(self.dim * self.dim, dtype=complex)
            v[index * (self.dim + 1)] = 1.0
        else:
            v = np.zeros(self.dim, dtype=complex)
            v[index] = 1.0
        return v

    def from_ket(self, psi: np.ndarray) -> np.ndarray:
        psi = np.asarray(psi, dtype=complex)
        if self.open:
            return np.outer(psi, psi.conj()).reshape(-1)
        return psi

    def populations(self, x: np.ndarray) -> np.ndarray:
        if self.open:
            return x[..., :: self.dim + 1].real.copy()
        return np.abs(x) ** 2

    def generator(self, h):
        return liouvillian(h, self.collapse)


def apply(p: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Broadcast ``p @ x`` over leading axes."""
    return (p @ x[..., None])[..., 0]


def decay_operators(dim: int, ground: int, rydberg: int, lifetimes: Sequence[float], t2_prime):
    """Rydberg decay channels ``r -> ground`` and pure dephasing of ``r``.

    Dephasing ``sqrt(2/T2') |r><r|`` damps the ground-Rydberg coherence at
    rate ``1/T2'``.
    """
    ops = []
    for t1 in lifetimes:
        c = np.zeros((dim, dim), dtype=complex)
        c[ground, rydberg] = np.sqrt(1.0 / t1)
        ops.append(c)
    if t2_prime is not None:
        c = np.zeros((dim, dim), dtype=complex)
        c[rydberg, rydberg] = np.sqrt(2.0 / t2_prime)
        ops.append(c)
    return tuple(ops)


def rydberg_noise(cfg: ExperimentConfig, n_atoms: int = 1, temperature: float | None = None) -> NoiseSpec:
    """Noise spec for effective ground-Rydberg models: Doppler along the
    excitation wave vector and one relative Rabi deviation."""
    n = cfg.noise
    rel = effective_relative_sigma(cfg)
    sigmas, nominal = {}, {}
    if rel > 0:
        sigmas[RYDBERG_DRIVE] = rel * cfg.drive.rydberg_rabi
        nominal[RYDBERG_DRIVE] = cfg.drive.rydberg_rabi
    return NoiseSpec(
        temperature=n.temperature if temperature is None else temperature,
        k_eff=cfg.k_drive,
        mass=cfg.atom.mass,
        rabi_sigmas=sigmas,
        rabi_nominal=nominal,
        doppler=n.doppler,
        rabi=n.rabi,
        n_atoms=n_atoms,
        ground_t2_star=n.ground_t2_star,
    )


def atom_detunings(shot: ShotSample, doppler_atoms: str) -> tuple[float, float]:
    """(control, target) Doppler detunings; the target's is dropped unless
    both atoms are hot."""
    dets = shot.doppler_detunings
    control = dets[0]
    target = dets[1] if doppler_atoms == "both" and len(dets) > 1 else 0.0
    return control, target


def ratio_contrast(z: np.ndarray, offset: np.ndarray):
    """Contrast ``|mean z| / mean offset`` from per-shot fringe amplitudes.

    ``z`` (complex) and ``offset`` have shape ``(n_shots, n_points)``. Both
    are linear in the populations, so they are averaged over shots before
    the modulus is taken. The standard error comes from linearising the
    ratio per shot along the mean amplitude direction.
    """
    z = np.asarray(z, dtype=complex)
    offset = np.asarray(offset, dtype=float)
    n = z.shape[0]
    zm = z.mean(axis=0)
    om = offset.mean(axis=0)
    mag = np.abs(zm)
    contrast = np.divide(mag, om, out=np.zeros_like(mag), where=om > 0)
    if n < 2:
        return contrast, np.zeros_like(contrast)
    direction = np.divide(zm, mag, out=np.ones_like(zm), where=mag > 0)
    proj = (z * direction.conj()).real
    lin = np.divide(proj - contrast * offset, om, out=np.zeros_like(proj), where=om > 0)
    return contrast, lin.std(axis=0, ddof=1) / np.sqrt(n)


def quadrature_contrast(samples: Sequence[np.ndarray]):
    """Contrast from four readouts at analysis phases 0, pi/2, pi, 3pi/2.

    ``samples[k]`` has shape ``(n_shots, n_points)``. The fringe amplitude
    is ``|(P0 - P2) + i (P1 - P3)| / 2`` and the offset the mean of the four
    readouts, so a raw population fringe ``(1 + C cos)/2`` gives ``C``.
    """
    p0, p1, p2, p3 = (np.asarray(s, dtype=float) for s in samples)
    z = 0.5 * ((p0 - p2) + 1j * (p1 - p3))
    return ratio_contrast(z, 0.25 * (p0 + p1 + p2 + p3))


def fringe_contrast(x: np.ndarray, samples: np.ndarray, frequency: float):
    """Contrast of fringes ``samples[shot, :]`` sampled at ``x`` with a
    known ``frequency`` (cycles per unit x), via the linear cosine fit
    ``a cos + b sin + c`` applied to every shot."""
    x = np.asarray(x, dtype=float)
    w = 2.0 * np.pi * frequency * x
    design = np.column_stack([np.cos(w), np.sin(w), np.ones_like(x)])
    coef = np.asarray(samples, dtype=float) @ np.linalg.pinv(design).T
    z = coef[:, 0] - 1j * coef[:, 1]
    c, se = ratio_contrast(z[:, None], coef[:, 2:3])
    return float(c[0]), float(se[0])
