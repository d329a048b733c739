"""Quasi-static shot noise and seeded ensemble averaging.

Random numbers come from numpy's counter-based Philox4x64-10 generator,
keyed per shot by ``SeedSequence((seed, shot_index, channel))``. A shot's
draws therefore depend only on ``(seed, shot_index)``: results do not
change with evaluation order, chunking or the number of workers, and
switching one noise channel off leaves the draws of the others untouched.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .constants import KB, RB87_MASS

# SeedSequence channel ids
_DOPPLER, _RABI, _GROUND = 0, 1, 2
_EXPERIMENT_BASE = 16

CHUNK_SIZE = 32


def doppler_sigma(temperature: float, k_eff: float, mass: float = RB87_MASS) -> float:
    """RMS Doppler detuning ``k_eff sqrt(kB T / m)`` in rad/s."""
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    return k_eff * math.sqrt(KB * temperature / mass)


@dataclass(frozen=True)
class NoiseSpec:
    """Distributions for quasi-static per-shot noise.

    ``rabi_sigmas`` are absolute standard deviations (rad/s) keyed by drive
    name; ``rabi_nominal`` gives the nominal Rabi frequency for the same key
    so the multiplier is ``Normal(1, sigma / nominal)``.

    ``ground_t2_star`` switches on thermal differential-light-shift
    dephasing of the ground qubit: the shift is ``-(0.97/T2*) X`` with
    ``X ~ Gamma(3, 1)``, the energy distribution of a thermal atom in a 3D
    harmonic trap, which produces the Kuhr Ramsey envelope.
    """

    temperature: float = 0.0
    k_eff: float = 0.0
    mass: float = RB87_MASS
    rabi_sigmas: Mapping[str, float] = field(default_factory=dict)
    rabi_nominal: Mapping[str, float] = field(default_factory=dict)
    doppler: bool = True
    rabi: bool = True
    n_atoms: int = 1
    ground_t2_star: float | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if any(s < 0 for s in self.rabi_sigmas.values()):
            raise ValueError("Rabi sigmas must be >= 0")
        missing = set(self.rabi_sigmas) - set(self.rabi_nominal)
        if missing:
            raise ValueError(f"no nominal Rabi frequency for {sorted(missing)}")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if self.ground_t2_star is not None and self.ground_t2_star <= 0:
            raise ValueError("ground_t2_star must be positive")

    @property
    def velocity_sigma(self) -> float:
        return math.sqrt(KB * self.temperature / self.mass)

    @property
    def doppler_sigma(self) -> float:
        return doppler_sigma(self.temperature, self.k_eff, self.mass)

    def relative_rabi_sigma(self, name: str) -> float:
        return self.rabi_sigmas[name] / self.rabi_nominal[name]


NOISELESS = NoiseSpec()


def _generator(seed: int, shot_index: int, channel: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, shot_index, channel])))


@dataclass(frozen=True)
class ShotSample:
    shot_index: int
    seed: int
    doppler_detunings: tuple[float, ...]
    velocities: tuple[tuple[float, float, float], ...]
    rabi_scale: Mapping[str, float]
    ground_detuning: float = 0.0

    @property
    def doppler_detuning(self) -> float:
        return self.doppler_detunings[0]

    def scale(self, name: str) -> float:
        return self.rabi_scale.get(name, 1.0)

    def rng(self, stream: int = 0) -> np.random.Generator:
        """Independent generator for experiment-specific draws of this shot."""
        return _generator(self.seed, self.shot_index, _EXPERIMENT_BASE + stream)


def sample_shot(spec: NoiseSpec, seed: int, shot_index: int) -> ShotSample:
    """One concrete noise draw; a pure function of ``(spec, seed, shot_index)``.

    Velocities are drawn in 3D from the Maxwell-Boltzmann distribution; only
    the component along the beam axis (z) enters the Doppler detuning.
    """
    n = spec.n_atoms
    if spec.doppler and spec.temperature > 0:
        v = _generator(seed, shot_index, _DOPPLER).standard_normal((n, 3)) * spec.velocity_sigma
    else:
        v = np.zeros((n, 3))
    detunings = tuple(float(spec.k_eff * vz) for vz in v[:, 2])

    scales: dict[str, float] = {}
    if spec.rabi and spec.rabi_sigmas:
        rng = _generator(seed, shot_index, _RABI)
        for name in sorted(spec.rabi_sigmas):
            rel = spec.relative_rabi_sigma(name)
            x = 1.0 + rel * rng.standard_normal()
            while x <= 0.0:
                x = 1.0 + rel * rng.standard_normal()
            scales[name] = float(x)

    ground = 0.0
    if spec.ground_t2_star is not None:
        x = _generator(seed, shot_index, _GROUND).gamma(3.0)
        ground = -0.97 / spec.ground_t2_star * float(x)

    return ShotSample(
        shot_index=shot_index,
        seed=seed,
        doppler_detunings=detunings,
        velocities=tuple(tuple(float(c) for c in row) for row in v),
        rabi_scale=scales,
        ground_detuning=ground,
    )


class ShotError(RuntimeError):
    def __init__(self, shot_index: int, cause: BaseException):
        super().__init__(f"shot {shot_index}: {cause}")
        self.shot_index = shot_index


class Experiment(Protocol):
    """What :func:`run_ensemble` needs from an experiment."""

    @property
    def scan_values(self) -> np.ndarray: ...

    @property
    def noise(self) -> NoiseSpec: ...

    def observe(self, shot: ShotSample) -> np.ndarray: ...


@dataclass(frozen=True)
class EnsembleResult:
    scan_values: np.ndarray
    mean_observable: np.ndarray
    standard_error: np.ndarray
    n_shots: int
    seed: int

    def __post_init__(self):
        if not (len(self.scan_values) == len(self.mean_observable) == len(self.standard_error)):
            raise ValueError("scan, mean and standard error lengths differ")


def _run_chunk(experiment, seed: int, indices: Sequence[int]) -> np.ndarray:
    rows = []
    for i in indices:
        shot = sample_shot(experiment.noise, seed, i)
        try:
            rows.append(np.asarray(experiment.observe(shot), dtype=float))
        except Exception as exc:  # tag and re-raise
            raise ShotError(i, exc) from exc
    return np.stack(rows)


def shot_matrix(experiment, n_shots: int, seed: int, workers: int = 1) -> np.ndarray:
    """Per-shot observables, shape ``(n_shots, n_scan)``, in shot-index order."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    chunks = [range(s, min(s + CHUNK_SIZE, n_shots)) for s in range(0, n_shots, CHUNK_SIZE)]
    if workers <= 1 or len(chunks) == 1:
        parts = [_run_chunk(experiment, seed, c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, experiment, seed, c) for c in chunks]
            parts = [f.result() for f in futures]
    return np.concatenate(parts, axis=0)


def summarize(samples: np.ndarray, scan_values, seed: int) -> EnsembleResult:
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n > 1:
        stderr = samples.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        stderr = np.zeros_like(mean)
    return EnsembleResult(np.asarray(scan_values, dtype=float), mean, stderr, n, seed)


def run_ensemble(experiment, n_shots: int, seed: int = 0, workers: int = 1) -> EnsembleResult:
    """Average an experiment's observable over ``n_shots`` noise draws.

    ``experiment`` is either an object following :class:`Experiment` or an
    :class:`~rydcoh.config.ExperimentConfig` of a scan-type kind.
    Aggregation happens on the index-ordered shot matrix, so equal
    ``(experiment, n_shots, seed)`` give identical bytes for any ``workers``.
    """
    if not hasattr(experiment, "observe"):
        from .experiments import build_experiment

        experiment = build_experiment(experiment)
    samples = shot_matrix(experiment, n_shots, seed, workers)
    return summarize(samples, experiment.scan_values, seed)
