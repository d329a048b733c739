"""Canned experiments built from an :class:`~rydcoh.config.ExperimentConfig`.

``build_experiment`` turns a scan-type config into an experiment object;
the ``run_*`` functions add the post-processing each kind needs (contrast
extraction, gate scoring, temperature sweeps, Bell analysis).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..analysis.coherence import ErrorLaw, estimate_t2_doppler, fit_error_law
from ..analysis.fitting import (
    Contrast,
    FitResult,
    LinearFit,
    extract_contrast,
    fit_exponential_decay,
    fit_gaussian_decay,
    fit_inverse_sqrt,
    fit_line,
    stderr_weights,
)
from ..config import ConfigError, ExperimentConfig
from ..noise import NOISELESS, EnsembleResult, NoiseSpec, shot_matrix, summarize
from .common import QUADRATURE_OFFSETS, fringe_contrast, quadrature_contrast, rydberg_noise
from .gates import (
    BellSequence,
    CzDetuningError,
    CzErrorShot,
    GateOutcome,
    calibrate_phases,
    cz_unitary,
    evaluate_gate,
)
from .single_atom import ControlFringe, GrRamsey, GroundRamsey, PiTrain, RabiScan, SpinEcho, T1TwoPi

DEFAULT_SHOTS = 200

__all__ = [
    "BellResult",
    "ControlFringeResult",
    "GateOutcome",
    "TemperatureSweepResult",
    "build_experiment",
    "run_bell_sequence",
    "run_control_fringe",
    "run_cz_detuning_scan",
    "run_cz_gate",
    "run_cz_temperature_sweep",
    "run_ground_ramsey",
    "run_gr_ramsey",
    "run_pi_train",
    "run_rabi_scan",
    "run_scan",
    "run_spin_echo",
    "run_t1_two_pi",
]


def _expect(cfg: ExperimentConfig, *kinds: str) -> None:
    if cfg.kind not in kinds:
        raise ConfigError("kind", f"expected {' or '.join(kinds)}, got {cfg.kind}")


def _shots_seed(cfg: ExperimentConfig, n_shots, seed) -> tuple[int, int]:
    n = n_shots if n_shots is not None else (cfg.shots if cfg.shots is not None else DEFAULT_SHOTS)
    s = seed if seed is not None else (cfg.seed if cfg.seed is not None else 0)
    if n < 1:
        raise ValueError("n_shots must be >= 1")
    return int(n), int(s)


def _rydberg_decay(cfg: ExperimentConfig) -> dict:
    return {"t1": tuple(cfg.noise.t1), "t2_prime": cfg.noise.t2_prime}


def _gate_noise(cfg: ExperimentConfig, temperature: float | None = None) -> NoiseSpec:
    return rydberg_noise(cfg, n_atoms=2, temperature=temperature)


def _phases(cfg: ExperimentConfig):
    if cfg.sequence.phase_reference == "optimized":
        return None
    return calibrate_phases(cfg.drive.rydberg_rabi, cfg.drive.blockade)


@dataclass(frozen=True)
class _ParityView:
    """Scan-shaped view of a Bell experiment: parity versus phase only."""

    bell: BellSequence

    @property
    def scan_values(self) -> np.ndarray:
        return self.bell.scan_values

    @property
    def noise(self) -> NoiseSpec:
        return self.bell.noise

    def observe(self, shot) -> np.ndarray:
        return self.bell.observe(shot)[:-2]


def build_experiment(cfg: ExperimentConfig):
    """Experiment object for a scan-type config."""
    d, n, seq = cfg.drive, cfg.noise, cfg.sequence
    x = cfg.scan_values
    kind = cfg.kind
    if kind == "RabiScan":
        if d.model == "four_level":
            sigmas = {}
            nominal = {"red": d.omega_red, "blue": d.omega_blue}
            if n.sigma_red > 0:
                sigmas["red"] = n.sigma_red
            if n.sigma_blue > 0:
                sigmas["blue"] = n.sigma_blue
            noise = NoiseSpec(
                temperature=n.temperature,
                k_eff=cfg.k_drive,
                mass=cfg.atom.mass,
                rabi_sigmas=sigmas,
                rabi_nominal={k: nominal[k] for k in sigmas},
                doppler=n.doppler,
                rabi=n.rabi,
            )
        else:
            noise = rydberg_noise(cfg)
        return RabiScan(
            durations=x,
            model=d.model,
            rabi=d.rydberg_rabi,
            omega_red=d.omega_red,
            omega_blue=d.omega_blue,
            delta1=d.delta1,
            detuning=d.rydberg_detuning,
            compensate_stark=d.compensate_stark,
            atom=cfg.atom,
            spontaneous_decay=n.spontaneous_decay,
            detection=cfg.detection,
            noise=noise,
            **_rydberg_decay(cfg),
        )
    if kind in ("GrRamsey", "SpinEcho"):
        cls = GrRamsey if kind == "GrRamsey" else SpinEcho
        return cls(
            gaps=x,
            rabi=d.rydberg_rabi,
            detuning=d.rydberg_detuning,
            fringe_frequency=d.fringe_frequency,
            detection=cfg.detection,
            noise=rydberg_noise(cfg),
            **_rydberg_decay(cfg),
        )
    if kind == "GroundRamsey":
        noise = NoiseSpec(ground_t2_star=n.ground_t2_star) if n.ground_t2_star else NOISELESS
        return GroundRamsey(
            gaps=x,
            rabi=d.ground_rabi,
            detuning=d.ground_detuning,
            fringe_frequency=d.fringe_frequency,
            noise=noise,
        )
    if kind == "T1TwoPi":
        return T1TwoPi(
            gaps=x,
            rabi=d.rydberg_rabi,
            detuning=d.rydberg_detuning,
            detection=cfg.detection,
            noise=rydberg_noise(cfg),
            **_rydberg_decay(cfg),
        )
    if kind == "PiTrain":
        det = cfg.detection
        return PiTrain(n_pulses=x, p1d=det.p1d, prd=det.prd, pre=det.pre)
    if kind == "ControlFringe":
        return ControlFringe(
            t_values=x,
            dt_values=np.asarray(seq.dt_values, dtype=float),
            rydberg_rabi=d.rydberg_rabi,
            ground_rabi=d.ground_rabi,
            fringe_frequency=d.fringe_frequency,
            rydberg_detuning=d.rydberg_detuning,
            ground_detuning=d.ground_detuning,
            noise=rydberg_noise(cfg),
            **_rydberg_decay(cfg),
        )
    if kind == "CzDetuningScan":
        return CzDetuningError(
            detunings=x,
            rabi=d.rydberg_rabi,
            blockade=d.blockade,
            phases=_phases(cfg),
            fidelity_kind=seq.fidelity,
            target_detuning=seq.target_detuning,
        )
    if kind == "BellSequence":
        return _ParityView(_bell(cfg))
    raise ConfigError("kind", f"{kind} is not a scan experiment; use its run function")


def _bell(cfg: ExperimentConfig) -> BellSequence:
    d = cfg.drive
    return BellSequence(
        phases=cfg.scan_values,
        rabi=d.rydberg_rabi,
        ground_rabi=d.ground_rabi,
        blockade=d.blockade,
        doppler_atoms=cfg.noise.doppler_atoms,
        rydberg_detuning=d.rydberg_detuning,
        noise=_gate_noise(cfg),
        **_rydberg_decay(cfg),
    )


def _contrast_scan(experiment, n_shots: int, seed: int, workers: int) -> EnsembleResult:
    samples = [shot_matrix(experiment.with_offset(o), n_shots, seed, workers) for o in QUADRATURE_OFFSETS]
    contrast, stderr = quadrature_contrast(samples)
    return EnsembleResult(experiment.scan_values, contrast, stderr, n_shots, seed)


def run_scan(cfg: ExperimentConfig, n_shots=None, seed=None, workers: int = 1) -> EnsembleResult:
    """Ensemble curve of any scan-type kind (contrast readout when set)."""
    n, s = _shots_seed(cfg, n_shots, seed)
    experiment = build_experiment(cfg)
    if cfg.sequence.readout == "contrast":
        return _contrast_scan(experiment, n, s, workers)
    return summarize(shot_matrix(experiment, n, s, workers), experiment.scan_values, s)


def run_rabi_scan(cfg, n_shots=None, seed=None, workers=1) -> EnsembleResult:
    _expect(cfg, "RabiScan")
    return run_scan(cfg, n_shots, seed, workers)


def run_ground_ramsey(cfg, n_shots=None, seed=None, workers=1) -> EnsembleResult:
    _expect(cfg, "GroundRamsey")
    return run_scan(cfg, n_shots, seed, workers)


def run_gr_ramsey(cfg, n_shots=None, seed=None, workers=1) -> EnsembleResult:
    _expect(cfg, "GrRamsey")
    return run_scan(cfg, n_shots, seed, workers)


def run_spin_echo(cfg, n_shots=None, seed=None, workers=1) -> EnsembleResult:
    _expect(cfg, "SpinEcho")
    return run_scan(cfg, n_shots, seed, workers)


def run_t1_two_pi(cfg, n_shots=None, seed=None, workers=1) -> EnsembleResult:
    _expect(cfg, "T1TwoPi")
    return run_scan(cfg, n_shots, seed, workers)


def run_pi_train(cfg, n_shots=None, seed=None, workers=1) -> EnsembleResult:
    _expect(cfg, "PiTrain")
    return run_scan(cfg, n_shots, seed, workers)


@dataclass(frozen=True)
class ControlFringeResult:
    """Fringes ``P(|0>)`` versus ``dt`` for each ``T`` and the contrast
    curve extracted from them (``contrast.mean_observable`` vs ``T``)."""

    t_values: np.ndarray
    dt_values: np.ndarray
    fringes: np.ndarray
    fringe_stderr: np.ndarray
    contrasts: tuple[Contrast, ...]
    contrast: EnsembleResult
    fringe_cycles_per_second: float

    def fit_decay(self, weighted: bool = False) -> FitResult:
        """Single exponential with no offset: ``T_cont`` is ``params['tau']``."""
        c = self.contrast
        sigma = stderr_weights(c.standard_error) if weighted else None
        return fit_exponential_decay(c.scan_values, c.mean_observable, sigma=sigma, offset_fixed=0.0)


def run_control_fringe(cfg, n_shots=None, seed=None, workers=1) -> ControlFringeResult:
    _expect(cfg, "ControlFringe")
    n, s = _shots_seed(cfg, n_shots, seed)
    experiment: ControlFringe = build_experiment(cfg)
    samples = shot_matrix(experiment, n, s, workers)
    res = summarize(samples, experiment.scan_values, s)
    shape = experiment.shape
    fringes = res.mean_observable.reshape(shape)
    errs = res.standard_error.reshape(shape)
    per_shot = samples.reshape((n,) + shape)
    dt = np.asarray(cfg.sequence.dt_values, dtype=float)
    # analysis phase advances by 2 * fringe_frequency per unit dt
    f = 2.0 * cfg.drive.fringe_frequency / (2.0 * np.pi)
    contrasts, values, sigmas = [], [], []
    for k, row in enumerate(fringes):
        contrasts.append(extract_contrast(dt, row, frequency=f))
        c, se = fringe_contrast(dt, per_shot[:, k, :], f)
        values.append(min(c, 1.0))
        sigmas.append(se)
    curve = EnsembleResult(np.asarray(cfg.scan_values, dtype=float), np.array(values), np.array(sigmas), n, s)
    return ControlFringeResult(cfg.scan_values, dt, fringes, errs, tuple(contrasts), curve, f)


def run_cz_gate(cfg, local_phases=None) -> GateOutcome:
    """Score one noiseless gate at the configured static detunings.

    Local Z corrections are ``local_phases`` if given, else the noiseless
    resonant calibration (``phase_reference="calibrated"``) or a fresh
    optimisation (``"optimized"``).
    """
    _expect(cfg, "CzGate")
    d, seq = cfg.drive, cfg.sequence
    phases = local_phases if local_phases is not None else _phases(cfg)
    u = cz_unitary(d.rydberg_rabi, d.blockade, seq.control_detuning, seq.target_detuning)
    return evaluate_gate(u, seq.fidelity, phases)


def run_cz_detuning_scan(cfg, n_shots=None, seed=None, workers=1) -> EnsembleResult:
    """Gate error versus static control detuning (deterministic; standard
    errors are zero)."""
    _expect(cfg, "CzDetuningScan")
    _, s = _shots_seed(cfg, 1, seed)
    experiment = build_experiment(cfg)
    return summarize(shot_matrix(experiment, 1, s, 1), experiment.scan_values, s)


@dataclass(frozen=True)
class TemperatureSweepResult:
    temperatures: np.ndarray
    t2_star: np.ndarray
    t2_star_sigma: np.ndarray
    error: np.ndarray
    error_stderr: np.ndarray
    ramsey: tuple[EnsembleResult, ...]
    ramsey_fits: tuple[FitResult, ...]
    n_shots: int
    seed: int

    def t2_fit(self) -> LinearFit:
        """``T2* = c / sqrt(T)``."""
        return fit_inverse_sqrt(self.temperatures, self.t2_star)

    def error_fit(self) -> LinearFit:
        return fit_line(self.temperatures, self.error)

    def error_law(self) -> ErrorLaw:
        return fit_error_law(self.t2_star, self.error)

    def as_ensemble(self) -> EnsembleResult:
        return EnsembleResult(self.temperatures, self.error, self.error_stderr, self.n_shots, self.seed)


def _ramsey_gaps(cfg: ExperimentConfig, temperature: float) -> np.ndarray:
    if cfg.sequence.ramsey_gaps:
        return np.asarray(cfg.sequence.ramsey_gaps, dtype=float)
    t2 = estimate_t2_doppler(temperature, cfg.k_drive, cfg.atom.mass)
    return np.linspace(0.0, 2.5 * t2, 26)


def run_cz_temperature_sweep(cfg, n_shots=None, seed=None, workers=1) -> TemperatureSweepResult:
    """Per temperature: T2* from a Ramsey contrast decay (Gaussian fit,
    no offset) and the Monte-Carlo mean gate error, both with the same
    Rydberg drive and Doppler spread."""
    _expect(cfg, "TemperatureSweep")
    n, s = _shots_seed(cfg, n_shots, seed)
    d, seq = cfg.drive, cfg.sequence
    phases = _phases(cfg)
    t2, t2_sig, err, err_se, curves, fits = [], [], [], [], [], []
    for temp in cfg.scan_values:
        ramsey = GrRamsey(
            gaps=_ramsey_gaps(cfg, temp),
            rabi=d.rydberg_rabi,
            noise=rydberg_noise(cfg, temperature=temp),
        )
        curve = _contrast_scan(ramsey, n, s, workers)
        fit = fit_gaussian_decay(curve.scan_values, curve.mean_observable, offset_fixed=0.0)
        t2.append(fit.params["tau_g"])
        t2_sig.append(fit.sigmas["tau_g"])
        curves.append(curve)
        fits.append(fit)

        gate = CzErrorShot(
            rabi=d.rydberg_rabi,
            blockade=d.blockade,
            phases=phases,
            fidelity_kind=seq.fidelity,
            doppler_atoms=cfg.noise.doppler_atoms,
            control_detuning=seq.control_detuning,
            target_detuning=seq.target_detuning,
            noise=_gate_noise(cfg, temperature=temp),
        )
        res = summarize(shot_matrix(gate, n, s, workers), gate.scan_values, s)
        err.append(float(res.mean_observable[0]))
        err_se.append(float(res.standard_error[0]))
    return TemperatureSweepResult(
        cfg.scan_values,
        np.array(t2),
        np.array(t2_sig),
        np.array(err),
        np.array(err_se),
        tuple(curves),
        tuple(fits),
        n,
        s,
    )


@dataclass(frozen=True)
class BellResult:
    parity: EnsembleResult
    p00: float
    p11: float
    p00_stderr: float
    p11_stderr: float
    parity_coefficients: np.ndarray
    parity_contrast: float
    parity_contrast_sigma: float

    @property
    def fidelity(self) -> float:
        """Population + parity estimate ``(P00 + P11)/2 + C/2``."""
        return 0.5 * (self.p00 + self.p11) + 0.5 * self.parity_contrast


def _parity_fit(phi: np.ndarray, y: np.ndarray):
    # y = a cos(2 phi) + b sin(2 phi) + c, closed-form least squares
    x = np.column_stack([np.cos(2 * phi), np.sin(2 * phi), np.ones_like(phi)])
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    dof = max(len(y) - 3, 1)
    cov = np.linalg.pinv(x.T @ x) * float(resid @ resid) / dof
    a, b = coef[0], coef[1]
    amp = float(np.hypot(a, b))
    if amp > 0:
        g = np.array([a / amp, b / amp])
        sig = float(np.sqrt(max(g @ cov[:2, :2] @ g, 0.0)))
    else:
        sig = float(np.sqrt(max(np.trace(cov[:2, :2]), 0.0)))
    return coef, amp, sig


def run_bell_sequence(cfg, n_shots=None, seed=None, workers=1) -> BellResult:
    _expect(cfg, "BellSequence")
    n, s = _shots_seed(cfg, n_shots, seed)
    bell = _bell(cfg)
    samples = shot_matrix(bell, n, s, workers)
    phi = bell.scan_values
    parity = summarize(samples[:, :-2], phi, s)
    pops = summarize(samples[:, -2:], np.arange(2.0), s)
    if len(phi) < 4:
        raise ConfigError("scan.values", "need at least 4 analysis phases for the parity fit")
    coef, amp, sig = _parity_fit(phi, parity.mean_observable)
    return BellResult(
        parity,
        float(pops.mean_observable[0]),
        float(pops.mean_observable[1]),
        float(pops.standard_error[0]),
        float(pops.standard_error[1]),
        coef,
        amp,
        sig,
    )


RUNNERS = {
    "RabiScan": run_rabi_scan,
    "GroundRamsey": run_ground_ramsey,
    "GrRamsey": run_gr_ramsey,
    "SpinEcho": run_spin_echo,
    "T1TwoPi": run_t1_two_pi,
    "PiTrain": run_pi_train,
    "ControlFringe": run_control_fringe,
    "CzGate": run_cz_gate,
    "CzDetuningScan": run_cz_detuning_scan,
    "TemperatureSweep": run_cz_temperature_sweep,
    "BellSequence": run_bell_sequence,
}
