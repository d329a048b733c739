"""Coherence-time algebra and closed-form estimates.

Inputs and outputs are SI seconds unless a name says otherwise; the
gate-error law works in microseconds because its coefficient does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..constants import HBAR, KB
from ..noise import doppler_sigma

#: E = coefficient * (1 / T2*[us])^2 for the 2 us pi-gap-pi C_Z gate
ERROR_LAW_COEFFICIENT = 0.836


class InconsistentBudgetError(ValueError):
    """Coherence times that cannot belong to one physical budget."""


def _positive(**values) -> None:
    for name, v in values.items():
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")


def combine_coherence(t2_star: float, t2_prime: float, t1: float) -> float:
    """Total ground-Rydberg coherence time from its three channels:
    ``1/tau = 1/T2* + 1/T2' + 1/(2 T1)``. Infinite inputs drop out."""
    _positive(t2_star=t2_star, t2_prime=t2_prime, t1=t1)
    return 1.0 / (1.0 / t2_star + 1.0 / t2_prime + 1.0 / (2.0 * t1))


def extract_coherence(tau_gr: float, t2_spin_echo: float, t1: float) -> tuple[float, float]:
    """Split a Ramsey time and an echo time into ``(T2*, T2')``.

    The echo removes the inhomogeneous part, so ``1/T2,sp = 1/T2' + 1/(2 T1)``
    and ``1/T2* = 1/tau_gr - 1/T2,sp``.
    """
    _positive(tau_gr=tau_gr, t2_spin_echo=t2_spin_echo, t1=t1)
    if not tau_gr < t2_spin_echo:
        raise InconsistentBudgetError(
            f"need tau_gr < T2_spin_echo, got {tau_gr:.6g} >= {t2_spin_echo:.6g}"
        )
    if not t2_spin_echo < 2.0 * t1:
        raise InconsistentBudgetError(
            f"need T2_spin_echo < 2*T1, got {t2_spin_echo:.6g} >= {2.0 * t1:.6g}"
        )
    t2_star = 1.0 / (1.0 / tau_gr - 1.0 / t2_spin_echo)
    t2_prime = 1.0 / (1.0 / t2_spin_echo - 1.0 / (2.0 * t1))
    return t2_star, t2_prime


def t2_prime_from_echo(t2_spin_echo: float, t1: float) -> float:
    _positive(t2_spin_echo=t2_spin_echo, t1=t1)
    if not t2_spin_echo < 2.0 * t1:
        raise InconsistentBudgetError(
            f"need T2_spin_echo < 2*T1, got {t2_spin_echo:.6g} >= {2.0 * t1:.6g}"
        )
    return 1.0 / (1.0 / t2_spin_echo - 1.0 / (2.0 * t1))


@dataclass(frozen=True)
class CoherenceBudget:
    t2_star: float
    t2_prime: float
    t1: float
    tau_gr: float
    t2_spin_echo: float | None = None

    def __post_init__(self):
        for name in ("t2_star", "t2_prime", "t1", "tau_gr", "t2_spin_echo"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def residual(self) -> float:
        """Relative mismatch of ``1/tau_gr`` against its three channels."""
        rate = 1.0 / self.t2_star + 1.0 / self.t2_prime + 1.0 / (2.0 * self.t1)
        return abs(1.0 / self.tau_gr - rate) * self.tau_gr

    @property
    def echo_residual(self) -> float | None:
        if self.t2_spin_echo is None:
            return None
        rate = 1.0 / self.t2_prime + 1.0 / (2.0 * self.t1)
        return abs(1.0 / self.t2_spin_echo - rate) * self.t2_spin_echo

    def is_consistent(self, tol: float = 1e-6) -> bool:
        echo = self.echo_residual
        return self.residual < tol and (echo is None or echo < tol)

    @classmethod
    def from_channels(cls, t2_star: float, t2_prime: float, t1: float) -> "CoherenceBudget":
        tau = combine_coherence(t2_star, t2_prime, t1)
        echo = 1.0 / (1.0 / t2_prime + 1.0 / (2.0 * t1))
        return cls(t2_star, t2_prime, t1, tau, echo)

    @classmethod
    def from_measurements(cls, tau_gr: float, t2_spin_echo: float, t1: float) -> "CoherenceBudget":
        t2_star, t2_prime = extract_coherence(tau_gr, t2_spin_echo, t1)
        return cls(t2_star, t2_prime, t1, tau_gr, t2_spin_echo)


def estimate_t2_doppler(temperature: float, k_eff: float, mass: float) -> float:
    """Doppler dephasing time ``sqrt(2) / (k_eff dv)``, the 1/e time of the
    Gaussian Ramsey envelope ``exp(-sigma^2 t^2 / 2)``."""
    _positive(temperature=temperature, k_eff=k_eff, mass=mass)
    return math.sqrt(2.0) / doppler_sigma(temperature, k_eff, mass)


def estimate_t2_ground(temperature: float, eta: float) -> float:
    """Ground-qubit thermal dephasing time ``0.97 * 2 hbar / (eta kB T)``."""
    _positive(temperature=temperature, eta=eta)
    return 0.97 * 2.0 * HBAR / (eta * KB * temperature)


def estimate_scatter_lifetime(delta1: float, omega_b: float, gamma_e: float) -> float:
    """Rydberg decay time from intermediate-level scattering of the blue
    laser, ``4 Delta^2 / (Omega_b^2 Gamma_e)``."""
    for name, v in (("delta1", delta1), ("omega_b", omega_b), ("gamma_e", gamma_e)):
        if v == 0:
            raise ValueError(f"{name} must be nonzero")
    return 4.0 * delta1**2 / (omega_b**2 * abs(gamma_e))


def combine_lifetimes(lifetimes: Iterable[float]) -> float:
    values = list(lifetimes)
    if not values:
        raise ValueError("need at least one lifetime")
    for v in values:
        _positive(lifetime=v)
    return 1.0 / sum(1.0 / v for v in values)


def error_from_t2star(t2_star: float, coefficient: float = ERROR_LAW_COEFFICIENT) -> float:
    """C_Z error predicted from the Ramsey dephasing time ``t2_star`` (s)."""
    _positive(t2_star=t2_star)
    return coefficient / (t2_star * 1e6) ** 2


@dataclass(frozen=True)
class ErrorLaw:
    coefficient: float
    sigma: float
    n_points: int


def fit_error_law(t2_star: Sequence[float], error: Sequence[float]) -> ErrorLaw:
    """Regress ``E`` on ``(1/T2*[us])^2`` through the origin."""
    t2 = np.asarray(t2_star, dtype=float)
    e = np.asarray(error, dtype=float)
    if len(t2) < 3 or len(t2) != len(e):
        raise ValueError("need at least 3 (t2_star, error) pairs")
    if np.any(t2 <= 0):
        raise ValueError("t2_star values must be positive")
    x = (1.0 / (t2 * 1e6)) ** 2
    coef = float(x @ e / (x @ x))
    resid = e - coef * x
    sigma = math.sqrt(float(resid @ resid) / (len(x) - 1) / float(x @ x))
    return ErrorLaw(coef, sigma, len(x))
