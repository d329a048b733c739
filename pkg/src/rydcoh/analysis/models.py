"""Curve models with analytic Jacobians.

Each model maps ``(x, p)`` to ``y`` where ``p`` is ordered as ``params``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi

KUHR_ALPHA = 0.95
KUHR_KAPPA = 0.97


@dataclass(frozen=True)
class CurveModel:
    name: str
    params: tuple[str, ...]
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, x, p):
        return self.func(np.asarray(x, dtype=float), np.asarray(p, dtype=float))


def _damped_cosine(envelope: str):
    def parts(t, p):
        a, c, f, phi, tau = p
        theta = TWO_PI * f * t + phi
        if envelope == "exp":
            env = np.exp(-t / tau)
            denv = env * t / tau**2
        else:
            env = np.exp(-((t / tau) ** 2))
            denv = env * 2.0 * t**2 / tau**3
        return a, c, env, denv, np.cos(theta), np.sin(theta)

    def func(t, p):
        a, c, env, _, cos, _ = parts(t, p)
        return c + a * env * cos

    def jac(t, p):
        a, c, env, denv, cos, sin = parts(t, p)
        return np.column_stack(
            [env * cos, np.ones_like(t), -a * env * sin * TWO_PI * t, -a * env * sin, a * denv * cos]
        )

    return func, jac


_dc_exp = _damped_cosine("exp")
_dc_gauss = _damped_cosine("gauss")

DAMPED_COSINE = CurveModel("damped_cosine", ("A", "offset", "frequency", "phase", "tau"), *_dc_exp)
DAMPED_COSINE_GAUSS = CurveModel(
    "damped_cosine_gauss", ("A", "offset", "frequency", "phase", "tau"), *_dc_gauss
)


def _cos_func(t, p):
    a, c, f, phi = p
    return c + a * np.cos(TWO_PI * f * t + phi)


def _cos_jac(t, p):
    a, c, f, phi = p
    theta = TWO_PI * f * t + phi
    s = np.sin(theta)
    return np.column_stack([np.cos(theta), np.ones_like(t), -a * s * TWO_PI * t, -a * s])


COSINE = CurveModel("cosine", ("A", "offset", "frequency", "phase"), _cos_func, _cos_jac)


def _exp_func(t, p):
    a, tau, c = p
    return c + a * np.exp(-t / tau)


def _exp_jac(t, p):
    a, tau, c = p
    e = np.exp(-t / tau)
    return np.column_stack([e, a * e * t / tau**2, np.ones_like(t)])


EXPONENTIAL = CurveModel("exponential", ("A", "tau", "offset"), _exp_func, _exp_jac)


def _gauss_func(t, p):
    a, tau, c = p
    return c + a * np.exp(-((t / tau) ** 2))


def _gauss_jac(t, p):
    a, tau, c = p
    e = np.exp(-((t / tau) ** 2))
    return np.column_stack([e, a * e * 2.0 * t**2 / tau**3, np.ones_like(t)])


GAUSSIAN_DECAY = CurveModel("gaussian_decay", ("A", "tau_g", "offset"), _gauss_func, _gauss_jac)


def kuhr_alpha(t, t2_star):
    """Thermal Ramsey envelope ``[1 + 0.95 (t/T2*)^2]^(-3/2)``."""
    u = np.asarray(t, dtype=float) / t2_star
    return (1.0 + KUHR_ALPHA * u**2) ** -1.5


def kuhr_kappa(t, t2_star):
    """Thermal Ramsey phase drag ``-3 arctan(0.97 t/T2*)``."""
    return -3.0 * np.arctan(KUHR_KAPPA * np.asarray(t, dtype=float) / t2_star)


def _kuhr_func(t, p):
    a, b, dp, phi, ts = p
    return b + kuhr_alpha(t, ts) * a * np.cos(dp * t + kuhr_kappa(t, ts) + phi)


def _kuhr_jac(t, p):
    a, b, dp, phi, ts = p
    u = t / ts
    du = -t / ts**2
    q = 1.0 + KUHR_ALPHA * u**2
    alpha = q**-1.5
    dalpha = -1.5 * q**-2.5 * 2.0 * KUHR_ALPHA * u * du
    dkappa = -3.0 * KUHR_KAPPA * du / (1.0 + (KUHR_KAPPA * u) ** 2)
    theta = dp * t + kuhr_kappa(t, ts) + phi
    cos, sin = np.cos(theta), np.sin(theta)
    return np.column_stack(
        [
            alpha * cos,
            np.ones_like(t),
            -a * alpha * sin * t,
            -a * alpha * sin,
            a * (dalpha * cos - alpha * sin * dkappa),
        ]
    )


RAMSEY_KUHR = CurveModel("ramsey_kuhr", ("A", "B", "delta_prime", "phi", "t2_star"), _kuhr_func, _kuhr_jac)


def _pi_train_func(n, p):
    p1d, prd, pre = p
    return p1d - prd * pre**n


def _pi_train_jac(n, p):
    p1d, prd, pre = p
    return np.column_stack([np.ones_like(n), -(pre**n), -prd * n * pre ** (n - 1.0)])


PI_TRAIN = CurveModel("pi_train", ("p1d", "prd", "pre"), _pi_train_func, _pi_train_jac)

MODELS = {
    m.name: m
    for m in (DAMPED_COSINE, DAMPED_COSINE_GAUSS, COSINE, EXPONENTIAL, GAUSSIAN_DECAY, RAMSEY_KUHR, PI_TRAIN)
}
