"""Least-squares fits of the decay and fringe models.

Minimisation is scipy's bounded trust-region reflective solver with
Jacobian-based variable scaling, so parameters of very different
magnitude (microseconds next to megahertz) stay well conditioned. Phase-like parameters are multi-started and the best
minimum kept. Uncertainties are the covariance diagonal scaled by the
reduced chi-square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from .models import (
    COSINE,
    DAMPED_COSINE,
    DAMPED_COSINE_GAUSS,
    EXPONENTIAL,
    GAUSSIAN_DECAY,
    PI_TRAIN,
    RAMSEY_KUHR,
    TWO_PI,
    CurveModel,
    kuhr_alpha,
    kuhr_kappa,
)

MAX_ITERATIONS = 500
XTOL = 1e-10
GTOL = 1e-12


class FitError(RuntimeError):
    """A fit could not be carried out (bad input or no convergence)."""


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict[str, float]
    sigmas: dict[str, float]
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    flags: frozenset[str] = field(default_factory=frozenset)
    n_points: int = 0

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    @property
    def reduced_chi2(self) -> float:
        dof = self.n_points - len(self.params)
        return self.residual_norm**2 / dof if dof > 0 else float("nan")


@dataclass
class _Run:
    p: np.ndarray
    cost: float
    jac: np.ndarray
    converged: bool
    iterations: int


def _solve(model, x, y, w, p0, free, lower, upper) -> _Run:
    p = np.array(p0, dtype=float)
    lo, hi = lower[free], upper[free]
    # trf wants a strictly feasible start
    q0 = np.clip(p[free], lo, hi)
    inner = np.isfinite(lo) & np.isfinite(hi)
    pad = 1e-9 * np.where(inner, hi - lo, 0.0)
    q0 = np.where(q0 <= lo, lo + pad, q0)
    q0 = np.where(q0 >= hi, hi - pad, q0)

    def full(q):
        out = p.copy()
        out[free] = q
        return out

    def residual(q):
        with np.errstate(over="ignore", invalid="ignore"):
            return (model.func(x, full(q)) - y) * w

    def jacobian(q):
        return model.jac(x, full(q))[:, free] * w[:, None]

    if not np.all(np.isfinite(residual(q0))):
        return _Run(full(q0), math.inf, jacobian(q0), False, 0)
    sol = least_squares(
        residual, q0, jac=jacobian, bounds=(lo, hi), method="trf", x_scale="jac",
        xtol=XTOL, ftol=XTOL, gtol=GTOL, max_nfev=MAX_ITERATIONS,
    )
    cost = float(sol.fun @ sol.fun)
    return _Run(full(sol.x), cost, sol.jac, sol.status > 0, int(sol.nfev))


def fit_curve(
    model: CurveModel,
    x,
    y,
    starts: Sequence[Sequence[float]],
    sigma=None,
    bounds: Mapping[str, tuple[float, float]] | None = None,
    fixed: Mapping[str, float] | None = None,
) -> FitResult:
    """Fit ``model`` to ``(x, y)`` from each start in ``starts``; keep the best."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be equal-length 1D arrays")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("data contain non-finite values")
    if sigma is None:
        w = np.ones_like(y)
    else:
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma <= 0):
            raise FitError("y uncertainties must be positive")
        w = 1.0 / sigma
    names = model.params
    fixed = dict(fixed or {})
    free = np.array([n not in fixed for n in names])
    if not free.any():
        raise FitError("no free parameters")
    lower = np.full(len(names), -np.inf)
    upper = np.full(len(names), np.inf)
    for k, n in enumerate(names):
        if bounds and n in bounds:
            lower[k], upper[k] = bounds[n]
    if free.sum() > len(x):
        raise FitError(f"{free.sum()} free parameters but only {len(x)} points")

    best = None
    for start in starts:
        p0 = np.array(start, dtype=float)
        for k, n in enumerate(names):
            if n in fixed:
                p0[k] = fixed[n]
        run = _solve(model, x, y, w, p0, free, lower, upper)
        if best is None or run.cost < best.cost:
            best = run
    if best is None or not np.isfinite(best.cost):
        raise FitError(f"{model.name} fit failed")

    n_free = int(free.sum())
    dof = len(x) - n_free
    # invert in column-normalised form; raw J^T J spans many decades
    d = np.linalg.norm(best.jac, axis=0)
    d[d == 0] = 1.0
    js = best.jac / d
    try:
        cov_free = np.linalg.pinv(js.T @ js, rcond=1e-15, hermitian=True) / np.outer(d, d)
    except np.linalg.LinAlgError:
        cov_free = np.full((n_free, n_free), np.nan)
    if dof > 0:
        cov_free = cov_free * (best.cost / dof)
    else:
        cov_free = cov_free * 0.0
    cov = np.zeros((len(names), len(names)))
    idx = np.flatnonzero(free)
    cov[np.ix_(idx, idx)] = cov_free
    cov = 0.5 * (cov + cov.T)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    flags = set()
    for k, n in enumerate(names):
        if free[k] and (np.isclose(best.p[k], lower[k]) or np.isclose(best.p[k], upper[k])):
            flags.add(f"{n}_at_bound")
    return FitResult(
        model=model.name,
        params={n: float(v) for n, v in zip(names, best.p)},
        sigmas={n: float(s) for n, s in zip(names, sig)},
        covariance=cov,
        residual_norm=math.sqrt(best.cost),
        converged=best.converged,
        iterations=best.iterations,
        flags=frozenset(flags),
        n_points=len(x),
    )


def _with_flags(result: FitResult, *flags: str) -> FitResult:
    return FitResult(**{**result.__dict__, "flags": result.flags | set(flags)})


def dominant_frequency(x, y) -> float:
    """Frequency (cycles per unit x) of the strongest oscillation in ``y``.

    A direct periodogram on a dense grid, so uneven sampling is fine.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float) - np.mean(y)
    span = x.max() - x.min()
    if span <= 0:
        return 0.0
    dx = np.median(np.diff(np.sort(x)))
    fmax = 0.5 / dx if dx > 0 else 1.0 / span
    freqs = np.linspace(0.25 / span, fmax, max(512, 16 * len(x)))
    phase = TWO_PI * np.outer(freqs, x)
    power = np.abs(np.exp(-1j * phase) @ y) ** 2
    return float(freqs[np.argmax(power)])


def _nyquist(x) -> float:
    dx = np.median(np.diff(np.sort(np.asarray(x, dtype=float))))
    return 0.5 / dx if dx > 0 else np.inf


def _is_flat(y) -> bool:
    y = np.asarray(y, dtype=float)
    return np.ptp(y) <= 1e-12 * max(1.0, np.max(np.abs(y)))


PHASE_STARTS = np.linspace(-np.pi, np.pi, 8, endpoint=False)


def _wrap(phase: float) -> float:
    return float((phase + np.pi) % (2 * np.pi) - np.pi)


def _finish_oscillation(result: FitResult, amp: str, phase: str, decay: str | None) -> FitResult:
    params = dict(result.params)
    params[phase] = _wrap(params[phase])
    out = FitResult(**{**result.__dict__, "params": params})
    flags = []
    a, sa = params[amp], result.sigmas[amp]
    if abs(a) <= 1e-10 or (np.isfinite(sa) and abs(a) < 2.0 * sa):
        flags.append("amplitude_zero")
        if decay:
            flags.append(f"{decay}_unidentifiable")
    return _with_flags(out, *flags) if flags else out


def fit_damped_cosine(t, y, sigma=None, envelope: str = "exp", frequency: float | None = None) -> FitResult:
    """``y = offset + A env(t/tau) cos(2 pi f t + phase)``.

    ``envelope`` is ``"exp"`` (``e^{-t/tau}``) or ``"gauss"``
    (``e^{-(t/tau)^2}``). A known fringe ``frequency`` is used as a start
    value instead of the periodogram estimate.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 8:
        raise FitError("damped cosine fit needs at least 8 points")
    model = DAMPED_COSINE if envelope == "exp" else DAMPED_COSINE_GAUSS
    span = np.ptp(t)
    offset = float(np.mean(y))
    if _is_flat(y):
        res = fit_curve(model, t, y, [[0.0, offset, 1.0 / span, 0.0, span]], sigma,
                        bounds={"tau": (1e-12 * span, np.inf)})
        return _with_flags(res, "degenerate", "amplitude_zero", "tau_unidentifiable")
    f0 = frequency if frequency is not None else dominant_frequency(t, y)
    a0 = 0.5 * np.ptp(y)
    starts = [
        [a0, offset, f0, ph, tau]
        for ph in PHASE_STARTS
        for tau in (0.3 * span, span, 3.0 * span)
    ]
    res = fit_curve(model, t, y, starts, sigma,
                    bounds={"A": (0.0, np.inf), "tau": (1e-6 * span, 1e6 * span), "frequency": (0.0, _nyquist(t))})
    return _finish_oscillation(res, "A", "phase", "tau")


def fit_cosine(t, y, sigma=None, frequency: float | None = None) -> FitResult:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 5:
        raise FitError("cosine fit needs at least 5 points")
    f0 = frequency if frequency is not None else dominant_frequency(t, y)
    starts = [[0.5 * np.ptp(y), float(np.mean(y)), f0, ph] for ph in PHASE_STARTS]
    res = fit_curve(COSINE, t, y, starts, sigma, bounds={"A": (0.0, np.inf), "frequency": (0.0, _nyquist(t))})
    return _finish_oscillation(res, "A", "phase", None)


def _decay_starts(t, y, offset):
    span = np.ptp(t)
    order = np.argsort(t)
    c0 = offset if offset is not None else float(y[order[-1]])
    a0 = float(y[order[0]] - c0) or float(np.ptp(y)) or 1.0
    starts = [[a0, tau, c0] for tau in (0.1 * span, 0.3 * span, span, 3.0 * span)]
    # growing data only reach a minimum through negative tau
    return starts + [[a0, -tau, c0] for tau in (span, 3.0 * span)]


def fit_exponential_decay(t, y, sigma=None, offset_fixed: float | None = None) -> FitResult:
    """``y = offset + A exp(-t/tau)``; ``offset_fixed`` freezes the offset
    (0 for decays to nothing, 0.5 for echo contrast curves)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 4:
        raise FitError("exponential fit needs at least 4 points")
    fixed = {"offset": offset_fixed} if offset_fixed is not None else None
    res = fit_curve(EXPONENTIAL, t, y, _decay_starts(t, y, offset_fixed), sigma, fixed=fixed)
    if res.params["tau"] < 0:
        res = _with_flags(res, "negative_tau")
    return res


def fit_gaussian_decay(t, y, sigma=None, offset_fixed: float | None = None) -> FitResult:
    """``y = offset + A exp(-(t/tau_g)^2)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 4:
        raise FitError("gaussian fit needs at least 4 points")
    fixed = {"offset": offset_fixed} if offset_fixed is not None else None
    starts = _decay_starts(t, y, offset_fixed)
    res = fit_curve(GAUSSIAN_DECAY, t, y, starts, sigma, fixed=fixed,
                    bounds={"tau_g": (1e-9 * np.ptp(t), np.inf)})
    return res


def _kuhr_linear_start(t, y, dp, ts):
    # with delta' and T2* fixed the model is linear in (A cos phi, A sin phi, B)
    arg = dp * t + kuhr_kappa(t, ts)
    env = kuhr_alpha(t, ts)
    design = np.column_stack([env * np.cos(arg), -env * np.sin(arg), np.ones_like(t)])
    (c, s, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    return [math.hypot(c, s), b, dp, math.atan2(s, c), ts]


def fit_ramsey_kuhr(t, y, sigma=None, delta_prime: float | None = None) -> FitResult:
    """Ramsey fringe with the thermal (Kuhr) envelope and phase drag.

    ``delta_prime`` (rad per unit t) seeds the fringe frequency when known.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 12:
        raise FitError("Kuhr Ramsey fit needs at least 12 points")
    span = np.ptp(t)
    dp0 = delta_prime if delta_prime is not None else TWO_PI * dominant_frequency(t, y)
    # the phase drag is odd in t, so the fringe sign is observable
    starts = [
        _kuhr_linear_start(t, y, sign * dp0, ts)
        for sign in (1.0, -1.0)
        for ts in (0.25 * span, 0.5 * span, span, 2.0 * span)
    ]
    lo, hi = 1e-3 * span, 1e3 * span
    w_max = TWO_PI * _nyquist(t)
    res = fit_curve(RAMSEY_KUHR, t, y, starts, sigma,
                    bounds={"A": (0.0, np.inf), "t2_star": (lo, hi), "delta_prime": (-w_max, w_max)})
    res = _finish_oscillation(res, "A", "phi", "t2_star")
    ts = res.params["t2_star"]
    if np.isclose(ts, lo) or np.isclose(ts, hi):
        res = _with_flags(res, "t2_star_at_bound")
    return res


def fit_pi_train(n, y, sigma=None, p1d: float | None = None) -> FitResult:
    """Fit ``P = p1d - prd * pre**n``; ``p1d`` may be frozen at a measured value."""
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(n) < 3:
        raise FitError("pi-train fit needs at least 3 points")
    fixed = {"p1d": p1d} if p1d is not None else None
    c0 = p1d if p1d is not None else float(np.max(y))
    starts = [[c0, c0 - float(np.min(y)), pre] for pre in (0.9, 0.97, 0.99, 0.999)]
    return fit_curve(PI_TRAIN, n, y, starts, sigma, fixed=fixed,
                     bounds={"prd": (0.0, 1.0), "pre": (0.0, 1.0), "p1d": (0.0, 1.0)})


@dataclass(frozen=True)
class LinearFit:
    coefficients: dict[str, float]
    sigmas: dict[str, float]
    r_squared: float
    residual_norm: float

    def __getitem__(self, name):
        return self.coefficients[name]


def _linear_lstsq(design: np.ndarray, y: np.ndarray, names: Sequence[str], sigma=None) -> LinearFit:
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    a = design * w[:, None]
    coef, *_ = np.linalg.lstsq(a, y * w, rcond=None)
    resid = y - design @ coef
    ss_res = float(np.sum((resid * w) ** 2))
    dof = len(y) - len(coef)
    # normalise columns so wildly different scales (x^2 vs 1) stay invertible
    d = np.linalg.norm(a, axis=0)
    d[d == 0] = 1.0
    an = a / d
    cov = np.linalg.pinv(an.T @ an) / np.outer(d, d)
    if dof > 0:
        cov = cov * ss_res / dof
    else:
        cov = cov * 0.0
    ss_tot = float(np.sum(((y - np.average(y, weights=w**2)) * w) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(
        {n: float(c) for n, c in zip(names, coef)},
        {n: float(math.sqrt(max(v, 0.0))) for n, v in zip(names, np.diag(cov))},
        r2,
        math.sqrt(ss_res),
    )


def fit_parabola(x, y, sigma=None) -> LinearFit:
    """Closed-form least squares ``y = a x^2 + b x + c``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise FitError("parabola fit needs at least 3 points")
    return _linear_lstsq(np.column_stack([x**2, x, np.ones_like(x)]), y, ("a", "b", "c"), sigma)


def fit_line(x, y, sigma=None) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return _linear_lstsq(np.column_stack([x, np.ones_like(x)]), y, ("slope", "intercept"), sigma)


def fit_inverse_sqrt(x, y, sigma=None) -> LinearFit:
    """``y = c / sqrt(x)`` through the origin in ``1/sqrt(x)``.

    R^2 is reported against the mean of ``y`` as for any regression.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0):
        raise FitError("inverse-sqrt fit needs positive x")
    return _linear_lstsq((1.0 / np.sqrt(x))[:, None], y, ("c",), sigma)


@dataclass(frozen=True)
class Contrast:
    value: float
    sigma: float
    fallback: bool = False
    fit: FitResult | LinearFit | None = None


def extract_contrast(x, y, frequency: float | None = None, sigma=None) -> Contrast:
    """Fringe contrast ``A / offset`` of a plain cosine fit, clamped to [0, 1].

    With a known ``frequency`` the cosine is linear in its remaining
    parameters and is solved in closed form. When the fit fails, or the data
    are flat, the contrast falls back to ``(max - min) / (max + min)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 4:
        raise FitError("contrast extraction needs at least 4 points")

    def fallback():
        hi, lo = float(np.max(y)), float(np.min(y))
        value = (hi - lo) / (hi + lo) if hi + lo > 0 else 0.0
        return Contrast(float(np.clip(value, 0.0, 1.0)), float("nan"), True, None)

    if _is_flat(y):
        return fallback()
    try:
        if frequency is not None:
            w = TWO_PI * frequency
            lin = _linear_lstsq(
                np.column_stack([np.cos(w * x), np.sin(w * x), np.ones_like(x)]), y, ("a", "b", "c"), sigma
            )
            a, b, c = lin["a"], lin["b"], lin["c"]
            amp = math.hypot(a, b)
            # first-order propagation; a and b are uncorrelated for full periods
            s_amp = math.hypot(a * lin.sigmas["a"], b * lin.sigmas["b"]) / amp if amp > 0 else lin.sigmas["a"]
            s_c = lin.sigmas["c"]
            fit = lin
        else:
            res = fit_cosine(x, y, sigma)
            if not res.converged:
                return fallback()
            amp, c = res.params["A"], res.params["offset"]
            s_amp, s_c = res.sigmas["A"], res.sigmas["offset"]
            fit = res
    except (FitError, np.linalg.LinAlgError):
        return fallback()
    if c <= 0:
        return fallback()
    value = amp / c
    sig = abs(value) * math.hypot(s_amp / amp if amp else 0.0, s_c / c)
    return Contrast(float(np.clip(value, 0.0, 1.0)), float(sig), False, fit)


def stderr_weights(stderr, floor_fraction: float = 0.1):
    """Turn ensemble standard errors into fit uncertainties.

    Points where every shot agrees (e.g. before any evolution) have a
    vanishing standard error and would otherwise dominate a weighted fit;
    errors are floored at ``floor_fraction`` of the median positive error.
    Returns ``None`` (unweighted fit) when no error is positive.
    """
    s = np.asarray(stderr, dtype=float)
    pos = s[s > 0]
    if pos.size == 0:
        return None
    return np.maximum(s, floor_fraction * float(np.median(pos)))
