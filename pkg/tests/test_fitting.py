import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydcoh.analysis import (
    MODELS,
    FitError,
    extract_contrast,
    fit_cosine,
    fit_damped_cosine,
    fit_exponential_decay,
    fit_gaussian_decay,
    fit_line,
    fit_parabola,
    fit_pi_train,
    fit_ramsey_kuhr,
    kuhr_alpha,
    kuhr_kappa,
    stderr_weights,
)
from rydcoh.analysis.fitting import dominant_frequency

TWO_PI = 2 * np.pi

# (fitter, x grid, true parameters in model order, phase-like parameter)
CASES = {
    "damped_cosine": (
        fit_damped_cosine,
        np.linspace(0, 20e-6, 81),
        [0.4, 0.5, 0.3e6, 0.7, 10e-6],
        "phase",
    ),
    "damped_cosine_gauss": (
        lambda t, y, sigma=None: fit_damped_cosine(t, y, sigma, envelope="gauss"),
        np.linspace(0, 20e-6, 81),
        [0.4, 0.5, 0.3e6, -2.0, 12e-6],
        "phase",
    ),
    "cosine": (fit_cosine, np.linspace(0, 3, 60), [0.45, 0.5, 2.0, -1.0], "phase"),
    "exponential": (fit_exponential_decay, np.linspace(0, 300e-6, 31), [0.9, 171e-6, 0.05], None),
    "gaussian_decay": (fit_gaussian_decay, np.linspace(0, 30e-6, 26), [1.0, 12.6e-6, 0.02], None),
    "ramsey_kuhr": (
        fit_ramsey_kuhr,
        np.linspace(0, 20e-3, 81),
        [0.5, 0.5, TWO_PI * 300, 0.3, 7.2e-3],
        "phi",
    ),
    "pi_train": (fit_pi_train, np.arange(1.0, 62.0, 4.0), [0.972, 0.887, 0.984], None),
}


def _deviation(name, fitted, true, phase):
    d = fitted - true
    if name == phase:
        d = (d + np.pi) % TWO_PI - np.pi
    return d


@pytest.mark.parametrize("name", sorted(CASES))
def test_exact_recovery(name):
    fitter, x, p, _ = CASES[name]
    model = MODELS[name]
    res = fitter(x, model(x, p))
    assert res.converged
    np.testing.assert_allclose([res.params[n] for n in model.params], p, rtol=1e-8, atol=1e-12)
    assert res.residual_norm < 1e-8


@pytest.mark.parametrize("name", sorted(CASES))
def test_noisy_coverage(name):
    # 1% additive noise: each true parameter inside 3 sigma in >= 95% of trials
    fitter, x, p, phase = CASES[name]
    model = MODELS[name]
    clean = model(x, p)
    rng = np.random.default_rng(100)
    hits = np.zeros(len(p))
    trials = 200
    for _ in range(trials):
        res = fitter(x, clean + rng.normal(0, 0.01, x.size))
        for k, n in enumerate(model.params):
            hits[k] += abs(_deviation(n, res.params[n], p[k], phase)) <= 3 * res.sigmas[n]
    assert np.all(hits / trials >= 0.95), dict(zip(model.params, hits / trials))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), name=st.sampled_from(sorted(CASES)))
def test_jacobian_matches_central_differences(seed, name):
    _, x, p, _ = CASES[name]
    model = MODELS[name]
    rng = np.random.default_rng(seed)
    q = np.array(p) * rng.uniform(0.8, 1.2, len(p))
    jac = model.jac(x, q)
    for k in range(len(q)):
        h = 1e-6 * max(abs(q[k]), 1e-3)
        up, down = q.copy(), q.copy()
        up[k] += h
        down[k] -= h
        fd = (model(x, up) - model(x, down)) / (2 * h)
        scale = max(np.max(np.abs(fd)), 1e-12)
        assert np.max(np.abs(jac[:, k] - fd)) <= 1e-5 * scale


def test_fit_result_invariants():
    fitter, x, p, _ = CASES["damped_cosine"]
    y = MODELS["damped_cosine"](x, p) + np.random.default_rng(0).normal(0, 0.01, x.size)
    res = fitter(x, y)
    assert all(s >= 0 for s in res.sigmas.values())
    np.testing.assert_allclose(res.covariance, res.covariance.T)
    assert np.linalg.eigvalsh(res.covariance).min() >= -1e-12 * np.abs(res.covariance).max()
    assert res.iterations <= 500
    assert res.reduced_chi2 == pytest.approx(1e-4, rel=0.3)


def test_damped_cosine_tau_recovery():
    t = np.linspace(0, 30e-6, 91)
    y = 0.5 + 0.4 * np.exp(-t / 10e-6) * np.cos(TWO_PI * 0.4e6 * t)
    y += np.random.default_rng(1).normal(0, 0.01, t.size)
    assert fit_damped_cosine(t, y).params["tau"] == pytest.approx(10e-6, rel=0.05)


def test_damped_cosine_flat_data_flagged():
    t = np.linspace(0, 10e-6, 40)
    res = fit_damped_cosine(t, np.full(t.size, 0.3))
    assert res.converged
    assert res.params["A"] == pytest.approx(0.0, abs=1e-10)
    assert {"tau_unidentifiable", "amplitude_zero"} <= res.flags


def test_too_few_points():
    with pytest.raises(FitError):
        fit_damped_cosine(np.arange(5.0), np.arange(5.0))
    with pytest.raises(FitError):
        fit_ramsey_kuhr(np.arange(10.0), np.arange(10.0))
    with pytest.raises(FitError):
        fit_exponential_decay([0, 1], [1, 0.5], sigma=[0.1, 0.0])


def test_exponential_fixed_offset_and_negative_tau():
    t = np.linspace(0, 50e-6, 20)
    res = fit_exponential_decay(t, 0.5 + 0.5 * np.exp(-t / 20e-6), offset_fixed=0.5)
    assert res.params["offset"] == 0.5
    assert res.sigmas["offset"] == 0.0
    assert res.params["tau"] == pytest.approx(20e-6, rel=1e-10)
    grow = fit_exponential_decay(t, np.exp(t / 30e-6), offset_fixed=0.0)
    assert "negative_tau" in grow.flags


def test_kuhr_envelope_values():
    assert kuhr_alpha(7.2e-3, 7.2e-3) == pytest.approx(1.95**-1.5)
    assert kuhr_alpha(7.2e-3, 7.2e-3) == pytest.approx(0.367, abs=1e-3)
    assert kuhr_kappa(0.0, 7.2e-3) == 0.0
    t = np.linspace(0, 1e-3, 30)
    kuhr = MODELS["ramsey_kuhr"](t, [0.4, 0.5, 2000.0, 0.2, 1e6])
    np.testing.assert_allclose(kuhr, 0.5 + 0.4 * np.cos(2000.0 * t + 0.2), atol=1e-9)


def test_kuhr_recovery_from_noisy_fringe():
    t = np.linspace(0, 20e-3, 81)
    truth = [0.5, 0.5, TWO_PI * 300, 0.0, 7.2e-3]
    y = MODELS["ramsey_kuhr"](t, truth) + np.random.default_rng(2).normal(0, 0.02, t.size)
    res = fit_ramsey_kuhr(t, y)
    assert res.params["t2_star"] == pytest.approx(7.2e-3, rel=0.08)
    assert res.params["delta_prime"] == pytest.approx(TWO_PI * 300, rel=0.02)


def test_gaussian_vs_exponential_model_selection():
    t = np.linspace(0, 60e-6, 30)
    y = 0.9 * np.exp(-t / 15e-6)
    assert fit_exponential_decay(t, y).residual_norm < fit_gaussian_decay(t, y).residual_norm


def test_pi_train_frozen_p1d():
    n = np.arange(1.0, 62.0, 4.0)
    y = MODELS["pi_train"](n, [0.972, 0.887, 0.984])
    res = fit_pi_train(n, y, p1d=0.972)
    assert res.params["p1d"] == 0.972
    assert res.params["pre"] == pytest.approx(0.984, rel=1e-9)


def test_parabola_and_line():
    x = np.linspace(-3, 3, 11)
    par = fit_parabola(x, 2 * x**2 - 0.5 * x + 1)
    assert par["a"] == pytest.approx(2.0, abs=1e-12)
    assert par["b"] == pytest.approx(-0.5, abs=1e-12)
    assert par["c"] == pytest.approx(1.0, abs=1e-12)
    assert par.r_squared == pytest.approx(1.0)
    three = fit_parabola([0.0, 1.0, 2.0], [1.0, 0.0, 3.0])
    np.testing.assert_allclose([three["a"], three["b"], three["c"]], [2.0, -3.0, 1.0], atol=1e-12)
    line = fit_line(x, 3 * x + 2)
    assert line["slope"] == pytest.approx(3.0)
    assert line["intercept"] == pytest.approx(2.0)
    with pytest.raises(FitError):
        fit_parabola([0.0, 1.0], [0.0, 1.0])


def test_extract_contrast():
    x = np.linspace(0, 2, 41)
    full = extract_contrast(x, 0.5 + 0.5 * np.cos(TWO_PI * x))
    assert full.value == pytest.approx(1.0, abs=1e-9)
    assert not full.fallback
    known = extract_contrast(x, 0.5 + 0.2 * np.cos(TWO_PI * 1.5 * x + 1.0), frequency=1.5)
    assert known.value == pytest.approx(0.4, abs=1e-12)
    flat = extract_contrast(x, np.full(x.size, 0.4))
    assert flat.fallback
    assert flat.value == 0.0


def test_dominant_frequency_and_weights():
    t = np.linspace(0, 10e-6, 101)
    assert dominant_frequency(t, np.cos(TWO_PI * 1.2e6 * t)) == pytest.approx(1.2e6, rel=0.02)
    w = stderr_weights([0.0, 0.02, 0.04, 0.03])
    assert w[0] == pytest.approx(0.003)
    assert stderr_weights([0.0, 0.0]) is None
