"""Acceptance criteria 1-9, one test each.

Every test records a one-line verdict that is printed in the terminal
summary (see conftest.py), then asserts it.
"""

import time

import numpy as np

from conftest import record
from rydcoh.analysis import (
    MODELS,
    combine_coherence,
    combine_lifetimes,
    extract_coherence,
    fit_damped_cosine,
    fit_parabola,
    fit_pi_train,
    fit_ramsey_kuhr,
    estimate_t2_doppler,
    estimate_t2_ground,
    stderr_weights,
)
from rydcoh.atoms import AtomPhysicalParams, DriveParams, generalized_rabi_excitation, reduce_two_photon
from rydcoh.constants import RB87_MASS, TWO_PI
from rydcoh.engine import (
    CollapseOperator,
    HamiltonianSegment,
    LevelBasis,
    QuantumState,
    evolve_density,
    evolve_state,
    populations,
)
from rydcoh.experiments import (
    run_control_fringe,
    run_cz_detuning_scan,
    run_cz_temperature_sweep,
    run_gr_ramsey,
    run_pi_train,
    run_rabi_scan,
    run_scan,
    run_spin_echo,
)
from rydcoh.experiments.gates import cz_unitary, evaluate_gate
from rydcoh.noise import doppler_sigma, run_ensemble
from rydcoh.experiments import build_experiment
from rydcoh.presets import load_preset

US = 1e-6
K_EFF = AtomPhysicalParams().k_eff


def _within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


def _timed(fn):
    t0 = time.perf_counter()
    value = fn()
    return value, time.perf_counter() - t0


def test_criterion_1_closed_forms():
    checks = []
    t2g, dt1 = _timed(lambda: estimate_t2_ground(5.2e-6, 3.85e-4))
    checks.append(("T2gg", _within(t2g, 7.4e-3, 0.01) and dt1 < 1, f"{t2g * 1e3:.3f} ms"))
    sig, dt2 = _timed(lambda: doppler_sigma(5.2e-6, K_EFF, RB87_MASS))
    checks.append(("sigma", _within(sig, TWO_PI * 17.9e3, 0.02) and dt2 < 1, f"2pi*{sig / TWO_PI / 1e3:.2f} kHz"))
    t2d, dt3 = _timed(lambda: estimate_t2_doppler(5.2e-6, K_EFF, RB87_MASS))
    checks.append(("T2D", _within(t2d, 12.6 * US, 0.02) and dt3 < 1, f"{t2d / US:.2f} us"))
    t1, dt4 = _timed(lambda: combine_lifetimes([209 * US, 940 * US]))
    checks.append(("T1", _within(t1, 170.9 * US, 0.005) and dt4 < 1, f"{t1 / US:.2f} us"))
    red = DriveParams(TWO_PI * 215e6, -TWO_PI * 5.7e9)
    om, dt5 = _timed(lambda: reduce_two_photon(red, DriveParams(TWO_PI * 62e6), red.detuning).effective_rabi)
    ok_om = _within(om, TWO_PI * 1.169e6, 0.001) and _within(om, TWO_PI * 1.188e6, 0.02) and dt5 < 1
    checks.append(("Omega0", ok_om, f"2pi*{om / TWO_PI / 1e6:.4f} MHz"))
    ok = all(c[1] for c in checks)
    assert record(1, ok, "; ".join(f"{n}={d}" for n, _, d in checks)), checks


def test_criterion_2_coherence_algebra():
    _, t2p = extract_coherence(10 * US, 57 * US, 122 * US)
    tau = combine_coherence(12.7 * US, 74 * US, 122 * US)
    s, p = extract_coherence(tau, 1 / (1 / (74 * US) + 1 / (244 * US)), 122 * US)
    residual = abs(combine_coherence(s, p, 122 * US) - tau) / tau
    ok = _within(t2p, 74.4 * US, 0.01) and _within(tau, 10.38 * US, 0.001) and 9.1 * US <= tau <= 10.9 * US
    ok = ok and residual < 1e-9
    detail = f"T2'={t2p / US:.2f} us, tau_gr={tau / US:.3f} us, round-trip residual={residual:.1e}"
    assert record(2, ok, detail), detail


def test_criterion_3_four_level_rabi():
    res = run_rabi_scan(load_preset("fig3a"), n_shots=500, seed=0)
    fit = fit_damped_cosine(res.scan_values, res.mean_observable)
    tau, amp = fit.params["tau"], fit.params["A"]
    ok = 10 * US <= tau <= 19 * US and 0.38 <= amp <= 0.50
    detail = f"tau={tau / US:.2f} us (10-19), contrast={amp:.3f} (0.38-0.50)"
    assert record(3, ok, detail), detail


def _fig4a_tau(seed=0, shots=500):
    res = run_gr_ramsey(load_preset("fig4a"), n_shots=shots, seed=seed)
    return fit_damped_cosine(res.scan_values, res.mean_observable).params["tau"]


def test_criterion_4_ramsey_and_echo():
    doppler = load_preset("fig4a").replace(
        noise={"temperature": 20e-6, "rabi": False, "t1": (), "t2_prime": None},
        detection=None,
        sequence={"readout": "contrast"},
        scan={"values": (20e-6,)},
    )
    ramsey = run_scan(doppler, n_shots=300, seed=0).mean_observable[0]
    echo = run_spin_echo(doppler.replace(kind="SpinEcho"), n_shots=300, seed=0).mean_observable[0]
    tau = _fig4a_tau()
    ok = echo >= 0.99 and ramsey < 0.3 and 9.1 * US <= tau <= 10.9 * US
    detail = f"echo={echo:.4f}, ramsey={ramsey:.4f} at 20 us; tau_gr={tau / US:.2f} us (9.1-10.9)"
    assert record(4, ok, detail), detail


def test_criterion_5_control_equivalence():
    fringe = run_control_fringe(load_preset("fig5"), n_shots=300, seed=0)
    t_cont = fringe.fit_decay().params["tau"]
    tau = _fig4a_tau()
    ok = _within(t_cont, tau, 0.15)
    detail = f"T_cont={t_cont / US:.2f} us, tau_gr={tau / US:.2f} us, diff={abs(t_cont / tau - 1):.1%} (<15%)"
    assert record(5, ok, detail), detail


def test_criterion_6_detuning_parabola():
    res = run_cz_detuning_scan(load_preset("fig6"))
    x, e = res.scan_values, res.mean_observable
    fit = fit_parabola(x, e)
    edge = np.max(np.abs(x))
    linear, quadratic = abs(fit["b"]) * edge, abs(fit["a"]) * edge**2
    e0 = float(e[np.argmin(np.abs(x))])
    ok = linear < 0.05 * quadratic and e0 < 1e-4
    detail = f"|b x|/(a x^2)={linear / quadratic:.1e} (<0.05), E(0)={e0:.2e} (<1e-4)"
    assert record(6, ok, detail), detail


def test_criterion_7_error_law():
    sweep = run_cz_temperature_sweep(load_preset("fig7"), n_shots=1000, seed=0)
    law = sweep.error_law()
    r2_t2, r2_e = sweep.t2_fit().r_squared, sweep.error_fit().r_squared
    ok = _within(law.coefficient, 0.836, 0.25) and r2_t2 > 0.99 and r2_e > 0.98
    detail = f"coefficient={law.coefficient:.3f} (0.836+-25%), R2(T2*)={r2_t2:.4f}, R2(E)={r2_e:.4f}"
    assert record(7, ok, detail), detail


def _property_checks():
    rng = np.random.default_rng(8)
    out = {}

    worst = 0.0
    for d in (2, 3, 9, 16):
        basis = LevelBasis(tuple(str(i) for i in range(d)))
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        h = 1e6 * (a + a.conj().T)
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        psi = QuantumState(basis, v / np.linalg.norm(v))
        worst = max(worst, abs(evolve_state(psi, [HamiltonianSegment(h, 3e-6)]).norm_squared - 1))
        jump = CollapseOperator(rng.normal(size=(d, d)) * 300.0)
        rho = evolve_density(psi.to_density(), [HamiltonianSegment(h, 3e-6)], [jump]).elements
        worst = max(worst, abs(np.trace(rho) - 1))
    out["unitarity/trace"] = worst < 1e-9

    ge = LevelBasis(("g", "e"))
    dev = 0.0
    for _ in range(100):
        rabi, det = TWO_PI * rng.uniform(0.01, 5) * 1e6, TWO_PI * rng.uniform(-5, 5) * 1e6
        t = rng.uniform(0, 5e-6)
        h = np.array([[0, rabi / 2], [rabi / 2, -det]], dtype=complex)
        pe = populations(evolve_state(ge.ket("g"), [HamiltonianSegment(h, t)]))[1]
        dev = max(dev, abs(pe - generalized_rabi_excitation(rabi, det, t)))
    out["rabi oracle"] = dev < 1e-6

    out["perfect blockade"] = evaluate_gate(cz_unitary(TWO_PI * 1e6, TWO_PI * 10e9)).fidelity >= 1 - 1e-6

    t = np.linspace(0, 30e-6, 91)
    y = 0.5 + 0.4 * np.exp(-t / 10e-6) * np.cos(TWO_PI * 0.4e6 * t) + rng.normal(0, 0.01, t.size)
    ok_dc = _within(fit_damped_cosine(t, y).params["tau"], 10e-6, 0.05)
    tk = np.linspace(0, 20e-3, 81)
    yk = MODELS["ramsey_kuhr"](tk, [0.5, 0.5, TWO_PI * 300, 0.0, 7.2e-3]) + rng.normal(0, 0.01, tk.size)
    ok_k = _within(fit_ramsey_kuhr(tk, yk).params["t2_star"], 7.2e-3, 0.08)
    out["inject-recover"] = ok_dc and ok_k

    jac_ok = True
    grids = {
        "damped_cosine": (t, [0.4, 0.5, 0.4e6, 0.3, 10e-6]),
        "ramsey_kuhr": (tk, [0.5, 0.5, TWO_PI * 300, 0.3, 7.2e-3]),
        "exponential": (t, [0.9, 10e-6, 0.1]),
        "gaussian_decay": (t, [0.9, 10e-6, 0.1]),
        "pi_train": (np.arange(1.0, 62.0, 4.0), [0.972, 0.887, 0.984]),
    }
    for name, (x, p) in grids.items():
        m = MODELS[name]
        q = np.array(p) * rng.uniform(0.9, 1.1, len(p))
        jac = m.jac(x, q)
        for k in range(len(q)):
            h = 1e-6 * abs(q[k])
            up, dn = q.copy(), q.copy()
            up[k] += h
            dn[k] -= h
            fd = (m(x, up) - m(x, dn)) / (2 * h)
            jac_ok &= np.max(np.abs(jac[:, k] - fd)) <= 1e-5 * max(np.max(np.abs(fd)), 1e-12)
    out["jacobian"] = bool(jac_ok)

    exp = build_experiment(load_preset("fig4a"))
    a = run_ensemble(exp, 70, seed=5, workers=1)
    b = run_ensemble(exp, 70, seed=5, workers=2)
    out["determinism"] = (
        a.mean_observable.tobytes() == b.mean_observable.tobytes()
        and a.standard_error.tobytes() == b.standard_error.tobytes()
    )
    return out


def test_criterion_8_property_suites():
    t0 = time.perf_counter()
    checks = _property_checks()
    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < 60
    detail = ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items()) + f" ({elapsed:.1f} s)"
    assert record(8, ok, detail), detail


def test_criterion_9_pi_train():
    res = run_pi_train(load_preset("fig3b"), seed=0)
    fit = fit_pi_train(res.scan_values, res.mean_observable, sigma=stderr_weights(res.standard_error))
    d_prd = abs(fit.params["prd"] - 0.887) / fit.sigmas["prd"]
    d_pre = abs(fit.params["pre"] - 0.984) / fit.sigmas["pre"]
    ok = d_prd <= 1 and d_pre <= 1
    detail = (
        f"prd={fit.params['prd']:.4f}+-{fit.sigmas['prd']:.4f}, "
        f"pre={fit.params['pre']:.5f}+-{fit.sigmas['pre']:.5f} (within 1 sigma)"
    )
    assert record(9, ok, detail), detail
