import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydcoh.experiments import run_cz_detuning_scan
from rydcoh.experiments.gates import (
    CZ,
    GateOutcome,
    calibrate_phases,
    computational_map,
    cz_unitary,
    evaluate_gate,
    gate_fidelity,
    optimal_local_phases,
)
from rydcoh.presets import load_preset

TWO_PI = 2 * np.pi
RABI = TWO_PI * 1e6


@pytest.mark.parametrize("kind", ["average", "process"])
def test_perfect_blockade_is_cz(kind):
    out = evaluate_gate(cz_unitary(RABI, TWO_PI * 10e9), kind)
    assert out.fidelity >= 1 - 1e-6
    assert out.error == pytest.approx(1 - out.fidelity)


def test_ideal_map_is_cz_up_to_local_phases():
    m = computational_map(cz_unitary(RABI, TWO_PI * 1e12))
    np.testing.assert_allclose(np.abs(np.diag(m)), 1.0, atol=1e-6)
    tc, tt = optimal_local_phases(m)
    d = np.diag([1, np.exp(1j * tt), np.exp(1j * tc), np.exp(1j * (tc + tt))])
    corrected = d @ m
    corrected = corrected / corrected[0, 0]
    np.testing.assert_allclose(corrected, CZ, atol=1e-5)


def test_no_blockade_is_not_cz():
    u = cz_unitary(RABI, 0.0)
    process = evaluate_gate(u, "process")
    average = evaluate_gate(u, "average")
    # |11> picks up the same phase as |01>, |10>: a product of local Z gates
    assert process.error == pytest.approx(0.5, abs=1e-9)
    assert average.error == pytest.approx(0.4, abs=1e-9)
    np.testing.assert_allclose(process.leakage, 0.0, atol=1e-12)


def test_error_is_even_in_control_detuning():
    res = run_cz_detuning_scan(load_preset("fig6"))
    e, x = res.mean_observable, res.scan_values
    np.testing.assert_allclose(x, -x[::-1], atol=1e-6)
    pos, neg = e[x > 0], e[x < 0][::-1]
    assert np.all(np.abs(pos - neg) < 0.1 * pos)


def test_optimized_phases_beat_calibration_off_resonance():
    u = cz_unitary(RABI, TWO_PI * 1e9, TWO_PI * 80e3, 0.0)
    cal = evaluate_gate(u, phases=calibrate_phases(RABI, TWO_PI * 1e9))
    opt = evaluate_gate(u)
    assert opt.fidelity >= cal.fidelity - 1e-12


def test_fidelity_kinds():
    m = np.diag([1, 1, 1, -1]).astype(complex)
    assert gate_fidelity(m, (0.0, 0.0), "process") == pytest.approx(1.0)
    assert gate_fidelity(m, (0.0, 0.0), "average") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        gate_fidelity(m, (0.0, 0.0), "diamond")


def test_single_column_leakage_counterexample():
    # leakage confined to one input: F is near 1 - L/4, above 1 - max(L)
    leak = 0.2
    m = np.diag([1.0, 1.0, 1.0, -np.sqrt(1 - leak)]).astype(complex)
    out = GateOutcome(m, np.array([0, 0, 0, leak]), gate_fidelity(m, (0.0, 0.0), "process"), 0.0, (0.0, 0.0))
    assert out.fidelity > 1 - leak
    assert out.fidelity <= 1 - leak / 4 + 1e-12


@settings(max_examples=40, deadline=None)
@given(
    blockade=st.floats(0.0, 2e10),
    dc=st.floats(-TWO_PI * 2e6, TWO_PI * 2e6),
    dt=st.floats(-TWO_PI * 2e6, TWO_PI * 2e6),
    scale=st.floats(0.8, 1.2),
    kind=st.sampled_from(["average", "process"]),
)
def test_gate_outcome_invariants(blockade, dc, dt, scale, kind):
    out = evaluate_gate(cz_unitary(RABI, blockade, dc, dt, scale, scale), kind)
    assert np.all(out.leakage >= 0)
    assert 0.0 <= out.fidelity <= 1.0
    norms = np.sum(np.abs(out.final_map) ** 2, axis=0)
    np.testing.assert_allclose(norms, 1 - out.leakage, atol=1e-12)
    assert out.fidelity <= 1 - out.leakage.mean() + 1e-9
    assert out.error == pytest.approx(1 - out.fidelity)
