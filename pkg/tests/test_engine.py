import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydcoh.atoms import generalized_rabi_excitation
from rydcoh.engine import (
    CollapseOperator,
    DensityMatrix,
    DimensionError,
    HamiltonianSegment,
    InvalidStateError,
    LevelBasis,
    NonHermitianError,
    QuantumState,
    evolve_density,
    evolve_state,
    lindblad_series,
    overlap_fidelity,
    populations,
)

TWO_PI = 2 * np.pi
GE = LevelBasis(("g", "e"))


def two_level_h(rabi, detuning=0.0):
    return np.array([[0, rabi / 2], [rabi / 2, -detuning]], dtype=complex)


def random_hermitian(rng, d, scale=1e6):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (a + a.conj().T) / 2


def random_state(rng, basis):
    v = rng.normal(size=basis.dimension) + 1j * rng.normal(size=basis.dimension)
    return QuantumState(basis, v / np.linalg.norm(v))


# -- basis and types


def test_level_basis_rules():
    assert GE.dimension == 2
    with pytest.raises(ValueError):
        LevelBasis(("a", "a"))
    with pytest.raises(ValueError):
        LevelBasis(tuple(str(i) for i in range(17)))
    assert LevelBasis(tuple(str(i) for i in range(16))).dimension == 16


def test_non_hermitian_segment_rejected():
    with pytest.raises(NonHermitianError):
        HamiltonianSegment(np.array([[0, 1], [0, 0]], dtype=complex), 1e-6)


def test_dimension_mismatch():
    seg = HamiltonianSegment(np.zeros((3, 3)), 1e-6)
    with pytest.raises(DimensionError):
        evolve_state(GE.ket("g"), [seg])
    with pytest.raises(DimensionError):
        overlap_fidelity(GE.ket("g"), LevelBasis(("a", "b", "c")).ket("a"))


def test_invalid_density_rejected():
    with pytest.raises(InvalidStateError):
        DensityMatrix(GE, np.diag([1.5, -0.5])).validate()


# -- closed-form evolutions


def test_resonant_pi_pulse_transfers():
    seg = HamiltonianSegment(two_level_h(TWO_PI * 1e6), 0.5e-6)
    out = evolve_state(GE.ket("g"), [seg])
    np.testing.assert_allclose(populations(out), [0, 1], atol=1e-12)


def test_zero_duration_is_identity():
    psi = GE.ket("g")
    out = evolve_state(psi, [HamiltonianSegment(two_level_h(TWO_PI * 1e6), 0.0)])
    np.testing.assert_array_equal(out.amplitudes, psi.amplitudes)


def test_detuned_rabi_value():
    seg = HamiltonianSegment(two_level_h(TWO_PI * 1e6, TWO_PI * 1e6), 0.5e-6)
    pe = populations(evolve_state(GE.ket("g"), [seg]))[1]
    assert pe == pytest.approx(generalized_rabi_excitation(TWO_PI * 1e6, TWO_PI * 1e6, 0.5e-6), abs=1e-12)
    assert pe == pytest.approx(0.316, abs=1e-3)


def test_detuned_rabi_oracle_grid():
    rng = np.random.default_rng(11)
    for _ in range(100):
        rabi = TWO_PI * rng.uniform(0.01, 5.0) * 1e6
        det = TWO_PI * rng.uniform(-5.0, 5.0) * 1e6
        t = rng.uniform(0, 5e-6)
        pe = populations(evolve_state(GE.ket("g"), [HamiltonianSegment(two_level_h(rabi, det), t)]))[1]
        assert abs(pe - generalized_rabi_excitation(rabi, det, t)) < 1e-6


def test_exponential_decay():
    gamma = 1e5
    rho = DensityMatrix(GE, np.diag([0.0, 1.0]).astype(complex))
    seg = HamiltonianSegment(np.zeros((2, 2)), 1 / gamma)
    out = evolve_density(rho, [seg], [CollapseOperator.decay(GE, "g", "e", gamma)])
    assert populations(out)[1] == pytest.approx(np.exp(-1), abs=1e-12)


def test_unitary_limit_of_density_evolution():
    rng = np.random.default_rng(3)
    psi = random_state(rng, GE)
    segs = [HamiltonianSegment(random_hermitian(rng, 2), 0.7e-6), HamiltonianSegment(random_hermitian(rng, 2), 0.2e-6)]
    pure = evolve_state(psi, segs).to_density().elements
    mixed = evolve_density(psi.to_density(), segs).elements
    np.testing.assert_allclose(mixed, pure, atol=1e-8)


def test_lindblad_series_matches_stepwise():
    rng = np.random.default_rng(5)
    basis = LevelBasis(("a", "b", "c"))
    h = random_hermitian(rng, 3)
    c = CollapseOperator.decay(basis, "a", "c", 2e5)
    rho0 = random_state(rng, basis).to_density()
    times = np.array([0.0, 1e-6, 3e-6])
    series = lindblad_series(rho0.elements, h, [c.matrix], times)
    for t, r in zip(times, series):
        ref = evolve_density(rho0, [HamiltonianSegment(h, t)], [c]).elements
        np.testing.assert_allclose(r, ref, atol=1e-9)


def test_populations_and_overlap():
    np.testing.assert_allclose(populations(GE.ket("g")), [1, 0])
    plus = QuantumState(GE, np.array([1, 1]) / np.sqrt(2))
    np.testing.assert_allclose(populations(plus), [0.5, 0.5])
    gr = LevelBasis(("g", "r"))
    mixed = DensityMatrix(gr, np.diag([0.5, 0.5]).astype(complex))
    np.testing.assert_allclose(populations(mixed), [0.5, 0.5])
    assert overlap_fidelity(plus, plus) == pytest.approx(1.0)
    assert overlap_fidelity(GE.ket("g"), GE.ket("e")) == 0.0
    assert overlap_fidelity(plus, GE.ket("g")) == pytest.approx(0.5)


# -- properties


dims = st.integers(min_value=2, max_value=16)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(d=dims, seed=seeds)
def test_unitarity(d, seed):
    rng = np.random.default_rng(seed)
    basis = LevelBasis(tuple(str(i) for i in range(d)))
    segs = [HamiltonianSegment(random_hermitian(rng, d), rng.uniform(0, 5e-6)) for _ in range(3)]
    out = evolve_state(random_state(rng, basis), segs)
    assert abs(out.norm_squared - 1) < 1e-9


@settings(max_examples=25, deadline=None)
@given(d=st.integers(min_value=2, max_value=6), seed=seeds)
def test_trace_and_hermiticity_preserved(d, seed):
    rng = np.random.default_rng(seed)
    basis = LevelBasis(tuple(str(i) for i in range(d)))
    jumps = [CollapseOperator(rng.normal(size=(d, d)) * 300.0) for _ in range(2)]
    segs = [HamiltonianSegment(random_hermitian(rng, d), rng.uniform(0, 5e-6)) for _ in range(2)]
    out = evolve_density(random_state(rng, basis).to_density(), segs, jumps).elements
    assert abs(np.trace(out) - 1) < 1e-9
    assert np.max(np.abs(out - out.conj().T)) < 1e-12
    assert np.linalg.eigvalsh(out).min() > -1e-9


@settings(max_examples=30, deadline=None)
@given(d=st.integers(min_value=2, max_value=8), seed=seeds)
def test_composition(d, seed):
    rng = np.random.default_rng(seed)
    basis = LevelBasis(tuple(str(i) for i in range(d)))
    h = random_hermitian(rng, d)
    t1, t2 = rng.uniform(0, 3e-6, size=2)
    psi = random_state(rng, basis)
    whole = evolve_state(psi, [HamiltonianSegment(h, t1 + t2)])
    split = evolve_state(evolve_state(psi, [HamiltonianSegment(h, t1)]), [HamiltonianSegment(h, t2)])
    np.testing.assert_allclose(whole.amplitudes, split.amplitudes, atol=1e-9)


def test_substep_refinement_converged():
    # splitting every segment into 2^k equal pieces must not move any amplitude
    rng = np.random.default_rng(8)
    basis = LevelBasis(("a", "b", "c", "d"))
    segs = [HamiltonianSegment(random_hermitian(rng, 4), 2e-6) for _ in range(3)]
    psi = random_state(rng, basis)
    ref = evolve_state(psi, segs).amplitudes
    for k in (1, 2, 4):
        fine = [HamiltonianSegment(s.matrix, s.duration / 2**k) for s in segs for _ in range(2**k)]
        np.testing.assert_allclose(evolve_state(psi, fine).amplitudes, ref, atol=1e-9)
