"""Dense state-vector and density-matrix propagation for small level systems.

Every Hamiltonian is piecewise constant, so each segment is propagated by
its exact exponential: ``U = V exp(-i w t) V^H`` from a Hermitian
eigendecomposition for pure states, and ``expm(L t)`` of the Lindblad
superoperator for density matrices. Splitting a segment into sub-steps
reproduces the same propagator to rounding error, so there is no
integration step size to converge.

Density matrices are vectorised row-major, ``vec(A rho B) = (A kron B^T) vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

MAX_DIMENSION = 16
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9


class DimensionError(ValueError):
    """Operands live in spaces of different dimension."""


class NonHermitianError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class LevelBasis:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ValueError("basis needs at least one level")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate level labels in {labels}")
        if len(labels) > MAX_DIMENSION:
            raise ValueError(f"dimension {len(labels)} exceeds {MAX_DIMENSION}")

    @property
    def dimension(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def ket(self, label: str) -> "QuantumState":
        amps = np.zeros(self.dimension, dtype=complex)
        amps[self.index(label)] = 1.0
        return QuantumState(self, amps)

    def projector(self, label: str) -> np.ndarray:
        p = np.zeros((self.dimension, self.dimension), dtype=complex)
        i = self.index(label)
        p[i, i] = 1.0
        return p

    def transition(self, to: str, frm: str) -> np.ndarray:
        """Matrix of ``|to><frm|``."""
        op = np.zeros((self.dimension, self.dimension), dtype=complex)
        op[self.index(to), self.index(frm)] = 1.0
        return op

    def tensor(self, other: "LevelBasis") -> "LevelBasis":
        return LevelBasis(tuple(a + b for a in self.labels for b in other.labels))


@dataclass(frozen=True)
class QuantumState:
    basis: LevelBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.basis.dimension:
            raise DimensionError(
                f"{amps.shape[0]} amplitudes for a {self.basis.dimension}-level basis"
            )
        object.__setattr__(self, "amplitudes", amps)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.basis, np.outer(self.amplitudes, self.amplitudes.conj()))

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class DensityMatrix:
    basis: LevelBasis
    elements: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.elements, dtype=complex)
        d = self.basis.dimension
        if rho.shape != (d, d):
            raise DimensionError(f"density matrix of shape {rho.shape} for dimension {d}")
        object.__setattr__(self, "elements", rho)

    def validate(self) -> None:
        """Raise :class:`InvalidStateError` unless Hermitian, unit trace, PSD."""
        rho = self.elements
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"density matrix trace {tr!r} != 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-9:
            raise InvalidStateError("density matrix has a negative eigenvalue")


@dataclass(frozen=True)
class HamiltonianSegment:
    """Constant Hamiltonian (rad/s) applied for ``duration`` seconds."""

    matrix: np.ndarray
    duration: float

    def __post_init__(self):
        h = np.asarray(self.matrix, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise DimensionError(f"Hamiltonian must be square, got {h.shape}")
        check_hermitian(h)
        if not self.duration >= 0:
            raise ValueError(f"segment duration must be >= 0, got {self.duration}")
        object.__setattr__(self, "matrix", h)
        object.__setattr__(self, "duration", float(self.duration))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class CollapseOperator:
    """Jump operator with entries in sqrt(rate) units."""

    matrix: np.ndarray
    description: str = field(default="")

    def __post_init__(self):
        c = np.asarray(self.matrix, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DimensionError(f"collapse operator must be square, got {c.shape}")
        if not np.any(c):
            raise ValueError(f"collapse operator {self.description!r} is identically zero")
        object.__setattr__(self, "matrix", c)

    @classmethod
    def decay(cls, basis: LevelBasis, to: str, frm: str, rate: float) -> "CollapseOperator":
        if rate < 0:
            raise ValueError(f"negative decay rate {rate} for {frm}->{to}")
        return cls(np.sqrt(rate) * basis.transition(to, frm), f"{frm}->{to} rate {rate:.6g}/s")


def check_hermitian(h: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
    if h.size and np.max(np.abs(h - h.conj().T)) > HERMITIAN_TOL * scale:
        raise NonHermitianError("Hamiltonian segment is not Hermitian")


def _check_dims(d: int, segments: Sequence[HamiltonianSegment], collapse=()) -> None:
    for k, seg in enumerate(segments):
        if seg.dimension != d:
            raise DimensionError(f"segment {k} has dimension {seg.dimension}, state has {d}")
    for c in collapse:
        if c.matrix.shape[0] != d:
            raise DimensionError(
                f"collapse operator {c.description!r} has dimension {c.matrix.shape[0]}, state has {d}"
            )


def unitary(h: np.ndarray, duration) -> np.ndarray:
    """``exp(-i H t)`` for Hermitian ``h``; broadcasts over leading axes of
    ``h`` and over an array of durations (appended as a leading axis)."""
    w, v = np.linalg.eigh(h)
    t = np.asarray(duration, dtype=float)
    if t.ndim == 0:
        phases = np.exp(-1j * w * t)
        return (v * phases[..., None, :]) @ v.conj().swapaxes(-1, -2)
    phases = np.exp(-1j * w[None, ...] * t.reshape((-1,) + (1,) * w.ndim))
    return (v[None, ...] * phases[..., None, :]) @ v.conj().swapaxes(-1, -2)[None, ...]


def segments_unitary(segments: Iterable[HamiltonianSegment], dimension: int) -> np.ndarray:
    u = np.eye(dimension, dtype=complex)
    for seg in segments:
        if seg.duration > 0:
            u = unitary(seg.matrix, seg.duration) @ u
    return u


def liouvillian(h: np.ndarray, collapse: Sequence[np.ndarray] = ()) -> np.ndarray:
    """Row-major Lindblad generator for ``H`` (broadcast over leading axes)
    and a list of jump matrices."""
    h = np.asarray(h, dtype=complex)
    d = h.shape[-1]
    eye = np.eye(d)
    gen = -1j * (_kron(h, eye) - _kron(eye, h.swapaxes(-1, -2)))
    for c in collapse:
        c = np.asarray(c, dtype=complex)
        cdc = c.conj().T @ c
        gen = gen + np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)
    return gen


def _kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # batched Kronecker product over leading axes
    a = np.asarray(a)
    b = np.asarray(b)
    lead = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    n = a.shape[-2] * b.shape[-2]
    return out.reshape(lead + (n, n))


def superoperator(h: np.ndarray, collapse: Sequence[np.ndarray], duration) -> np.ndarray:
    """Propagator ``expm(L t)`` acting on row-major ``vec(rho)``."""
    gen = liouvillian(h, collapse)
    t = np.asarray(duration, dtype=float)
    if t.ndim == 0:
        return expm(gen * t)
    return expm(gen[None, ...] * t.reshape((-1,) + (1,) * gen.ndim))


def evolve_state(state: QuantumState, segments: Sequence[HamiltonianSegment]) -> QuantumState:
    """Apply ``U_n ... U_1`` to ``state`` with ``U_k = exp(-i H_k t_k)``."""
    d = state.basis.dimension
    _check_dims(d, segments)
    psi = state.amplitudes
    for seg in segments:
        if seg.duration > 0:
            psi = unitary(seg.matrix, seg.duration) @ psi
    return QuantumState(state.basis, psi)


def evolve_density(
    rho: DensityMatrix,
    segments: Sequence[HamiltonianSegment],
    collapse: Sequence[CollapseOperator] = (),
) -> DensityMatrix:
    """Lindblad evolution through piecewise-constant segments.

    With no collapse operators the unitary route is used, which is both
    faster and exact.
    """
    d = rho.basis.dimension
    _check_dims(d, segments, collapse)
    rho.validate()
    r = rho.elements
    if not collapse:
        for seg in segments:
            if seg.duration > 0:
                u = unitary(seg.matrix, seg.duration)
                r = u @ r @ u.conj().T
    else:
        jumps = [c.matrix for c in collapse]
        vec = r.reshape(-1)
        for seg in segments:
            if seg.duration > 0:
                vec = superoperator(seg.matrix, jumps, seg.duration) @ vec
        r = vec.reshape(d, d)
    r = 0.5 * (r + r.conj().T)
    return DensityMatrix(rho.basis, r)


def lindblad_series(
    rho0: np.ndarray, h: np.ndarray, collapse: Sequence[np.ndarray], times: np.ndarray
) -> np.ndarray:
    """Density matrices ``rho(t)`` at many times under one constant generator.

    Diagonalises the Liouvillian once; callers needing robustness against
    defective generators should use :func:`superoperator` instead.
    """
    d = rho0.shape[0]
    gen = liouvillian(h, collapse)
    w, v = np.linalg.eig(gen)
    coeff = np.linalg.solve(v, rho0.reshape(-1))
    times = np.asarray(times, dtype=float)
    vecs = (v[None, :, :] * (coeff * np.exp(np.outer(times, w)))[:, None, :]).sum(axis=-1)
    return vecs.reshape(len(times), d, d)


def populations(state_or_rho) -> np.ndarray:
    if isinstance(state_or_rho, QuantumState):
        return np.abs(state_or_rho.amplitudes) ** 2
    if isinstance(state_or_rho, DensityMatrix):
        return np.clip(np.diagonal(state_or_rho.elements).real, 0.0, None)
    arr = np.asarray(state_or_rho)
    if arr.ndim == 1:
        return np.abs(arr) ** 2
    return np.clip(np.diagonal(arr, axis1=-2, axis2=-1).real, 0.0, None)


def overlap_fidelity(a: QuantumState, b: QuantumState) -> float:
    """``|<a|b>|^2``."""
    if a.basis.dimension != b.basis.dimension:
        raise DimensionError(
            f"cannot overlap {a.basis.dimension}- and {b.basis.dimension}-level states"
        )
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))
