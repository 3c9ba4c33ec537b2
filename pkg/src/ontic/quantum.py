"""Small finite-dimensional quantum mechanics.

Pure states, density operators, POVM effects and PVMs, the Born rule and
the qubit Bloch-vector correspondence.  Everything here is immutable and
dimension-checked; dimensions are expected to be small (N <= 8).

Convention: |0> is the +z Bloch vector, |+> = (|0> + |1>)/sqrt(2) is +x.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-12
PROJ_TOL = 1e-10
RAY_TOL = 1e-10
CLAMP_TOL = 1e-9

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class QuantumError(ValueError):
    """Invalid quantum object or incompatible arguments."""


class DimensionMismatch(QuantumError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector in C^N; equality compares rays, not vectors."""

    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.size < 2:
            raise QuantumError("pure state needs dimension >= 2")
        if abs(np.vdot(v, v).real - 1.0) > NORM_TOL:
            raise QuantumError(f"state not normalized: |v|^2 = {np.vdot(v, v).real!r}")
        object.__setattr__(self, "amplitudes", _frozen(v))

    @classmethod
    def from_vector(cls, v) -> "PureState":
        """Normalize ``v`` and wrap it."""
        v = np.asarray(v, dtype=complex).reshape(-1)
        n = np.linalg.norm(v)
        if n == 0:
            raise QuantumError("zero vector has no ray")
        return cls(v / n)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> np.ndarray:
        v = self.amplitudes
        return np.outer(v, v.conj())

    def density(self) -> "DensityOperator":
        return DensityOperator(self.projector())

    def overlap(self, other: "PureState") -> complex:
        _check_dims(self.dim, other.dim)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def same_ray(self, other: "PureState", tol: float = RAY_TOL) -> bool:
        return self.dim == other.dim and abs(self.overlap(other)) >= 1.0 - tol

    def __eq__(self, other):
        if not isinstance(other, PureState):
            return NotImplemented
        return self.same_ray(other)

    def __hash__(self):  # rays are not hashable in a tolerance-respecting way
        return hash(self.dim)

    def __repr__(self):
        return f"PureState({np.array2string(self.amplitudes, precision=6)})"


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumError("density operator must be square")
        if np.max(np.abs(m - m.conj().T)) > NORM_TOL:
            raise QuantumError("density operator not Hermitian")
        if abs(np.trace(m).real - 1.0) > NORM_TOL:
            raise QuantumError(f"density operator trace {np.trace(m).real!r} != 1")
        if np.min(np.linalg.eigvalsh(m)) < -NORM_TOL:
            raise QuantumError("density operator not positive semidefinite")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def allclose(self, other: "DensityOperator", tol: float = NORM_TOL) -> bool:
        return self.dim == other.dim and float(np.max(np.abs(self.matrix - other.matrix))) <= tol


@dataclass(frozen=True, eq=False)
class PovmEffect:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumError("effect must be square")
        if np.max(np.abs(m - m.conj().T)) > NORM_TOL:
            raise QuantumError("effect not Hermitian")
        ev = np.linalg.eigvalsh(m)
        if ev.min() < -NORM_TOL or ev.max() > 1.0 + NORM_TOL:
            raise QuantumError(f"effect eigenvalues outside [0, 1]: {ev}")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def projector_onto(cls, psi: PureState) -> "PovmEffect":
        return cls(psi.projector())

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Pvm:
    """Ordered list of orthogonal projectors summing to the identity."""

    projectors: tuple

    def __post_init__(self):
        if isinstance(self.projectors, (set, frozenset)):
            raise QuantumError("PVM elements need a fixed ordering")
        ps = tuple(p if isinstance(p, PovmEffect) else PovmEffect(p) for p in self.projectors)
        if not ps:
            raise QuantumError("empty PVM")
        dim = ps[0].dim
        for p in ps:
            _check_dims(dim, p.dim)
            if np.max(np.abs(p.matrix @ p.matrix - p.matrix)) > PROJ_TOL:
                raise QuantumError("PVM element is not idempotent")
        for i in range(len(ps)):
            for j in range(i + 1, len(ps)):
                if np.max(np.abs(ps[i].matrix @ ps[j].matrix)) > PROJ_TOL:
                    raise QuantumError(f"PVM elements {i} and {j} are not orthogonal")
        total = sum(p.matrix for p in ps)
        if np.max(np.abs(total - np.eye(dim))) > PROJ_TOL:
            raise QuantumError("PVM elements do not sum to the identity")
        object.__setattr__(self, "projectors", ps)

    @classmethod
    def from_basis(cls, basis: Sequence[PureState]) -> "Pvm":
        if isinstance(basis, (set, frozenset)):
            raise QuantumError("PVM elements need a fixed ordering")
        return cls(tuple(PovmEffect.projector_onto(b) for b in basis))

    @property
    def dim(self) -> int:
        return self.projectors[0].dim

    def __len__(self):
        return len(self.projectors)

    def __getitem__(self, k) -> PovmEffect:
        return self.projectors[k]

    def __iter__(self):
        return iter(self.projectors)


def _check_dims(a: int, b: int):
    if a != b:
        raise DimensionMismatch(f"dimension mismatch: {a} vs {b}")


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, PureState):
        return rho.projector()
    if isinstance(rho, DensityOperator):
        return rho.matrix
    raise TypeError(f"expected PureState or DensityOperator, got {type(rho).__name__}")


def born_probability(rho, effect) -> float:
    """tr(E rho), clamped to [0, 1] when the excursion is float noise."""
    m = _as_matrix(rho)
    e = effect.matrix if isinstance(effect, PovmEffect) else PovmEffect(effect).matrix
    _check_dims(m.shape[0], e.shape[0])
    p = float(np.real(np.trace(e @ m)))
    if p < -CLAMP_TOL or p > 1.0 + CLAMP_TOL:
        raise QuantumError(f"Born probability {p!r} outside [0, 1]")
    return min(1.0, max(0.0, p))


def bloch_from_state(psi: PureState) -> np.ndarray:
    """Unit Bloch vector v with |psi><psi| = (1 + v.sigma)/2."""
    if psi.dim != 2:
        raise DimensionMismatch("Bloch vectors are defined for qubits only")
    rho = psi.projector()
    v = np.real(np.einsum("kij,ji->k", PAULI, rho))
    return v / np.linalg.norm(v)


def state_from_bloch(v) -> PureState:
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if abs(n - 1.0) > NORM_TOL * 100:
        raise QuantumError(f"Bloch vector must be unit length, |v| = {n!r}")
    x, y, z = v / n
    theta = np.arctan2(np.hypot(x, y), z)
    phi = np.arctan2(y, x)
    return PureState.from_vector([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def convex_combine(terms: Iterable[tuple[float, object]]) -> DensityOperator:
    """Sum_i p_i rho_i for a probability vector p."""
    terms = list(terms)
    if not terms:
        raise QuantumError("empty convex combination")
    weights = np.array([float(w) for w, _ in terms])
    if np.any(weights < 0):
        raise QuantumError("negative weight in convex combination")
    if abs(weights.sum() - 1.0) > NORM_TOL:
        raise QuantumError(f"weights sum to {weights.sum()!r}, not 1")
    mats = [_as_matrix(r) for _, r in terms]
    for m in mats[1:]:
        _check_dims(mats[0].shape[0], m.shape[0])
    return DensityOperator(sum(w * m for w, m in zip(weights, mats)))


def basis_state(k: int, dim: int = 2) -> PureState:
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return PureState(v)


def angle_state(angle: float) -> PureState:
    """cos(angle)|0> + sin(angle)|1>, e.g. the |pi/8> states."""
    return PureState.from_vector([np.cos(angle), np.sin(angle)])


def orthogonal_complement(psi: PureState) -> PureState:
    """The qubit state orthogonal to ``psi``."""
    if psi.dim != 2:
        raise DimensionMismatch("orthogonal_complement is qubit-only; use complete_basis")
    a, b = psi.amplitudes
    return PureState.from_vector([-np.conj(b), np.conj(a)])


def complete_basis(psi: PureState) -> list[PureState]:
    """An orthonormal basis whose first element is ``psi`` (Gram-Schmidt)."""
    if psi.dim == 2:
        return [psi, orthogonal_complement(psi)]
    vecs = [psi.amplitudes]
    for e in np.eye(psi.dim, dtype=complex):
        w = e - sum(np.vdot(u, e) * u for u in vecs)
        n = np.linalg.norm(w)
        if n > 1e-6:
            vecs.append(w / n)
        if len(vecs) == psi.dim:
            break
    return [PureState.from_vector(v) for v in vecs]


def random_state(rng: np.random.Generator, dim: int = 2) -> PureState:
    """Haar-random pure state from a normalized complex Gaussian."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState.from_vector(v)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def is_unitary(u: np.ndarray, tol: float = PROJ_TOL) -> bool:
    u = np.asarray(u, dtype=complex)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol
