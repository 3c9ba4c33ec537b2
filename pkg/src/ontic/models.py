"""Concrete hidden-variable models of finite-dimensional systems.

Beltrametti-Bugajski (the quantum state is the ontic state), Kochen-Specker
(qubit, cosine-weighted hemispheres), Bell's first model (ray x interval),
Bell's second model (sphere x sphere) and Aaronson's stochastic-matrix
models in the product-theory instance.  Aerts' model needs an ontic
description of the measuring device and lives in :mod:`ontic.devices`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .ontology import (
    Density,
    DiscreteLabels,
    IndicatorFunction,
    Mixture,
    OntologicalModel,
    PointMass,
    ProductSpace,
    ProductState,
    RayLabelSpace,
    UnitInterval,
    UnitSphere,
    cosine_hemisphere,
    cosine_hemisphere_map,
    step,
    uniform_density,
    uniform_hemisphere,
    uniform_hemisphere_map,
)
from .quantum import (
    DimensionMismatch,
    PovmEffect,
    PureState,
    Pvm,
    QuantumError,
    bloch_from_state,
    is_unitary,
)


def as_bloch(x) -> np.ndarray:
    """Bloch vector of a qubit state, or a normalized copy of a 3-vector."""
    if isinstance(x, PureState):
        return bloch_from_state(x)
    v = np.asarray(x, dtype=float).reshape(3)
    return v / np.linalg.norm(v)


def _qubit(psi: PureState):
    if psi.dim != 2:
        raise DimensionMismatch("this model is defined for qubits only")


def _effect_stack(measurement) -> np.ndarray:
    effects = list(measurement.projectors) if isinstance(measurement, Pvm) else list(measurement)
    mats = np.stack([e.matrix if isinstance(e, PovmEffect) else PovmEffect(e).matrix for e in effects])
    if np.max(np.abs(mats.sum(axis=0) - np.eye(mats.shape[1]))) > 1e-10:
        raise QuantumError("effects do not sum to the identity")
    return mats


def _expectations(rays: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """<lambda|E_k|lambda> for every ray (rows) and effect: shape (n, K)."""
    return np.real(np.einsum("ni,kij,nj->nk", rays.conj(), mats, rays))


# -- Beltrametti-Bugajski --------------------------------------------------


def bb_epistemic(psi: PureState) -> PointMass:
    space = RayLabelSpace(psi.dim)
    return PointMass(space, space.point(psi))


def bb_indicator(measurement) -> IndicatorFunction:
    """xi(k|lambda) = tr(|lambda><lambda| E_k) for any POVM (or PVM)."""
    mats = _effect_stack(measurement)
    space = RayLabelSpace(mats.shape[1])

    def evaluator(k, rays):
        return np.clip(np.real(np.einsum("ni,ij,nj->n", rays.conj(), mats[k], rays)), 0.0, 1.0)

    return IndicatorFunction(space, mats.shape[0], evaluator, deterministic=False, name="bb")


def bb_qubit_response(phi, lam) -> np.ndarray:
    """(1 + phi.lambda)/2 on Bloch vectors; ``lam`` may be a batch."""
    return 0.5 * (1.0 + np.asarray(lam, dtype=float) @ as_bloch(phi))


class BeltramettiBugajski(OntologicalModel):
    name = "bb"

    def __init__(self, dim: int = 2):
        self.dim = dim
        self.space = RayLabelSpace(dim)

    def epistemic(self, psi):
        return bb_epistemic(psi)

    def measurement(self, basis):
        return bb_indicator(Pvm.from_basis(list(basis)))


# -- Kochen-Specker --------------------------------------------------------


def ks_epistemic(psi) -> Density:
    """Density cos(theta)/pi on the hemisphere around psi's Bloch vector."""
    if isinstance(psi, PureState):
        _qubit(psi)
    v = as_bloch(psi)

    def evaluator(pts):
        d = pts @ v
        return np.where(d >= 0.0, d, 0.0) / np.pi

    return Density(
        UnitSphere(), evaluator, lambda rng, n: cosine_hemisphere(rng, n, v), name="ks", square_map=cosine_hemisphere_map(v)
    )


def ks_indicator(phi) -> IndicatorFunction:
    """Outcome 0 (phi) iff lambda lies in the closed hemisphere around phi."""
    if isinstance(phi, PureState):
        _qubit(phi)
    a = as_bloch(phi)

    def evaluator(k, pts):
        up = step(pts @ a)
        return up if k == 0 else 1.0 - up

    return IndicatorFunction(UnitSphere(), 2, evaluator, deterministic=True, name="ks")


class KochenSpecker(OntologicalModel):
    name = "ks"
    dim = 2
    space = UnitSphere()

    def epistemic(self, psi):
        return ks_epistemic(psi)

    def measurement(self, basis):
        _check_qubit_basis(basis)
        return ks_indicator(basis[0])


def _check_qubit_basis(basis: Sequence[PureState]):
    if len(basis) != 2 or basis[0].dim != 2:
        raise DimensionMismatch("qubit models take a two-element qubit basis")
    if abs(basis[0].overlap(basis[1])) > 1e-10:
        raise QuantumError("basis elements are not orthogonal")


# -- Bell's first model ----------------------------------------------------


def bell1_epistemic(psi: PureState) -> ProductState:
    """Atom on psi's ray times the uniform distribution on [0, 1]."""
    rays = RayLabelSpace(psi.dim)
    return ProductState((PointMass(rays, rays.point(psi)), uniform_density(UnitInterval())))


def bell1_indicator(pvm: Pvm) -> IndicatorFunction:
    """Outcome i iff x_{i-1}(lambda') <= lambda'' < x_i(lambda').

    x_i is the cumulative Born probability of the first i projectors in the
    PVM's fixed order; the last cell is closed at 1 so the cells cover [0, 1].
    """
    if not isinstance(pvm, Pvm):
        raise QuantumError("Bell's first model needs an ordered PVM")
    mats = _effect_stack(pvm)
    K = mats.shape[0]
    space = ProductSpace((RayLabelSpace(mats.shape[1]), UnitInterval()))

    def cumulative(rays):
        x = np.cumsum(np.clip(_expectations(rays, mats), 0.0, 1.0), axis=1)
        return x / x[:, -1:]

    def evaluator(k, pts):
        rays, u = pts
        x = cumulative(rays)
        lo = x[:, k - 1] if k > 0 else np.zeros(len(u))
        inside = u >= lo
        if k < K - 1:
            inside &= u < x[:, k]
        return inside.astype(float)

    def cuts(k, pts):
        return cumulative(pts[0])[:, :-1]

    return IndicatorFunction(space, K, evaluator, deterministic=True, cuts=cuts, name="bell1")


class BellFirst(OntologicalModel):
    name = "bell1"

    def __init__(self, dim: int = 2):
        self.dim = dim
        self.space = ProductSpace((RayLabelSpace(dim), UnitInterval()))

    def epistemic(self, psi):
        return bell1_epistemic(psi)

    def measurement(self, basis):
        return bell1_indicator(Pvm.from_basis(list(basis)))


# -- Bell's second model ---------------------------------------------------


def rotated_direction(lam2: np.ndarray, a) -> np.ndarray:
    """a' for each row of ``lam2``: in the plane of lambda'' and a, on a's side,
    at angle (pi/2)(1 - lambda''.a) from lambda''.

    When lambda'' is (anti)parallel to a the angle is 0 or pi and any plane
    gives the same a'; a fixed perpendicular is used.
    """
    lam2 = np.atleast_2d(lam2)
    a = as_bloch(a)
    c = np.clip(lam2 @ a, -1.0, 1.0)
    theta = 0.5 * np.pi * (1.0 - c)
    w = a[None, :] - c[:, None] * lam2
    nw = np.linalg.norm(w, axis=1)
    bad = nw < 1e-12
    if bad.any():
        l = lam2[bad]
        helper = np.where(np.abs(l[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
        perp = np.cross(helper, l)
        w[bad] = perp
        nw[bad] = np.linalg.norm(perp, axis=1)
    w = w / nw[:, None]
    return np.cos(theta)[:, None] * lam2 + np.sin(theta)[:, None] * w


def bell2_epistemic(p) -> ProductState:
    """Uniform on the hemisphere around p (density 1/2pi) times an atom at p."""
    p = as_bloch(p)
    hemi = Density(
        UnitSphere(),
        lambda pts: step(pts @ p) / (2.0 * np.pi),
        lambda rng, n: uniform_hemisphere(rng, n, p),
        name="bell2-hemisphere",
        square_map=uniform_hemisphere_map(p),
    )
    return ProductState((hemi, PointMass(UnitSphere(), UnitSphere().point(p))))


def bell2_indicator(a) -> IndicatorFunction:
    """Spin up along a iff lambda' lies in the hemisphere around a'(lambda'')."""
    a = as_bloch(a)
    space = ProductSpace((UnitSphere(), UnitSphere()))

    def evaluator(k, pts):
        lam1, lam2 = pts
        if len(lam2) == 1 or np.all(lam2 == lam2[0]):
            up = step(lam1 @ rotated_direction(lam2[:1], a)[0])
        else:
            up = step(np.einsum("ij,ij->i", lam1, rotated_direction(lam2, a)))
        return up if k == 0 else 1.0 - up

    return IndicatorFunction(space, 2, evaluator, deterministic=True, name="bell2")


class BellSecond(OntologicalModel):
    name = "bell2"
    dim = 2
    space = ProductSpace((UnitSphere(), UnitSphere()))

    def epistemic(self, psi):
        _qubit(psi)
        return bell2_epistemic(psi)

    def measurement(self, basis):
        _check_qubit_basis(basis)
        return bell2_indicator(basis[0])


# -- Aaronson --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Column-stochastic matrix S(U, psi); S[j, i] is the chance i -> j."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumError("stochastic matrix must be square")
        if np.any(m < -1e-15):
            raise QuantumError("stochastic matrix has negative entries")
        if np.max(np.abs(m.sum(axis=0) - 1.0)) > 1e-12:
            raise QuantumError("stochastic matrix columns must sum to 1")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def constraint_residual(self, U: np.ndarray, psi: PureState, omega: Optional[np.ndarray] = None) -> float:
        """max_j |sum_i S_ji |<w_i|psi>|^2 - |<w_j|U|psi>|^2|."""
        W = _preferred(omega, psi.dim)
        before = np.abs(W.conj().T @ psi.amplitudes) ** 2
        after = np.abs(W.conj().T @ (np.asarray(U) @ psi.amplitudes)) ** 2
        return float(np.max(np.abs(self.entries @ before - after)))

    def satisfies_constraint(self, U, psi, omega=None, tol: float = 1e-10) -> bool:
        return self.constraint_residual(U, psi, omega) <= tol


def _preferred(omega, dim: int) -> np.ndarray:
    """Preferred basis as a matrix whose columns are the basis vectors."""
    if omega is None:
        return np.eye(dim, dtype=complex)
    if isinstance(omega, (list, tuple)):
        W = np.column_stack([s.amplitudes for s in omega])
    else:
        W = np.asarray(omega, dtype=complex)
    if not is_unitary(W):
        raise QuantumError("preferred basis is not orthonormal")
    return W


def aaronson_product_matrix(U, psi: PureState, omega=None) -> StochasticMatrix:
    """Product theory: S_ji = |<w_j|U|psi>|^2 for every i."""
    U = np.asarray(U, dtype=complex)
    if not is_unitary(U):
        raise QuantumError("U is not unitary")
    if U.shape[0] != psi.dim:
        raise DimensionMismatch("U and psi dimensions differ")
    W = _preferred(omega, psi.dim)
    target = np.abs(W.conj().T @ (U @ psi.amplitudes)) ** 2
    target = target / target.sum()
    return StochasticMatrix(np.tile(target[:, None], (1, psi.dim)))


def aaronson_space(dim: int) -> ProductSpace:
    return ProductSpace((DiscreteLabels(tuple(range(dim))), RayLabelSpace(dim)))


def aaronson_epistemic(psi: PureState, omega=None) -> Mixture:
    """Atoms (w_i, psi) with weights |<w_i|psi>|^2."""
    space = aaronson_space(psi.dim)
    W = _preferred(omega, psi.dim)
    weights = np.abs(W.conj().T @ psi.amplitudes) ** 2
    weights = weights / weights.sum()
    labels, rays = space.components
    ray_atom = rays.point(psi)
    return Mixture(
        tuple(
            (w, ProductState((PointMass(labels, labels.point(i)), PointMass(rays, ray_atom))))
            for i, w in enumerate(weights)
        )
    )


def aaronson_indicator(
    basis: Sequence[PureState],
    provider: Callable = aaronson_product_matrix,
    omega=None,
) -> IndicatorFunction:
    """xi(j | w_i, phi) = S(U, phi)[j, i] with U taking basis[j] to w_j."""
    basis = list(basis)
    dim = basis[0].dim
    B = np.column_stack([b.amplitudes for b in basis])
    if not is_unitary(B):
        raise QuantumError("measurement basis is not orthonormal")
    W = _preferred(omega, dim)
    U = W @ B.conj().T

    def evaluator(k, pts):
        labels, rays = pts
        if provider is aaronson_product_matrix:
            vals = np.abs(rays @ (U.conj().T @ W[:, k]).conj()) ** 2
            return np.clip(vals, 0.0, 1.0)
        out = np.empty(len(labels))
        for r, (i, ray) in enumerate(zip(labels, rays)):
            out[r] = provider(U, PureState.from_vector(ray), omega).entries[k, i]
        return out

    return IndicatorFunction(aaronson_space(dim), len(basis), evaluator, deterministic=False, name="aaronson")


class Aaronson(OntologicalModel):
    name = "aaronson"

    def __init__(self, dim: int = 2, omega=None, provider: Callable = aaronson_product_matrix):
        self.dim = dim
        self.omega = omega
        self.provider = provider
        self.space = aaronson_space(dim)

    def epistemic(self, psi):
        return aaronson_epistemic(psi, self.omega)

    def measurement(self, basis):
        return aaronson_indicator(basis, self.provider, self.omega)


MODEL_NAMES = ("bb", "ks", "bell1", "bell2", "aerts", "aaronson")


def get_model(name: str) -> OntologicalModel:
    from .devices import AertsModel

    table = {
        "bb": BeltramettiBugajski,
        "ks": KochenSpecker,
        "bell1": BellFirst,
        "bell2": BellSecond,
        "aerts": AertsModel,
        "aaronson": Aaronson,
    }
    try:
        return table[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}") from None
