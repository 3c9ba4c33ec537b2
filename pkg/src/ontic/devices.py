"""Measurement devices with their own ontic states.

A device ontic state gamma lives in a space Gamma_M; the device's epistemic
state mu(gamma|S_M) is concentrated on the subset of Gamma_M belonging to
its setting.  A joint indicator xi(k|lambda, gamma) sees both the system and
the device, and averaging it over mu(gamma|S_M) gives an ordinary
system-level indicator function (coarse-graining).  Aerts' sphere model is
the worked instance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ontology import (
    DETERMINISM_TOL,
    Density,
    DiscreteLabels,
    EpistemicState,
    Estimate,
    IndicatorFunction,
    Integrator,
    OntologicalModel,
    OnticSpace,
    PointMass,
    ProductSpace,
    ProductState,
    SpaceMismatch,
    UnitInterval,
    UnitSphere,
    expectation,
    piecewise_interval_average,
    step,
    uniform_density,
)
from .models import _check_qubit_basis, _qubit, as_bloch

COARSE_SAMPLES = 4096


@dataclass(frozen=True)
class PreparationDeviceSpace:
    """Ontic space of a preparation device.  Typed for symmetry only."""

    space: OnticSpace


@dataclass(frozen=True, eq=False)
class DeviceEpistemicState:
    """mu(gamma|S_M) together with the predicate picking out S_M's subset of Gamma_M."""

    state: EpistemicState
    setting: object
    subset: Callable

    @property
    def space(self) -> OnticSpace:
        return self.state.space

    def in_setting(self, gamma) -> np.ndarray:
        return np.asarray(self.subset(gamma), dtype=bool)


@dataclass(frozen=True, eq=False)
class JointIndicator:
    """xi(k | lambda, gamma) on Lambda x Gamma_M.

    ``cuts(k, lam, gamma)``, if given, returns the breakpoints of xi along
    the unit-interval factor of gamma, as for :class:`IndicatorFunction`.
    """

    system_space: OnticSpace
    device_space: OnticSpace
    n_outcomes: int
    evaluator: Callable
    deterministic: bool = False
    cuts: Optional[Callable] = None
    name: str = ""

    def __call__(self, k: int, lam, gamma) -> np.ndarray:
        if not 0 <= k < self.n_outcomes:
            raise IndexError(f"outcome {k} out of range for {self.n_outcomes} outcomes")
        return np.asarray(self.evaluator(k, lam, gamma), dtype=float)


def _components(space: OnticSpace) -> tuple:
    return space.components if isinstance(space, ProductSpace) else (space,)


def _factors(state: EpistemicState) -> tuple:
    """Split a state into independent factors along its space's components."""
    if isinstance(state, ProductState):
        return state.factors
    if isinstance(state, PointMass) and isinstance(state.space, ProductSpace):
        return tuple(PointMass(c, a) for c, a in zip(state.space.components, state.atom))
    return (state,)


def _join(space: OnticSpace, parts: tuple):
    return parts if isinstance(space, ProductSpace) else parts[0]


class _Flattened:
    """A joint indicator outcome seen as a function on the flattened product."""

    def __init__(self, xi: JointIndicator, k: int):
        self.xi, self.k = xi, k
        self.n_sys = len(_components(xi.system_space))

    def split(self, pts):
        return _join(self.xi.system_space, pts[: self.n_sys]), _join(self.xi.device_space, pts[self.n_sys :])

    def __call__(self, pts):
        lam, gamma = self.split(pts)
        return self.xi(self.k, lam, gamma)

    def cuts(self, pts):
        if self.xi.cuts is None:
            return None
        lam, gamma = self.split(pts)
        return np.atleast_2d(np.asarray(self.xi.cuts(self.k, lam, gamma), dtype=float))


def joint_predict(
    mu_s: EpistemicState,
    mu_m: DeviceEpistemicState,
    xi: JointIndicator,
    k: int,
    integ: Optional[Integrator] = None,
) -> Estimate:
    """Double integral of mu(lambda) mu(gamma|S_M) xi(k|lambda, gamma)."""
    if mu_s.space != xi.system_space:
        raise SpaceMismatch("system epistemic state and joint indicator disagree on Lambda")
    if mu_m.space != xi.device_space:
        raise SpaceMismatch("device epistemic state and joint indicator disagree on Gamma_M")
    joint = ProductState(_factors(mu_s) + _factors(mu_m.state))
    return expectation(joint, _Flattened(xi, k), integ or Integrator())


def coarse_grain(xi: JointIndicator, mu_m: DeviceEpistemicState, samples: int = COARSE_SAMPLES, seed: int = 0) -> IndicatorFunction:
    """xi~(k|lambda) = integral of xi(k|lambda, gamma) mu(gamma|S_M) over S~_M.

    Exact when mu_M is atoms times a uniform interval and xi exposes cuts;
    otherwise every lambda is averaged over the same fixed gamma sample.
    """
    if mu_m.space != xi.device_space:
        raise SpaceMismatch("device epistemic state and joint indicator disagree on Gamma_M")
    factors = _factors(mu_m.state)
    comps = _components(xi.device_space)
    free = [i for i, f in enumerate(factors) if not isinstance(f, PointMass)]
    exact = (
        xi.cuts is not None
        and len(free) == 1
        and isinstance(factors[free[0]], Density)
        and factors[free[0]].uniform
        and isinstance(comps[free[0]], UnitInterval)
    )
    gamma_ref = None
    if not free:
        exact = True
    elif not exact:
        rng = np.random.default_rng(seed)
        gamma_ref = mu_m.state.sample(rng, samples)

    def gamma_rows(n, s=None):
        parts = tuple(
            (s if i in free else f.space.repeat(f.atom, n)) for i, f in enumerate(factors)
        )
        return _join(xi.device_space, parts)

    def lam_rows(lam, rows):
        return xi.system_space.take(lam, rows)

    def evaluator(k, lam):
        n = xi.system_space.size(lam)
        if not free:
            return xi(k, lam, gamma_rows(n))
        if exact:
            cuts = xi.cuts(k, lam, gamma_rows(n, np.zeros(n)))

            def build(rows, s):
                return lam_rows(lam, rows), gamma_rows(len(s), s)

            return piecewise_interval_average(lambda p: xi(k, *p), cuts, build)
        m = xi.device_space.size(gamma_ref)
        out = np.empty(n)
        for r in range(n):
            lam_r = xi.system_space.repeat(xi.system_space.take(lam, np.array([r])), m)
            out[r] = float(np.mean(xi(k, lam_r, gamma_ref)))
        return out

    return IndicatorFunction(xi.system_space, xi.n_outcomes, evaluator, deterministic=False, name=f"{xi.name}:coarse")


# -- lifting and the determinism classes -----------------------------------


TRIVIAL_DEVICE = DiscreteLabels(("*",))


def lift(xi: IndicatorFunction) -> tuple[JointIndicator, DeviceEpistemicState]:
    """Attach a one-point device space to a system-level indicator function."""
    joint = JointIndicator(
        xi.space,
        TRIVIAL_DEVICE,
        xi.n_outcomes,
        lambda k, lam, gamma: xi(k, lam),
        deterministic=xi.deterministic,
        name=f"{xi.name}:lifted",
    )
    mu = DeviceEpistemicState(PointMass(TRIVIAL_DEVICE, TRIVIAL_DEVICE.point(0)), None, lambda g: np.ones(len(g), bool))
    return joint, mu


@dataclass(frozen=True)
class DeviceDeterminism:
    kind: str  # Macrodeterministic | Microdeterministic | Indeterministic
    witness: Optional[dict] = None


def classify_device_determinism(
    xi: JointIndicator,
    mu_m: DeviceEpistemicState,
    sampler: Optional[Callable] = None,
    n: int = 10_000,
    rng: Optional[np.random.Generator] = None,
    shifts: int = 8,
) -> DeviceDeterminism:
    """Indeterministic if some xi value is fractional; Microdeterministic if
    two device states of the same setting answer differently for one lambda;
    Macrodeterministic otherwise."""
    if n < 2:
        raise ValueError("need at least two samples")
    rng = rng if rng is not None else np.random.default_rng(0)
    sampler = sampler or xi.system_space.sample
    lam = sampler(rng, n)
    gamma = mu_m.state.sample(rng, n)
    keep = np.flatnonzero(mu_m.in_setting(gamma))
    if keep.size < 2:
        raise ValueError("device epistemic state puts too few samples in its setting subset")
    gspace, sspace = xi.device_space, xi.system_space
    gamma = gspace.take(gamma, keep)
    lam = sspace.take(lam, keep)
    m = keep.size
    values = [xi(k, lam, gamma) for k in range(xi.n_outcomes)]
    for k, v in enumerate(values):
        frac = np.minimum(np.abs(v), np.abs(v - 1.0)) > DETERMINISM_TOL
        if frac.any():
            i = int(np.flatnonzero(frac)[0])
            one = np.array([i])
            return DeviceDeterminism(
                "Indeterministic",
                {"lambda": sspace.take(lam, one), "gamma": gspace.take(gamma, one), "outcome": k, "value": float(v[i])},
            )
    for shift in range(1, min(shifts, m - 1) + 1):
        perm = np.roll(np.arange(m), shift)
        other = gspace.take(gamma, perm)
        for k, v in enumerate(values):
            diff = np.abs(xi(k, lam, other) - v) > DETERMINISM_TOL
            if diff.any():
                i = int(np.flatnonzero(diff)[0])
                one = np.array([i])
                return DeviceDeterminism(
                    "Microdeterministic",
                    {
                        "lambda": sspace.take(lam, one),
                        "gamma": gspace.take(gamma, one),
                        "gamma_bar": gspace.take(other, one),
                        "outcome": k,
                    },
                )
    return DeviceDeterminism("Macrodeterministic")


# -- Aerts' sphere model ---------------------------------------------------


AERTS_DEVICE = ProductSpace((UnitSphere(), UnitInterval()))


def aerts_epistemic(psi) -> PointMass:
    """The system's ontic state is its Bloch vector."""
    if not isinstance(psi, np.ndarray):
        _qubit(psi)
    v = as_bloch(psi)
    return PointMass(UnitSphere(), UnitSphere().point(v))


def setting_subset(a) -> Callable:
    """Predicate for the device states belonging to orientation ``a``."""
    a = as_bloch(a)
    return lambda gamma: UnitSphere().equal(gamma[0], a[None, :])


def aerts_device_state(a) -> DeviceEpistemicState:
    """Orientation fixed at ``a``; the charge split s uniform on [0, 1]."""
    a = as_bloch(a)
    sphere = UnitSphere()
    state = ProductState((PointMass(sphere, sphere.point(a)), uniform_density(UnitInterval())))
    return DeviceEpistemicState(state, tuple(a.tolist()), setting_subset(a))


def _threshold(lam, gamma) -> np.ndarray:
    """(1 - lambda.gamma)/2, i.e. sin^2 of half the angle between them."""
    orient = gamma[0]
    return 0.5 * (1.0 - np.einsum("ij,ij->i", np.broadcast_to(lam, orient.shape), orient))


def aerts_joint_indicator() -> JointIndicator:
    """Outcome 0 (+gamma) iff s >= (1 - lambda.gamma)/2."""

    def evaluator(k, lam, gamma):
        up = step(gamma[1] - _threshold(lam, gamma))
        return up if k == 0 else 1.0 - up

    def cuts(k, lam, gamma):
        return _threshold(lam, gamma)[:, None]

    return JointIndicator(UnitSphere(), AERTS_DEVICE, 2, evaluator, deterministic=True, cuts=cuts, name="aerts")


def aerts_model():
    """(system epistemic constructor, device epistemic constructor, joint indicator)."""
    return aerts_epistemic, aerts_device_state, aerts_joint_indicator()


class AertsModel(OntologicalModel):
    """Aerts' model seen at the system level through the coarse-grained indicator."""

    name = "aerts"
    dim = 2
    space = UnitSphere()

    def __init__(self):
        self.joint = aerts_joint_indicator()

    def epistemic(self, psi):
        return aerts_epistemic(psi)

    def device(self, basis):
        _check_qubit_basis(basis)
        return aerts_device_state(basis[0])

    def measurement(self, basis):
        return coarse_grain(self.joint, self.device(basis))

    def joint_predict(self, psi, basis, k: int = 0, integ: Optional[Integrator] = None) -> Estimate:
        return joint_predict(self.epistemic(psi), self.device(basis), self.joint, k, integ)
