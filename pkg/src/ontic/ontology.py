"""Ontic spaces, epistemic states, indicator functions and their overlap integral.

Points are always handled in batches: a batch on the unit sphere is an
``(n, 3)`` float array, on the unit interval an ``(n,)`` array, on a ray
space an ``(n, N)`` complex array of unit vectors, on a discrete label set
an ``(n,)`` integer array of label indices, and on a product space a tuple
holding one batch per factor.  A single ontic point is a batch of size one.

Reference measures are the natural uniform ones: solid angle on the sphere
(total 4*pi), Lebesgue on [0, 1], Haar probability measure on rays, and
counting measure on labels.  Densities are taken with respect to them.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .quantum import PureState, complete_basis, convex_combine

SUPPORT_EPS = 1e-9
DETERMINISM_TOL = 1e-10
SUM_TOL = 1e-10
WEIGHT_TOL = 1e-12
DEFAULT_SAMPLES = 10**6


class SpaceMismatch(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


def step(x):
    """Heaviside step with step(0) = 1."""
    return (np.asarray(x) >= 0).astype(float)


# -- sphere sampling -------------------------------------------------------


def uniform_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform points on S^2 via z = 2u - 1, phi = 2 pi v."""
    u = rng.random(n)
    v = rng.random(n)
    z = 2.0 * u - 1.0
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = 2.0 * np.pi * v
    return np.column_stack((r * np.cos(phi), r * np.sin(phi), z))


def frame(axis) -> np.ndarray:
    """Rows (e1, e2, axis): a right-handed orthonormal frame around ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(helper, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    return np.vstack((e1, e2, a))


def _polar_to_axis(axis, cos_t: np.ndarray, phi: np.ndarray) -> np.ndarray:
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    local = np.column_stack((sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t))
    return local @ frame(axis)


def uniform_hemisphere(rng: np.random.Generator, n: int, axis) -> np.ndarray:
    return _polar_to_axis(axis, rng.random(n), 2.0 * np.pi * rng.random(n))


def cosine_hemisphere(rng: np.random.Generator, n: int, axis) -> np.ndarray:
    """Hemisphere points with density proportional to cos(angle to axis)."""
    return _polar_to_axis(axis, np.sqrt(rng.random(n)), 2.0 * np.pi * rng.random(n))


def uniform_hemisphere_map(axis) -> Callable:
    """Map unit-square points (n, 2) to uniform hemisphere points around ``axis``."""
    return lambda u: _polar_to_axis(axis, u[:, 0], 2.0 * np.pi * u[:, 1])


def cosine_hemisphere_map(axis) -> Callable:
    """Map unit-square points (n, 2) to cosine-weighted hemisphere points."""
    return lambda u: _polar_to_axis(axis, np.sqrt(u[:, 0]), 2.0 * np.pi * u[:, 1])


# -- ontic spaces ----------------------------------------------------------


class OnticSpace:
    total_measure: float = 1.0

    def sample(self, rng: np.random.Generator, n: int):
        raise NotImplementedError

    def size(self, points) -> int:
        return len(points)

    def take(self, points, idx):
        return points[idx]

    def concat(self, batches):
        return np.concatenate(batches)

    def repeat(self, atom, n: int):
        return np.repeat(atom, n, axis=0)

    def equal(self, points, atom) -> np.ndarray:
        raise NotImplementedError

    def validate(self, points):
        return points

    def point(self, coords):
        """Validate ``coords`` as a single point and return it as a batch of one."""
        raise NotImplementedError


@dataclass(frozen=True)
class UnitSphere(OnticSpace):
    total_measure = 4.0 * math.pi

    def sample(self, rng, n):
        return uniform_sphere(rng, n)

    def equal(self, points, atom):
        return np.max(np.abs(points - atom), axis=1) <= 1e-10

    def validate(self, points):
        p = np.asarray(points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3:
            raise SpaceMismatch("sphere points must have shape (n, 3)")
        if np.any(np.abs(np.linalg.norm(p, axis=1) - 1.0) > 1e-12):
            raise SpaceMismatch("sphere point is not a unit vector")
        return p

    def point(self, coords):
        return self.validate(np.asarray(coords, dtype=float).reshape(1, 3))


@dataclass(frozen=True)
class UnitInterval(OnticSpace):
    total_measure = 1.0

    def sample(self, rng, n):
        return rng.random(n)

    def equal(self, points, atom):
        return np.abs(points - atom[0]) <= 1e-12

    def validate(self, points):
        p = np.asarray(points, dtype=float).reshape(-1)
        if np.any((p < 0) | (p > 1)):
            raise SpaceMismatch("interval point outside [0, 1]")
        return p

    def point(self, coords):
        return self.validate(np.asarray([coords], dtype=float))


@dataclass(frozen=True)
class RayLabelSpace(OnticSpace):
    """Rays of C^dim, i.e. the projective Hilbert space."""

    dim: int
    total_measure = 1.0

    def sample(self, rng, n):
        z = rng.normal(size=(n, self.dim)) + 1j * rng.normal(size=(n, self.dim))
        return z / np.linalg.norm(z, axis=1, keepdims=True)

    def equal(self, points, atom):
        return np.abs(points @ atom[0].conj()) >= 1.0 - 1e-10

    def validate(self, points):
        p = np.asarray(points, dtype=complex)
        if p.ndim != 2 or p.shape[1] != self.dim:
            raise SpaceMismatch(f"ray points must have shape (n, {self.dim})")
        if np.any(np.abs(np.linalg.norm(p, axis=1) - 1.0) > 1e-12):
            raise SpaceMismatch("ray representative is not a unit vector")
        return p

    def point(self, coords):
        amps = getattr(coords, "amplitudes", coords)
        return self.validate(np.asarray(amps, dtype=complex).reshape(1, self.dim))


@dataclass(frozen=True)
class DiscreteLabels(OnticSpace):
    labels: tuple

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValueError("DiscreteLabels needs at least one label")
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def total_measure(self):
        return float(len(self.labels))

    def sample(self, rng, n):
        return rng.integers(0, len(self.labels), size=n)

    def equal(self, points, atom):
        return np.asarray(points) == atom[0]

    def validate(self, points):
        p = np.asarray(points, dtype=int).reshape(-1)
        if np.any((p < 0) | (p >= len(self.labels))):
            raise SpaceMismatch("label index out of range")
        return p

    def point(self, coords):
        return self.validate(np.asarray([coords], dtype=int))


@dataclass(frozen=True)
class ProductSpace(OnticSpace):
    components: tuple

    def __post_init__(self):
        if len(self.components) == 0:
            raise ValueError("ProductSpace needs at least one component")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def total_measure(self):
        return float(np.prod([c.total_measure for c in self.components]))

    def sample(self, rng, n):
        return tuple(c.sample(rng, n) for c in self.components)

    def size(self, points):
        return self.components[0].size(points[0])

    def take(self, points, idx):
        return tuple(c.take(p, idx) for c, p in zip(self.components, points))

    def concat(self, batches):
        return tuple(c.concat([b[i] for b in batches]) for i, c in enumerate(self.components))

    def repeat(self, atom, n):
        return tuple(c.repeat(a, n) for c, a in zip(self.components, atom))

    def equal(self, points, atom):
        mask = np.ones(self.size(points), dtype=bool)
        for c, p, a in zip(self.components, points, atom):
            mask &= c.equal(p, a)
        return mask

    def validate(self, points):
        if len(points) != len(self.components):
            raise SpaceMismatch("product point has wrong number of factors")
        return tuple(c.validate(p) for c, p in zip(self.components, points))

    def point(self, coords):
        if len(coords) != len(self.components):
            raise SpaceMismatch("product point has wrong number of factors")
        return tuple(c.point(x) for c, x in zip(self.components, coords))


# -- epistemic states ------------------------------------------------------


Sampler = Callable[[np.random.Generator, int], object]


class EpistemicState:
    space: OnticSpace

    def sample(self, rng: np.random.Generator, n: int):
        raise NotImplementedError

    def support_mask(self, points, eps: float = SUPPORT_EPS) -> np.ndarray:
        raise NotImplementedError

    def atoms(self) -> Optional[list]:
        """The finite atom set if the state is purely atomic, else None."""
        return None


@dataclass(frozen=True, eq=False)
class PointMass(EpistemicState):
    space: OnticSpace
    atom: object

    def sample(self, rng, n):
        return self.space.repeat(self.atom, n)

    def support_mask(self, points, eps=SUPPORT_EPS):
        return self.space.equal(points, self.atom)

    def atoms(self):
        return [self.atom]


@dataclass(frozen=True, eq=False)
class Density(EpistemicState):
    """A density w.r.t. the space's reference measure, with an exact sampler.

    ``uniform`` marks the constant density, which lets the integrator use
    exact piecewise quadrature on the unit interval.  ``square_map``, when
    given, turns uniform points of the unit square into samples of this
    density; the integrator then stratifies the square.
    """

    space: OnticSpace
    evaluator: Callable
    sampler: Sampler
    uniform: bool = False
    name: str = ""
    square_map: Optional[Callable] = None

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.evaluator(points), dtype=float)

    def sample(self, rng, n):
        return self.sampler(rng, n)

    def support_mask(self, points, eps=SUPPORT_EPS):
        return self(points) > eps


def uniform_density(space: OnticSpace) -> Density:
    c = 1.0 / space.total_measure
    return Density(
        space,
        lambda pts: np.full(space.size(pts), c),
        space.sample,
        uniform=True,
        name="uniform",
    )


@dataclass(frozen=True, eq=False)
class Mixture(EpistemicState):
    components: tuple  # of (weight, EpistemicState)

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        if not comps:
            raise ValueError("empty mixture")
        ws = np.array([w for w, _ in comps])
        if np.any(ws < 0):
            raise ValueError("negative mixture weight")
        if abs(ws.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"mixture weights sum to {ws.sum()!r}")
        space = comps[0][1].space
        for _, s in comps:
            if s.space != space:
                raise SpaceMismatch("mixture components live on different spaces")
        object.__setattr__(self, "components", comps)

    @property
    def space(self):
        return self.components[0][1].space

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    def sample(self, rng, n):
        counts = rng.multinomial(n, self.weights)
        batches = [s.sample(rng, c) for (w, s), c in zip(self.components, counts) if c > 0]
        return self.space.concat(batches)

    def support_mask(self, points, eps=SUPPORT_EPS):
        mask = np.zeros(self.space.size(points), dtype=bool)
        for w, s in self.components:
            if w > eps:
                mask |= s.support_mask(points, eps)
        return mask

    def atoms(self):
        out = []
        for w, s in self.components:
            if w <= SUPPORT_EPS:
                continue
            a = s.atoms()
            if a is None:
                return None
            out.extend(a)
        return out


@dataclass(frozen=True, eq=False)
class ProductState(EpistemicState):
    """Independent factors over a ProductSpace."""

    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def space(self):
        return ProductSpace(tuple(f.space for f in self.factors))

    def sample(self, rng, n):
        return tuple(f.sample(rng, n) for f in self.factors)

    def support_mask(self, points, eps=SUPPORT_EPS):
        mask = np.ones(self.space.size(points), dtype=bool)
        for f, p in zip(self.factors, points):
            mask &= f.support_mask(p, eps)
        return mask

    def atoms(self):
        parts = [f.atoms() for f in self.factors]
        if any(p is None for p in parts):
            return None
        if any(len(p) != 1 for p in parts):
            return None
        return [tuple(p[0] for p in parts)]


# -- indicator functions ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class IndicatorFunction:
    """Outcome probabilities xi(k | lambda) for one measurement setting.

    ``evaluator(k, points)`` returns an array of probabilities.  ``cuts``,
    when given, maps ``(k, points)`` to an ``(n, m)`` array of the
    breakpoints of xi along the unit-interval factor of the space (the
    interval coordinate of ``points`` is ignored); between breakpoints xi
    must be constant.
    """

    space: OnticSpace
    n_outcomes: int
    evaluator: Callable
    deterministic: bool = False
    cuts: Optional[Callable] = None
    name: str = ""

    def __call__(self, k: int, points) -> np.ndarray:
        if not 0 <= k < self.n_outcomes:
            raise IndexError(f"outcome {k} out of range for {self.n_outcomes} outcomes")
        v = np.asarray(self.evaluator(k, points), dtype=float)
        if not np.all(np.isfinite(v)):
            raise IntegrationError("indicator function returned non-finite values")
        return v

    def outcome(self, k: int) -> "Response":
        return Response(self, k)

    def all_outcomes(self, points) -> np.ndarray:
        return np.stack([self(k, points) for k in range(self.n_outcomes)], axis=0)


@dataclass(frozen=True, eq=False)
class Response:
    """One outcome of an indicator function, as a function of lambda."""

    xi: IndicatorFunction
    k: int

    @property
    def space(self):
        return self.xi.space

    def __call__(self, points):
        return self.xi(self.k, points)

    def cuts(self, points):
        if self.xi.cuts is None:
            return None
        return np.atleast_2d(np.asarray(self.xi.cuts(self.k, points), dtype=float))

    def support_mask(self, points, eps=SUPPORT_EPS):
        return self(points) > eps


def constant_indicator(space: OnticSpace, value: float = 1.0) -> IndicatorFunction:
    """Single-outcome measurement (value 1) or a constant response."""
    return IndicatorFunction(
        space, 1, lambda k, pts: np.full(space.size(pts), value), deterministic=value in (0.0, 1.0), name="constant"
    )


# -- integration -----------------------------------------------------------


class Estimate(NamedTuple):
    value: float
    se: float


@dataclass(frozen=True)
class Integrator:
    """How to evaluate overlap integrals.

    method: "auto" (exact for atoms and piecewise-constant interval factors,
    Monte Carlo otherwise), "mc" (always sample non-atomic factors) or
    "exact" (refuse to sample).  Chunks draw from seeds derived from
    ``(seed, key, chunk index)`` and are reduced in order, so the result does
    not depend on ``workers``.

    With ``stratify`` set, densities that expose a unit-square map are
    integrated by jittered stratified sampling: ``replicates`` independent
    grids share the sample budget and the standard error comes from the
    spread of their means.
    """

    method: str = "auto"
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    key: tuple = ()
    chunk: int = 1 << 17
    workers: int = 1
    stratify: bool = True
    replicates: int = 64

    def __post_init__(self):
        if self.method not in ("auto", "mc", "exact"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if self.samples < 1:
            raise ValueError("sample count must be >= 1")

    def child(self, i: int) -> "Integrator":
        return replace(self, key=self.key + (1, i))

    def chunk_seed(self, c: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.seed, spawn_key=self.key + (0, c))

    def rng(self, tag: int = 0) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=self.key + (2, tag)))


def monte_carlo(sample: Sampler, fn: Callable, integ: Integrator) -> Estimate:
    """Mean of ``fn`` over ``integ.samples`` draws of ``sample``, with its standard error."""
    n = integ.samples
    sizes = [integ.chunk] * (n // integ.chunk)
    if n % integ.chunk:
        sizes.append(n % integ.chunk)

    def run(c):
        rng = np.random.default_rng(integ.chunk_seed(c))
        v = np.asarray(fn(sample(rng, sizes[c])), dtype=float)
        if not np.all(np.isfinite(v)):
            raise IntegrationError("integrand returned non-finite values")
        return float(v.sum()), float(np.dot(v, v))

    if integ.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(integ.workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(c) for c in range(len(sizes))]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / n
    if n < 2:
        return Estimate(mean, float("inf"))
    var = max(0.0, (s2 - s1 * s1 / n) / (n - 1))
    return Estimate(mean, math.sqrt(var / n))


def piecewise_interval_average(fn: Callable, cuts: np.ndarray, build: Callable) -> np.ndarray:
    """Exact integral over s in [0, 1] of a function constant between breakpoints.

    ``cuts`` has shape (n, m); ``build(rows, s)`` returns the point batch for
    row indices ``rows`` with interval coordinate ``s``.  Returns shape (n,).
    """
    cuts = np.clip(np.atleast_2d(cuts), 0.0, 1.0)
    n = cuts.shape[0]
    b = np.sort(np.concatenate((np.zeros((n, 1)), cuts, np.ones((n, 1))), axis=1), axis=1)
    widths = np.diff(b, axis=1)
    mids = 0.5 * (b[:, 1:] + b[:, :-1])
    rows = np.repeat(np.arange(n), mids.shape[1])
    vals = np.asarray(fn(build(rows, mids.reshape(-1))), dtype=float).reshape(mids.shape)
    return np.sum(widths * vals, axis=1)


def stratified(square_map: Callable, fn: Callable, integ: Integrator, build: Optional[Callable] = None) -> Estimate:
    """Jittered stratified estimate over the unit square, replicated for an error bar."""
    r = integ.replicates
    m = math.isqrt(integ.samples // r)
    grid = np.stack(np.meshgrid(np.arange(m), np.arange(m), indexing="ij"), axis=-1).reshape(-1, 2)

    def run(c):
        rng = np.random.default_rng(integ.chunk_seed(c))
        pts = square_map((grid + rng.random(grid.shape)) / m)
        v = np.asarray(fn(build(pts) if build else pts), dtype=float)
        if not np.all(np.isfinite(v)):
            raise IntegrationError("integrand returned non-finite values")
        return float(v.mean())

    if integ.workers > 1:
        with ThreadPoolExecutor(integ.workers) as pool:
            means = np.array(list(pool.map(run, range(r))))
    else:
        means = np.array([run(c) for c in range(r)])
    return Estimate(float(means.mean()), float(means.std(ddof=1) / math.sqrt(r)))


def _can_stratify(state, integ: Integrator) -> bool:
    return (
        integ.stratify
        and isinstance(state, Density)
        and state.square_map is not None
        and integ.replicates >= 2
        and integ.samples >= 4 * integ.replicates
    )


def _is_uniform_interval(state) -> bool:
    return isinstance(state, Density) and state.uniform and isinstance(state.space, UnitInterval)


def expectation(mu: EpistemicState, integrand, integ: Integrator) -> Estimate:
    """Integral of ``integrand`` against ``mu``.

    ``integrand`` is called on point batches; it may expose ``cuts(points)``
    for exact treatment of a uniform unit-interval factor.
    """
    if isinstance(mu, PointMass):
        return Estimate(float(np.asarray(integrand(mu.atom))[0]), 0.0)

    if isinstance(mu, Mixture):
        value, var = 0.0, 0.0
        for i, (w, s) in enumerate(mu.components):
            if w == 0.0:
                continue
            e = expectation(s, integrand, integ.child(i))
            value += w * e.value
            var += (w * e.se) ** 2
        return Estimate(value, math.sqrt(var))

    if isinstance(mu, ProductState):
        free = [i for i, f in enumerate(mu.factors) if not isinstance(f, PointMass)]
        if not free:
            atom = tuple(f.atom for f in mu.factors)
            return Estimate(float(np.asarray(integrand(atom))[0]), 0.0)
        cuts_fn = getattr(integrand, "cuts", None)
        if (
            integ.method != "mc"
            and len(free) == 1
            and _is_uniform_interval(mu.factors[free[0]])
            and cuts_fn is not None
        ):
            j = free[0]
            base = tuple(np.zeros(1) if i == j else f.atom for i, f in enumerate(mu.factors))
            cuts = cuts_fn(base)
            if cuts is not None:

                def build(rows, s):
                    return tuple(
                        s if i == j else mu.factors[i].space.repeat(f.atom, len(s))
                        for i, f in enumerate(mu.factors)
                    )

                return Estimate(float(piecewise_interval_average(integrand, cuts, build)[0]), 0.0)
        if integ.method != "exact" and len(free) == 1 and _can_stratify(mu.factors[free[0]], integ):
            j = free[0]
            size = mu.factors[j].space.size

            def build_product(pts):
                return tuple(pts if i == j else f.space.repeat(f.atom, size(pts)) for i, f in enumerate(mu.factors))

            return stratified(mu.factors[j].square_map, integrand, integ, build_product)

    if integ.method != "exact" and _can_stratify(mu, integ):
        return stratified(mu.square_map, integrand, integ)
    if integ.method == "exact":
        raise IntegrationError(f"no exact rule for {type(mu).__name__}")
    return monte_carlo(mu.sample, integrand, integ)


def predict(mu: EpistemicState, xi: IndicatorFunction, k: int, integ: Optional[Integrator] = None) -> Estimate:
    """Probability of outcome ``k``: the overlap of mu and xi(k|.)."""
    if mu.space != xi.space:
        raise SpaceMismatch(f"epistemic state on {mu.space} but indicator on {xi.space}")
    if not 0 <= k < xi.n_outcomes:
        raise IndexError(f"outcome {k} out of range for {xi.n_outcomes} outcomes")
    return expectation(mu, xi.outcome(k), integ or Integrator())


# -- supports --------------------------------------------------------------


@dataclass(frozen=True)
class Support:
    """Membership predicate plus a sampler of member points."""

    space: OnticSpace
    contains: Callable
    sample: Sampler


def support_sampler(obj, k: Optional[int] = None, eps: float = SUPPORT_EPS, max_rounds: int = 1000) -> Support:
    """Support of an epistemic state, or of outcome ``k`` of an indicator function."""
    if eps <= 0:
        raise ValueError("support threshold must be positive")
    if isinstance(obj, EpistemicState):
        return Support(obj.space, lambda pts: obj.support_mask(pts, eps), obj.sample)
    if isinstance(obj, IndicatorFunction):
        obj = obj.outcome(0 if k is None else k)
    space = obj.space

    def contains(pts):
        return obj.support_mask(pts, eps)

    def sample(rng, n):
        got, have = [], 0
        for _ in range(max_rounds):
            pts = space.sample(rng, max(n, 64))
            idx = np.flatnonzero(contains(pts))
            if idx.size:
                got.append(space.take(pts, idx))
                have += idx.size
            if have >= n:
                return space.take(space.concat(got), np.arange(n))
        raise IntegrationError("could not draw points from the support")

    return Support(space, contains, sample)


# -- checks ----------------------------------------------------------------


class NormalizationResult(NamedTuple):
    passed: bool
    value: float
    se: float


def total_mass(mu: EpistemicState, integ: Integrator) -> Estimate:
    if isinstance(mu, PointMass):
        return Estimate(1.0, 0.0)
    if isinstance(mu, Mixture):
        parts = [(w, total_mass(s, integ.child(i))) for i, (w, s) in enumerate(mu.components)]
        return Estimate(sum(w * e.value for w, e in parts), math.sqrt(sum((w * e.se) ** 2 for w, e in parts)))
    if isinstance(mu, ProductState):
        parts = [total_mass(f, integ.child(i)) for i, f in enumerate(mu.factors)]
        value = float(np.prod([e.value for e in parts]))
        rel = math.sqrt(sum((e.se / e.value) ** 2 for e in parts if e.value != 0))
        return Estimate(value, abs(value) * rel)
    if isinstance(mu, Density):
        if integ.method == "exact":
            raise IntegrationError("density normalization needs sampling")
        space = mu.space
        return monte_carlo(space.sample, lambda pts: space.total_measure * mu(pts), integ)
    raise TypeError(type(mu).__name__)


def verify_normalization(mu: EpistemicState, integ: Optional[Integrator] = None) -> NormalizationResult:
    """Integrate mu against the uniform reference measure; pass iff it is 1."""
    est = total_mass(mu, integ or Integrator())
    passed = abs(est.value - 1.0) <= max(3.0 * est.se, 1e-3)
    return NormalizationResult(passed, est.value, est.se)


@dataclass(frozen=True)
class Determinism:
    deterministic: bool
    witness: object = None
    outcome: Optional[int] = None
    value: Optional[float] = None

    @property
    def kind(self) -> str:
        return "Deterministic" if self.deterministic else "Indeterministic"


def classify_outcome_determinism(
    xi: IndicatorFunction,
    sampler: Optional[Sampler] = None,
    n: int = 10_000,
    rng: Optional[np.random.Generator] = None,
) -> Determinism:
    """Deterministic iff every sampled xi value is within 1e-10 of 0 or 1."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = rng if rng is not None else np.random.default_rng(0)
    sampler = sampler or xi.space.sample
    pts = sampler(rng, n)
    for k in range(xi.n_outcomes):
        v = xi(k, pts)
        frac = np.minimum(np.abs(v), np.abs(v - 1.0)) > DETERMINISM_TOL
        if frac.any():
            i = int(np.flatnonzero(frac)[0])
            return Determinism(False, xi.space.take(pts, np.array([i])), k, float(v[i]))
    return Determinism(True)


def outcome_sums(xi: IndicatorFunction, points) -> np.ndarray:
    return xi.all_outcomes(points).sum(axis=0)


# -- settings and the model contract ---------------------------------------


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Convex decomposition sum_i p_i |psi_i><psi_i| of a state or an effect."""

    terms: tuple  # of (weight, PureState)

    def __post_init__(self):
        terms = tuple((float(w), s) for w, s in self.terms)
        if not terms:
            raise ValueError("empty decomposition")
        ws = np.array([w for w, _ in terms])
        if np.any(ws < 0) or abs(ws.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError("decomposition weights must be a probability vector")
        object.__setattr__(self, "terms", terms)

    def operator(self) -> np.ndarray:
        return sum(w * s.projector() for w, s in self.terms)

    def key(self) -> tuple:
        return tuple((w, tuple(np.round(s.amplitudes, 15).tolist())) for w, s in self.terms)

    def __eq__(self, other):
        return isinstance(other, Decomposition) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


@dataclass(frozen=True)
class PreparationSetting:
    """What the preparation device is set to do; ``context`` tells apart
    operationally equivalent procedures (e.g. a chosen Decomposition)."""

    state: object
    context: object = None

    @classmethod
    def from_decomposition(cls, terms) -> "PreparationSetting":
        d = terms if isinstance(terms, Decomposition) else Decomposition(tuple(terms))
        return cls(convex_combine([(w, s) for w, s in d.terms]), d)


@dataclass(frozen=True)
class MeasurementSetting:
    effects: object
    context: object = None


class OntologicalModel:
    """Binds an ontic space to the epistemic states and indicator functions
    a hidden-variable model assigns to preparations and measurements.

    Subclasses provide ``epistemic(psi)`` and ``measurement(basis)``, the
    latter returning the indicator function of the projective measurement
    in the ordered orthonormal ``basis`` (outcome k <-> basis[k]).
    """

    name = ""
    dim = 2
    space: OnticSpace

    def epistemic(self, psi: PureState) -> EpistemicState:
        raise NotImplementedError

    def measurement(self, basis: Sequence[PureState]) -> IndicatorFunction:
        raise NotImplementedError

    def response(self, psi: PureState, basis: Optional[Sequence[PureState]] = None) -> Response:
        """xi(psi | .): the positive outcome of a test for ``psi``."""
        basis = list(basis) if basis is not None else complete_basis(psi)
        if not basis[0].same_ray(psi):
            raise ValueError("the measurement basis must start with the tested state")
        return self.measurement(basis).outcome(0)

    def prepare(self, setting: PreparationSetting) -> EpistemicState:
        """Epistemic state for a setting; decompositions give the matching mixture."""
        if isinstance(setting.context, Decomposition):
            return Mixture(tuple((w, self.epistemic(s)) for w, s in setting.context.terms))
        if isinstance(setting.state, PureState):
            return self.epistemic(setting.state)
        raise ValueError("mixed preparations need a decomposition context")

    def effect_indicator(self, decomposition: Decomposition) -> IndicatorFunction:
        """Two-outcome indicator for E = sum_i p_i |psi_i><psi_i| realised by
        picking the test for psi_i with probability p_i."""
        parts = [(w, self.response(s)) for w, s in decomposition.terms]

        def evaluator(k, pts):
            e = sum(w * r(pts) for w, r in parts)
            return e if k == 0 else 1.0 - e

        return IndicatorFunction(self.space, 2, evaluator, deterministic=False, name=f"{self.name}:effect")

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"
