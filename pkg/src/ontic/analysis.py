"""Support lemmas, deficiency, contextuality and the update-rule witness.

Every check samples points and tests membership in supports thresholded at
``eps``.  Region measures are estimated with uniform points of the ambient
ontic space; atoms therefore carry measure zero and are compared as sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .devices import AertsModel, classify_device_determinism
from .ontology import (
    SUPPORT_EPS,
    Decomposition,
    EpistemicState,
    IndicatorFunction,
    Integrator,
    OntologicalModel,
    PreparationSetting,
    Response,
    classify_outcome_determinism,
    predict,
    support_sampler,
    verify_normalization,
)
from .quantum import (
    PureState,
    angle_state,
    basis_state,
    born_probability,
    complete_basis,
    random_state,
)

SUM_FLOOR = 1.0 - 1e-10
POINTWISE_TOL = 1e-10
EXACT_FLOOR = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    estimate: Optional[float] = None
    se: Optional[float] = None
    details: dict = field(default_factory=dict)


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _as_response(obj) -> Response:
    if isinstance(obj, Response):
        return obj
    if isinstance(obj, IndicatorFunction):
        return obj.outcome(0)
    raise TypeError(f"expected a Response or IndicatorFunction, got {type(obj).__name__}")


def _radius(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


# -- lemma checks ----------------------------------------------------------


def check_support_subset(mu: EpistemicState, xi, n: int = 10_000, rng=None, eps: float = SUPPORT_EPS) -> CheckResult:
    """Every point drawn from Supp(mu) must lie in Supp(xi)."""
    xi = _as_response(xi)
    if mu.space != xi.space:
        raise ValueError("epistemic state and indicator live on different spaces")
    pts = support_sampler(mu, eps=eps).sample(_rng(rng), n)
    outside = ~xi.support_mask(pts, eps)
    return CheckResult("support-subset", not outside.any(), float(outside.mean()), None, {"n": n, "misses": int(outside.sum())})


def check_orthogonal_disjoint(mu1: EpistemicState, mu2: EpistemicState, n: int = 10_000, rng=None, eps: float = SUPPORT_EPS) -> CheckResult:
    """No point drawn from either state (or uniformly) may lie in both supports."""
    rng = _rng(rng)
    space = mu1.space
    hits = 0
    for pts in (mu1.sample(rng, n), mu2.sample(rng, n), space.sample(rng, n)):
        hits += int((mu1.support_mask(pts, eps) & mu2.support_mask(pts, eps)).sum())
    return CheckResult("orthogonal-disjoint", hits == 0, None, None, {"n": 3 * n, "shared": hits})


def check_pvm_cover(xis: Sequence, sampler: Optional[Callable] = None, n: int = 10_000, rng=None, eps: float = SUPPORT_EPS) -> CheckResult:
    """Outcome probabilities sum to one and some outcome is possible everywhere."""
    rs = [_as_response(x) for x in xis]
    pts = (sampler or rs[0].space.sample)(_rng(rng), n)
    vals = np.stack([r(pts) for r in rs])
    bad = (vals.sum(axis=0) < SUM_FLOOR) | ~(vals > eps).any(axis=0)
    return CheckResult("pvm-cover", not bad.any(), float(bad.mean()), None, {"n": n, "uncovered": int(bad.sum())})


def check_pvm_disjoint(xis: Sequence, sampler: Optional[Callable] = None, n: int = 10_000, rng=None, eps: float = SUPPORT_EPS) -> CheckResult:
    """No sampled point lies in the supports of two outcomes."""
    rs = [_as_response(x) for x in xis]
    if not all(r.xi.deterministic for r in rs):
        raise ValueError("disjointness of outcome supports needs deterministic indicators")
    pts = (sampler or rs[0].space.sample)(_rng(rng), n)
    count = np.sum([r.support_mask(pts, eps) for r in rs], axis=0)
    bad = count > 1
    return CheckResult("pvm-disjoint", not bad.any(), float(bad.mean()), None, {"n": n, "overlaps": int(bad.sum())})


def _sub(integ: Integrator, tag: int) -> Integrator:
    return replace(integ, key=integ.key + (3, tag))


def check_convexity_preparation(
    model: OntologicalModel,
    decomposition: Decomposition,
    integ: Optional[Integrator] = None,
    weights: Optional[Sequence[float]] = None,
    n_effects: int = 20,
    rng=None,
) -> CheckResult:
    """The mixture prepared for a decomposition predicts like sum_i p_i mu_i.

    ``weights`` overrides the p_i used on the reference side.  Both sides of
    each comparison draw from the same seeds, so matching weights agree up
    to rounding.  The largest distance from tr(rho E) in standard errors is
    reported in ``details`` but does not decide the verdict.
    """
    integ = integ or Integrator()
    rng = _rng(rng if rng is not None else integ.rng(3))
    d = decomposition if isinstance(decomposition, Decomposition) else Decomposition(tuple(decomposition))
    ws = [w for w, _ in d.terms] if weights is None else [float(w) for w in weights]
    if len(ws) != len(d.terms):
        raise ValueError("one weight per decomposition term")
    setting = PreparationSetting.from_decomposition(d)
    mixture = model.prepare(setting)
    worst, worst_z = 0.0, 0.0
    passed = True
    for e in range(n_effects):
        sub = _sub(integ, e)
        basis = complete_basis(random_state(rng, model.dim))
        xi = model.measurement(basis)
        lhs = predict(mixture, xi, 0, sub)
        parts = [predict(model.epistemic(s), xi, 0, sub.child(i)) for i, (_, s) in enumerate(d.terms)]
        rhs = sum(w * p.value for w, p in zip(ws, parts))
        rhs_se = math.sqrt(sum((w * p.se) ** 2 for w, p in zip(ws, parts)))
        gap = abs(lhs.value - rhs)
        tol = max(3.0 * math.hypot(lhs.se, rhs_se), EXACT_FLOOR)
        born_gap = abs(lhs.value - born_probability(setting.state, basis[0].projector()))
        worst = max(worst, gap)
        worst_z = max(worst_z, born_gap / lhs.se if lhs.se > 0 else (0.0 if born_gap <= EXACT_FLOOR else math.inf))
        if gap > tol:
            passed = False
    return CheckResult("convexity-preparation", passed, worst, None, {"effects": n_effects, "worst_born_z": worst_z})


def check_convexity_measurement(
    model: OntologicalModel,
    decomposition: Decomposition,
    sampler: Optional[Callable] = None,
    n: int = 10_000,
    rng=None,
    xi: Optional[IndicatorFunction] = None,
) -> CheckResult:
    """xi(E|lambda) equals sum_i p_i xi(psi_i|lambda) pointwise.

    ``xi`` overrides the model's indicator for the effect.
    """
    d = decomposition if isinstance(decomposition, Decomposition) else Decomposition(tuple(decomposition))
    effect = (xi or model.effect_indicator(d)).outcome(0)
    pts = (sampler or model.space.sample)(_rng(rng), n)
    target = sum(w * model.response(s)(pts) for w, s in d.terms)
    gap = float(np.max(np.abs(effect(pts) - target)))
    return CheckResult("convexity-measurement", gap <= POINTWISE_TOL, gap, None, {"n": n})


# -- deficiency ------------------------------------------------------------


@dataclass(frozen=True)
class SupportReport:
    """Supp(mu(.|psi)) against Supp(xi(psi|.)) on the ambient space."""

    relation: str  # Equal | StrictSubset | Disjoint | Overlapping
    mu_measure: float
    xi_measure: float
    diff_measure: float
    n: int
    radius: float
    inclusion: bool

    @property
    def deficient(self) -> bool:
        return self.inclusion and self.diff_measure > 3.0 * self.radius


def detect_deficiency(
    model: OntologicalModel,
    psi: PureState,
    setting: Optional[PreparationSetting] = None,
    basis: Optional[Sequence[PureState]] = None,
    n: int = 10_000,
    rng=None,
    eps: float = SUPPORT_EPS,
) -> SupportReport:
    """Measure D(psi) = Supp(xi(psi|.)) minus Supp(mu(.|psi))."""
    rng = _rng(rng)
    mu = model.prepare(setting) if setting is not None else model.epistemic(psi)
    xi = model.response(psi, basis)
    inside = xi.support_mask(mu.sample(rng, n), eps)
    pts = model.space.sample(rng, n)
    in_mu = mu.support_mask(pts, eps)
    in_xi = xi.support_mask(pts, eps)
    mu_m, xi_m = float(in_mu.mean()), float(in_xi.mean())
    diff = float((in_xi & ~in_mu).mean())
    back = float((in_mu & ~in_xi).mean())
    r = _radius(diff, n)
    inclusion = bool(inside.all())
    if inclusion:
        relation = "StrictSubset" if diff > 3.0 * r else "Equal"
    elif not inside.any():
        relation = "Disjoint"
    else:
        relation = "Overlapping"
    if inclusion and back > 3.0 * _radius(back, n):
        relation = "Overlapping"
    return SupportReport(relation, mu_m, xi_m, diff, n, r, inclusion)


def deficiency_states(dim: int = 2, count: int = 3, rng=None) -> list[PureState]:
    """Probe states: a basis state, a pi/8 state and random ones."""
    rng = _rng(rng)
    states = [basis_state(0, dim)]
    if dim == 2:
        states.append(angle_state(math.pi / 8))
    states += [random_state(rng, dim) for _ in range(count)]
    return states


def model_deficiency(model: OntologicalModel, n: int = 10_000, rng=None, states=None) -> tuple[bool, list[SupportReport]]:
    """Deficient iff some probe state shows a strict support inclusion."""
    rng = _rng(rng)
    states = states or deficiency_states(model.dim, rng=rng)
    reports = [detect_deficiency(model, s, n=n, rng=rng) for s in states]
    return any(r.deficient for r in reports), reports


# -- contextuality ---------------------------------------------------------


def basis_decomposition(weight: float = 0.75) -> Decomposition:
    return Decomposition(((weight, basis_state(0)), (1.0 - weight, basis_state(1))))


def matching_basis_decomposition() -> Decomposition:
    """The diagonal decomposition of the same operator as :func:`pi8_decomposition`.

    Half |pi/8> plus half |-pi/8> is diag(cos^2(pi/8), sin^2(pi/8)), so these
    are the weights that make the two contexts operationally equivalent.
    """
    return basis_decomposition(math.cos(math.pi / 8) ** 2)


def pi8_decomposition() -> Decomposition:
    return Decomposition(((0.5, angle_state(math.pi / 8)), (0.5, angle_state(-math.pi / 8))))


@dataclass(frozen=True, eq=False)
class ContextPair:
    """Two contexts for the same operator, with the model's objects for each."""

    first: Decomposition
    second: Decomposition
    first_object: object
    second_object: object

    def __post_init__(self):
        if np.max(np.abs(self.first.operator() - self.second.operator())) > EXACT_FLOOR:
            raise ValueError("the two contexts describe different operators")


@dataclass(frozen=True)
class ContextualityReport:
    kind: str  # preparation | measurement
    contextual: bool
    fractions: tuple
    radius: float
    difference: float
    n: int


def demo_preparation_contextuality(
    model: OntologicalModel,
    first: Optional[Decomposition] = None,
    second: Optional[Decomposition] = None,
    n: int = 10_000,
    rng=None,
    eps: float = SUPPORT_EPS,
) -> ContextualityReport:
    """Compare the epistemic states for two decompositions of one density operator.

    Covered fractions use uniform points.  The verdict uses the mass each
    state puts outside the other's support, which also sees atoms.
    """
    rng = _rng(rng)
    first, second = first or matching_basis_decomposition(), second or pi8_decomposition()
    pair = ContextPair(
        first,
        second,
        model.prepare(PreparationSetting.from_decomposition(first)),
        model.prepare(PreparationSetting.from_decomposition(second)),
    )
    mu1, mu2 = pair.first_object, pair.second_object
    pts = model.space.sample(rng, n)
    f1, f2 = float(mu1.support_mask(pts, eps).mean()), float(mu2.support_mask(pts, eps).mean())
    out12 = float((~mu2.support_mask(mu1.sample(rng, n), eps)).mean())
    out21 = float((~mu1.support_mask(mu2.sample(rng, n), eps)).mean())
    cross = max(out12, out21)
    r = _radius(cross, n)
    return ContextualityReport("preparation", cross > 3.0 * r, (f1, f2), max(_radius(f1, n), _radius(f2, n)), cross, n)


def demo_measurement_contextuality(
    model: OntologicalModel,
    first: Optional[Decomposition] = None,
    second: Optional[Decomposition] = None,
    n: int = 10_000,
    rng=None,
    eps: float = SUPPORT_EPS,
) -> ContextualityReport:
    """Compare the indicator functions for two realisations of one effect."""
    rng = _rng(rng)
    first, second = first or matching_basis_decomposition(), second or pi8_decomposition()
    pair = ContextPair(first, second, model.effect_indicator(first), model.effect_indicator(second))
    pts = model.space.sample(rng, n)
    a, b = pair.first_object(0, pts), pair.second_object(0, pts)
    f1, f2 = float((a > eps).mean()), float((b > eps).mean())
    gap = float(np.max(np.abs(a - b)))
    return ContextualityReport("measurement", gap > POINTWISE_TOL, (f1, f2), max(_radius(f1, n), _radius(f2, n)), gap, n)


# -- update rule -----------------------------------------------------------


def check_update_rule_violation(
    model: OntologicalModel,
    psi: PureState,
    phi: PureState,
    n: int = 10_000,
    rng=None,
    eps: float = SUPPORT_EPS,
):
    """A point prepared as phi that passes the psi test but is not a psi state.

    Returns the point (a batch of one) or None.
    """
    ov = abs(psi.overlap(phi))
    if ov < 1e-10 or ov > 1.0 - 1e-10:
        raise ValueError("psi and phi must be neither equal nor orthogonal")
    pts = model.epistemic(phi).sample(_rng(rng), n)
    hit = model.response(psi).support_mask(pts, eps) & ~model.epistemic(psi).support_mask(pts, eps)
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        return None
    return model.space.take(pts, idx[:1])


# -- suites ----------------------------------------------------------------


def determinism_class(model: OntologicalModel, n: int = 10_000, rng=None) -> str:
    """Outcome-determinism class of the model's measurements of |0>."""
    rng = _rng(rng)
    basis = complete_basis(basis_state(0, model.dim))
    if isinstance(model, AertsModel):
        return classify_device_determinism(model.joint, model.device(basis), n=n, rng=rng).kind
    return classify_outcome_determinism(model.measurement(basis), n=n, rng=rng).kind


def lemma_suite(model: OntologicalModel, n: int = 10_000, integ: Optional[Integrator] = None, rng=None) -> list[CheckResult]:
    """Normalization and the six support/convexity lemmas for one model."""
    rng = _rng(rng)
    integ = integ or Integrator(samples=n)
    psi = random_state(rng, model.dim)
    perp = complete_basis(psi)[1]
    basis = complete_basis(random_state(rng, model.dim))
    xi = model.measurement(basis)
    outcomes = [xi.outcome(k) for k in range(xi.n_outcomes)]
    out = []
    norm = verify_normalization(model.epistemic(psi), integ)
    out.append(CheckResult("normalization", norm.passed, norm.value, norm.se))
    out.append(replace(check_support_subset(model.epistemic(psi), model.response(psi), n, rng), name="lemma1"))
    out.append(replace(check_orthogonal_disjoint(model.epistemic(psi), model.epistemic(perp), n, rng), name="lemma2"))
    out.append(replace(check_pvm_cover(outcomes, n=n, rng=rng), name="lemma3"))
    if xi.deterministic:
        out.append(replace(check_pvm_disjoint(outcomes, n=n, rng=rng), name="lemma4"))
    else:
        out.append(CheckResult("lemma4", True, None, None, {"applicable": False}))
    out.append(replace(check_convexity_preparation(model, basis_decomposition(), integ, rng=rng), name="lemma5"))
    for tag, d in (("basis", basis_decomposition()), ("pi8", pi8_decomposition())):
        res = check_convexity_measurement(model, d, n=n, rng=rng)
        out.append(replace(res, name="lemma6", details={**res.details, "decomposition": tag}))
    return out
