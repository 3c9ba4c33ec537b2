import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ontic.models import bb_indicator, ks_epistemic, ks_indicator
from ontic.ontology import (
    Density,
    DiscreteLabels,
    Integrator,
    IntegrationError,
    IndicatorFunction,
    Mixture,
    PointMass,
    ProductSpace,
    RayLabelSpace,
    SpaceMismatch,
    UnitInterval,
    UnitSphere,
    classify_outcome_determinism,
    constant_indicator,
    cosine_hemisphere,
    expectation,
    frame,
    monte_carlo,
    predict,
    step,
    support_sampler,
    uniform_density,
    uniform_hemisphere,
    uniform_sphere,
    verify_normalization,
)
from ontic.quantum import Pvm, basis_state, complete_basis, random_state

Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])


def test_step_at_zero_is_one():
    assert np.array_equal(step([-1e-300, 0.0, 2.0]), [0.0, 1.0, 1.0])


def test_samplers_land_on_sphere(rng):
    for pts in (uniform_sphere(rng, 1000), uniform_hemisphere(rng, 1000, X), cosine_hemisphere(rng, 1000, X)):
        assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    assert np.all(uniform_hemisphere(rng, 1000, X) @ X >= 0)


def test_frame_is_orthonormal():
    f = frame([0.3, -0.2, 0.9])
    assert np.allclose(f @ f.T, np.eye(3))
    assert np.isclose(np.linalg.det(f), 1.0)


def test_uniform_sphere_moments(rng):
    pts = uniform_sphere(rng, 200_000)
    # uniform on S^2: E[z] = 0 and E[z^2] = 1/3
    assert abs(pts[:, 2].mean()) < 5e-3
    assert pts[:, 2].var() == pytest.approx(1 / 3, abs=5e-3)


def test_predict_bb_exact():
    psi = random_state(np.random.default_rng(1))
    xi = bb_indicator(Pvm.from_basis(complete_basis(psi)))
    est = predict(PointMass(RayLabelSpace(2), RayLabelSpace(2).point(psi)), xi, 0)
    assert est == (pytest.approx(1.0, abs=1e-12), 0.0)


def test_predict_ks_orthogonal_bloch(fast):
    est = predict(ks_epistemic(Z), ks_indicator(X), 0, fast)
    assert abs(est.value - 0.5) <= max(3 * est.se, 1e-3)


def test_predict_trivial_measurement(fast):
    mu = ks_epistemic(Z)
    assert predict(mu, constant_indicator(UnitSphere()), 0, fast).value == 1.0


def test_predict_space_mismatch():
    with pytest.raises(SpaceMismatch):
        predict(ks_epistemic(Z), bb_indicator(Pvm.from_basis(complete_basis(basis_state(0)))), 0)


def test_predict_bad_outcome():
    with pytest.raises(IndexError):
        predict(ks_epistemic(Z), ks_indicator(X), 2)


def test_non_finite_integrand_rejected(fast):
    bad = IndicatorFunction(UnitSphere(), 1, lambda k, p: np.full(len(p), np.nan))
    with pytest.raises(IntegrationError):
        predict(ks_epistemic(Z), bad, 0, fast)


def test_exact_method_refuses_densities():
    with pytest.raises(IntegrationError):
        predict(ks_epistemic(Z), ks_indicator(X), 0, Integrator(method="exact"))


def test_integrator_validation():
    with pytest.raises(ValueError):
        Integrator(samples=0)
    with pytest.raises(ValueError):
        Integrator(method="simpson")


def test_same_seed_bit_identical():
    a = predict(ks_epistemic(Z), ks_indicator([1, 1, 0]), 0, Integrator(samples=50_000, seed=9))
    b = predict(ks_epistemic(Z), ks_indicator([1, 1, 0]), 0, Integrator(samples=50_000, seed=9))
    assert a == b


def test_workers_do_not_change_result():
    mu, xi = ks_epistemic(Z), ks_indicator([1, 0, 1])
    for stratify in (True, False):
        one = predict(mu, xi, 0, Integrator(samples=300_000, seed=4, chunk=1 << 15, stratify=stratify))
        many = predict(mu, xi, 0, Integrator(samples=300_000, seed=4, chunk=1 << 15, workers=4, stratify=stratify))
        assert one == many


def test_plain_monte_carlo_agrees(fast):
    plain = predict(ks_epistemic(Z), ks_indicator([1, 0, 1]), 0, Integrator(samples=200_000, stratify=False))
    expected = 0.5 * (1 + 1 / math.sqrt(2))
    assert abs(plain.value - expected) <= 4 * plain.se


def test_outcomes_sum_to_one(fast):
    mu, xi = ks_epistemic([0.2, 0.5, -0.4]), ks_indicator([0.7, -0.1, 0.2])
    p0, p1 = predict(mu, xi, 0, fast), predict(mu, xi, 1, fast)
    assert abs(p0.value + p1.value - 1.0) <= 3 * math.hypot(p0.se, p1.se) + 1e-12


def test_mixture_linearity():
    mu0, mu1 = ks_epistemic(Z), ks_epistemic(-Z)
    xi = ks_indicator([1, 0, 1])
    integ = Integrator(samples=20_000, seed=5)
    mix = predict(Mixture(((0.75, mu0), (0.25, mu1))), xi, 0, integ)
    parts = 0.75 * predict(mu0, xi, 0, integ.child(0)).value + 0.25 * predict(mu1, xi, 0, integ.child(1)).value
    assert abs(mix.value - parts) <= 1e-12


def test_mixture_weights_validated():
    with pytest.raises(ValueError):
        Mixture(((0.5, ks_epistemic(Z)), (0.4, ks_epistemic(-Z))))


def test_mixture_spaces_validated():
    with pytest.raises(SpaceMismatch):
        Mixture(((0.5, ks_epistemic(Z)), (0.5, uniform_density(UnitInterval()))))


def test_support_examples():
    s = support_sampler(ks_indicator(Z), 0)
    lam = lambda d: np.array([[math.sqrt(1 - d * d), 0.0, d]])
    assert s.contains(lam(0.3))[0]
    assert not s.contains(lam(-0.3))[0]
    pm = PointMass(UnitSphere(), UnitSphere().point(Z))
    sp = support_sampler(pm)
    assert sp.contains(np.array([Z]))[0] and not sp.contains(np.array([X]))[0]


def test_support_sampler_draws_members(rng):
    s = support_sampler(ks_indicator(X), 0)
    assert np.all(s.contains(s.sample(rng, 500)))


def test_support_threshold_must_be_positive():
    with pytest.raises(ValueError):
        support_sampler(ks_epistemic(Z), eps=0.0)


def test_mixture_support_is_union():
    mix = Mixture(((0.5, ks_epistemic(Z)), (0.5, ks_epistemic(X))))
    pts = np.array([[0, 0, 1.0], [1.0, 0, 0], [-0.6, 0, -0.8]])
    assert mix.support_mask(pts).tolist() == [True, True, False]


def test_normalization_examples():
    assert verify_normalization(ks_epistemic(Z), Integrator(samples=200_000)).passed
    assert verify_normalization(PointMass(UnitSphere(), UnitSphere().point(Z))) == (True, 1.0, 0.0)
    mu = ks_epistemic(Z)
    doubled = Density(UnitSphere(), lambda p: 2 * mu(p), mu.sampler)
    res = verify_normalization(doubled, Integrator(samples=200_000))
    assert not res.passed and res.value == pytest.approx(2.0, abs=0.02)


def test_determinism_examples(rng):
    assert classify_outcome_determinism(ks_indicator(Z), rng=rng).deterministic
    bb = bb_indicator(Pvm.from_basis(complete_basis(basis_state(0))))
    d = classify_outcome_determinism(bb, rng=rng)
    assert d.kind == "Indeterministic"
    v = float(np.real(np.abs(d.witness[0][0]) ** 2))
    assert 0 < v < 1 and v == pytest.approx(d.value)
    assert classify_outcome_determinism(constant_indicator(UnitSphere()), rng=rng).deterministic
    with pytest.raises(ValueError):
        classify_outcome_determinism(ks_indicator(Z), n=0)


def test_spaces_validate_points():
    with pytest.raises(SpaceMismatch):
        UnitSphere().point([1.0, 1.0, 0.0])
    with pytest.raises(SpaceMismatch):
        UnitInterval().point(1.5)
    with pytest.raises(ValueError):
        DiscreteLabels(())
    with pytest.raises(ValueError):
        ProductSpace(())
    assert ProductSpace((UnitSphere(), UnitInterval())).total_measure == pytest.approx(4 * math.pi)


def test_interval_cut_rule_is_exact():
    # xi = 1 on [0, 0.3) and [0.7, 1]: the integral over the uniform factor is 0.6
    from ontic.ontology import ProductState

    space = ProductSpace((UnitSphere(), UnitInterval()))
    xi = IndicatorFunction(
        space, 1, lambda k, p: ((p[1] < 0.3) | (p[1] >= 0.7)).astype(float), cuts=lambda k, p: np.tile([0.3, 0.7], (len(p[1]), 1))
    )
    mu = ProductState((PointMass(UnitSphere(), UnitSphere().point(Z)), uniform_density(UnitInterval())))
    assert predict(mu, xi, 0) == (pytest.approx(0.6, abs=1e-15), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monte_carlo_mean_of_constant(seed):
    est = monte_carlo(uniform_sphere, lambda p: np.full(len(p), 0.25), Integrator(samples=1000, seed=seed))
    assert est.value == pytest.approx(0.25) and est.se == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ks_outcome_sums(seed):
    rng = np.random.default_rng(seed)
    xi = ks_indicator(uniform_sphere(rng, 1)[0])
    pts = uniform_sphere(rng, 2000)
    assert np.allclose(xi(0, pts) + xi(1, pts), 1.0, atol=1e-10)


def test_expectation_of_point_mass_product_is_exact():
    from ontic.ontology import ProductState

    mu = ProductState((PointMass(UnitSphere(), UnitSphere().point(Z)), PointMass(UnitInterval(), UnitInterval().point(0.2))))
    assert expectation(mu, lambda p: p[1] * 2, Integrator(method="exact")) == (pytest.approx(0.4), 0.0)
