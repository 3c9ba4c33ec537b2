import math

import numpy as np
import pytest

from ontic.devices import (
    AERTS_DEVICE,
    AertsModel,
    JointIndicator,
    aerts_device_state,
    aerts_epistemic,
    aerts_joint_indicator,
    classify_device_determinism,
    coarse_grain,
    joint_predict,
    lift,
    setting_subset,
)
from ontic.models import BeltramettiBugajski, KochenSpecker, bb_qubit_response
from ontic.ontology import Integrator, SpaceMismatch, UnitSphere, predict, uniform_sphere
from ontic.quantum import angle_state, basis_state, complete_basis, random_state

Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])


@pytest.mark.parametrize("theta,expected", [(0.0, 1.0), (math.pi / 2, 0.5), (math.pi / 3, 0.75)])
def test_aerts_joint_predict_examples(theta, expected):
    lam = np.array([math.sin(theta), 0.0, math.cos(theta)])
    est = joint_predict(aerts_epistemic(lam), aerts_device_state(Z), aerts_joint_indicator(), 0)
    assert est.se == 0.0
    assert est.value == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("s,outcome", [(0.6, 0), (0.4, 1)])
def test_aerts_charge_split_decides(s, outcome):
    xi = aerts_joint_indicator()
    gamma = (np.array([Z]), np.array([s]))
    lam = np.array([X])  # orthogonal: threshold 1/2
    assert xi(outcome, lam, gamma)[0] == 1.0
    assert xi(1 - outcome, lam, gamma)[0] == 0.0


def test_aerts_boundary_goes_up():
    xi = aerts_joint_indicator()
    assert xi(0, np.array([X]), (np.array([Z]), np.array([0.5])))[0] == 1.0


def test_coarse_grain_matches_bb_response(rng):
    m = AertsModel()
    a = uniform_sphere(rng, 1)[0]
    xi = coarse_grain(m.joint, aerts_device_state(a))
    lam = uniform_sphere(rng, 200)
    assert np.allclose(xi(0, lam), bb_qubit_response(a, lam), atol=1e-12)
    assert np.allclose(xi(0, lam) + xi(1, lam), 1.0)


def test_coarse_grain_of_gamma_independent_indicator(rng):
    bb = BeltramettiBugajski()
    xi = bb.measurement(complete_basis(random_state(rng)))
    joint, mu = lift(xi)
    coarse = coarse_grain(joint, mu)
    pts = bb.space.sample(rng, 100)
    assert np.allclose(coarse(0, pts), xi(0, pts))


def test_coarse_grain_sampled_fallback(rng):
    # no cuts, so the fixed-sample average is used; xi ignores gamma
    joint = JointIndicator(
        UnitSphere(), AERTS_DEVICE, 2, lambda k, lam, g: np.full(len(lam), 0.3 if k == 0 else 0.7)
    )
    coarse = coarse_grain(joint, aerts_device_state(Z), samples=64)
    lam = uniform_sphere(rng, 10)
    assert np.allclose(coarse(0, lam), 0.3)


def test_model_predictions_agree_with_born(rng):
    m = AertsModel()
    for _ in range(10):
        psi, phi = random_state(rng), random_state(rng)
        basis = complete_basis(phi)
        born = abs(psi.overlap(phi)) ** 2
        assert m.joint_predict(psi, basis).value == pytest.approx(born, abs=1e-12)
        assert predict(m.epistemic(psi), m.measurement(basis), 0).value == pytest.approx(born, abs=1e-12)


def test_determinism_classes(rng):
    m = AertsModel()
    dev = m.device(complete_basis(basis_state(0)))
    res = classify_device_determinism(m.joint, dev, rng=rng)
    assert res.kind == "Microdeterministic"
    lam, g, gb = res.witness["lambda"], res.witness["gamma"], res.witness["gamma_bar"]
    k = res.witness["outcome"]
    assert m.joint(k, lam, g)[0] != m.joint(k, lam, gb)[0]
    ks = KochenSpecker().measurement(complete_basis(basis_state(0)))
    assert classify_device_determinism(*lift(ks), rng=rng).kind == "Macrodeterministic"
    bb = BeltramettiBugajski().measurement(complete_basis(basis_state(0)))
    assert classify_device_determinism(*lift(bb), rng=rng).kind == "Indeterministic"


def test_setting_subsets_disjoint(rng):
    a, b = uniform_sphere(rng, 2)
    da, db = aerts_device_state(a), aerts_device_state(b)
    ga = da.state.sample(rng, 100)
    assert da.in_setting(ga).all()
    assert not db.in_setting(ga).any()
    assert not setting_subset(b)(ga).any()


def test_space_mismatch():
    bb = BeltramettiBugajski()
    with pytest.raises(SpaceMismatch):
        joint_predict(bb.epistemic(basis_state(0)), aerts_device_state(Z), aerts_joint_indicator(), 0)


def test_aerts_rejects_qutrit():
    with pytest.raises(Exception):
        aerts_epistemic(basis_state(0, 3))


def test_aerts_stationary_across_integrators():
    psi = angle_state(0.3)
    m = AertsModel()
    a = m.joint_predict(psi, complete_basis(basis_state(0)), integ=Integrator(seed=1))
    b = m.joint_predict(psi, complete_basis(basis_state(0)), integ=Integrator(seed=2, workers=4))
    assert a == b
