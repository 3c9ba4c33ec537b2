import math

import numpy as np
import pytest

from ontic.analysis import (
    ContextPair,
    basis_decomposition,
    check_convexity_measurement,
    check_convexity_preparation,
    check_orthogonal_disjoint,
    check_pvm_cover,
    check_pvm_disjoint,
    check_support_subset,
    check_update_rule_violation,
    demo_measurement_contextuality,
    demo_preparation_contextuality,
    detect_deficiency,
    determinism_class,
    lemma_suite,
    matching_basis_decomposition,
    model_deficiency,
    pi8_decomposition,
)
from ontic.devices import AertsModel
from ontic.models import MODEL_NAMES, BellFirst, BeltramettiBugajski, KochenSpecker, get_model, ks_indicator
from ontic.ontology import IndicatorFunction, Integrator
from ontic.quantum import angle_state, basis_state, complete_basis

ZERO, ONE = basis_state(0), basis_state(1)
N = 10_000
CHEAP = Integrator(samples=20_000, seed=5)


@pytest.fixture(params=MODEL_NAMES)
def model(request):
    return get_model(request.param)


def test_lemma_suite_passes(model, rng):
    results = lemma_suite(model, n=N, integ=CHEAP, rng=rng)
    assert [r.name for r in results] == [
        "normalization", "lemma1", "lemma2", "lemma3", "lemma4", "lemma5", "lemma6", "lemma6",
    ]
    failed = [(r.name, r.estimate, r.details) for r in results if not r.passed]
    assert not failed


def test_lemma4_marked_not_applicable_for_indeterministic(rng):
    res = {r.name: r for r in lemma_suite(BeltramettiBugajski(), n=N, integ=CHEAP, rng=rng)}
    assert res["lemma4"].details == {"applicable": False}


def test_support_subset_detects_bad_indicator(rng):
    ks = KochenSpecker()
    # indicator for |1> cannot cover the support of |0>
    res = check_support_subset(ks.epistemic(ZERO), ks.response(ONE), N, rng)
    assert not res.passed and res.details["misses"] > 0


def test_orthogonal_disjoint_detects_overlap(rng):
    ks = KochenSpecker()
    assert check_orthogonal_disjoint(ks.epistemic(ZERO), ks.epistemic(ONE), N, rng).passed
    assert not check_orthogonal_disjoint(ks.epistemic(ZERO), ks.epistemic(angle_state(0.3)), N, rng).passed


def test_duplicated_outcome_breaks_disjointness(rng):
    xi = ks_indicator([0, 0, 1])
    dup = IndicatorFunction(xi.space, 2, lambda k, p: xi(0, p), deterministic=True, name="dup")
    assert not check_pvm_disjoint([dup.outcome(0), dup.outcome(1)], n=N, rng=rng).passed
    assert check_pvm_disjoint([xi.outcome(0), xi.outcome(1)], n=N, rng=rng).passed


def test_missing_outcome_breaks_cover(rng):
    xi = ks_indicator([0, 0, 1])
    assert not check_pvm_cover([xi.outcome(0)], n=N, rng=rng).passed


def test_disjointness_needs_determinism(rng):
    xi = BeltramettiBugajski().measurement([ZERO, ONE])
    with pytest.raises(ValueError):
        check_pvm_disjoint([xi.outcome(0), xi.outcome(1)], n=100, rng=rng)


def test_wrong_weights_break_preparation_convexity():
    m = KochenSpecker()
    assert check_convexity_preparation(m, basis_decomposition(), CHEAP, n_effects=5).passed
    assert not check_convexity_preparation(m, basis_decomposition(), CHEAP, weights=[0.5, 0.5], n_effects=5).passed


def test_measurement_convexity_detects_mismatch(rng):
    m = KochenSpecker()
    other = ks_indicator([1, 0, 0])
    assert not check_convexity_measurement(m, basis_decomposition(), n=N, rng=rng, xi=other).passed


def test_deficiency_table(model, rng):
    deficient, reports = model_deficiency(model, n=N, rng=rng)
    assert deficient == (model.name != "ks")
    assert len(reports) == 5


def test_deficiency_relations(rng):
    assert detect_deficiency(KochenSpecker(), ZERO, n=N, rng=rng).relation == "Equal"
    rep = detect_deficiency(BellFirst(), ZERO, n=N, rng=rng)
    assert rep.relation == "StrictSubset" and rep.deficient


def test_pi8_pair_needs_matching_weights():
    with pytest.raises(ValueError):
        ContextPair(basis_decomposition(), pi8_decomposition(), None, None)
    ContextPair(matching_basis_decomposition(), pi8_decomposition(), None, None)


def test_preparation_contextuality(model, rng):
    rep = demo_preparation_contextuality(model, n=N, rng=rng)
    assert rep.contextual


def test_ks_covered_fractions(rng):
    rep = demo_preparation_contextuality(KochenSpecker(), n=N, rng=rng)
    f1, f2 = rep.fractions
    assert f1 == pytest.approx(1.0, abs=0.01)
    assert f2 == pytest.approx(0.75, abs=0.01)


@pytest.mark.parametrize("name,expected", [
    ("bb", False), ("aerts", False), ("aaronson", False), ("ks", True), ("bell1", True), ("bell2", True),
])
def test_measurement_contextuality(name, expected, rng):
    assert demo_measurement_contextuality(get_model(name), n=N, rng=rng).contextual == expected


def test_bb_supports_are_points(rng):
    rep = demo_preparation_contextuality(BeltramettiBugajski(), n=N, rng=rng)
    assert rep.fractions == (0.0, 0.0)


def test_update_rule(rng):
    psi, phi = ZERO, angle_state(math.pi / 6)
    witness = check_update_rule_violation(BellFirst(), psi, phi, N, rng)
    assert witness is not None
    m = BellFirst()
    assert m.response(psi).support_mask(witness)[0]
    assert not m.epistemic(psi).support_mask(witness)[0]
    assert check_update_rule_violation(KochenSpecker(), psi, phi, N, rng) is None


def test_update_rule_rejects_orthogonal(rng):
    with pytest.raises(ValueError):
        check_update_rule_violation(KochenSpecker(), ZERO, ONE)


@pytest.mark.parametrize("name,kind", [
    ("bb", "Indeterministic"), ("aaronson", "Indeterministic"), ("ks", "Deterministic"),
    ("bell1", "Deterministic"), ("bell2", "Deterministic"), ("aerts", "Microdeterministic"),
])
def test_determinism_class(name, kind, rng):
    assert determinism_class(get_model(name), rng=rng) == kind
