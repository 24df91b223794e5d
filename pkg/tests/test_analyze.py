import itertools
from fractions import Fraction

import numpy as np
import pytest

from quadmaps.acceptance import HENON_MAPS, load_table, newton_oracle, random_affine
from quadmaps.analyze import (
    CLOSED_FORM_RANGES,
    INFINITE,
    POLYNOMIAL_WITNESSES,
    ConvexConsistent,
    NonConvexWitness,
    PreimageCardinality,
    SmoothClass,
    cardinality_values,
    critical_set_class_of,
    distinguishing_invariant,
    dp3_dp4_error,
    injective_on_critical_set,
    preimage_count,
    preimage_points,
    preimage_profile,
    preimage_topology,
    quadratic_inverse,
    range_convexity,
    smooth_class_of,
    verify_smooth_witnesses,
)
from quadmaps.core import AffineMap2, QuadraticMap, compose, evaluate
from quadmaps.critical import CriticalSetClass, j0j1_class
from quadmaps.errors import NotApplicableError, NotInvertibleError
from quadmaps.normalize import ClassLabel, classify

L = ClassLabel
TABLE = load_table()


def table_profile(label):
    return frozenset(TABLE[label]["table"]["preimage_cardinalities"])


# -- preimage counts -------------------------------------------------------------

def test_e2_preimages_of_one():
    card, pts = preimage_points(L.E2.normal_form, (1, 0))
    assert card.count == 2
    assert sorted(map(tuple, np.round(pts, 12))) == [(-1.0, 0.0), (1.0, 0.0)]


def test_h3_preimages_of_one():
    card, pts = preimage_points(L.H3.normal_form, (1, 0))
    assert card.count == 4
    want = {(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)}
    assert {tuple(p) for p in np.round(pts, 12) + 0.0} == want


def test_dh2_preimage_is_circle():
    card = preimage_count(L.DH2.normal_form, (1, 0))
    assert card.infinite
    assert card.description == "circle"
    assert card.value == INFINITE
    assert str(card) == "inf (circle)"


@pytest.mark.parametrize("label, target, count", [
    (L.E2, (0, 0), 1),
    (L.DP1, (3, -2), 1),
    (L.DH2, (-1, 0), 0),
    (L.DP5, (1, 1), 0),
    (L.DH1, (-1, 0), 0),
])
def test_hand_counts(label, target, count):
    assert preimage_count(label.normal_form, target).count == count


@pytest.mark.parametrize("label, target, description", [
    (L.DE3, (1, 0), "hyperbola"),
    (L.DE3, (0, 0), "pair-of-lines"),
    (L.DP3, (1, 0), "parabola"),
    (L.DP5, (1, 0), "pair-of-lines"),
    (L.P2, (1, 0), "line"),
])
def test_infinite_descriptions(label, target, description):
    card = preimage_count(label.normal_form, target)
    assert card.infinite
    assert card.description == description


def test_preimage_points_map_to_target(rng):
    for _ in range(50):
        Q = QuadraticMap(*rng.normal(size=12))
        target = evaluate(Q, rng.normal(size=(1, 2)))[0]
        card, pts = preimage_points(Q, target)
        assert card.count >= 1
        assert np.abs(evaluate(Q, pts) - target).max() <= 1e-8 * max(1.0, Q.scale())


def test_count_matches_newton_oracle(rng):
    checked = 0
    while checked < 40:
        Q = QuadraticMap(*rng.normal(size=12))
        target = evaluate(Q, rng.uniform(-2, 2, size=(1, 2)))[0] + rng.normal(size=2)
        card, pts = preimage_points(Q, target)
        if card.infinite or (len(pts) and np.abs(pts).max() > 4.5):
            continue
        assert card.count == len(newton_oracle(Q, target, box=6.0))
        checked += 1


def test_exact_input_counts_like_float():
    Q = QuadraticMap(1, 0, 1, 1, 0, 0, 0, 1, 0, Fraction(1, 2), 0, 0)
    assert preimage_count(Q, (2, 0)) == preimage_count(Q.to_float(), (2, 0))


# -- profiles --------------------------------------------------------------------

@pytest.mark.parametrize("label, profile", [
    (L.E1, {2, 3, 4}), (L.DP1, {1}), (L.P2, {0, 1, 2, INFINITE}),
])
def test_profile_examples(label, profile):
    assert cardinality_values(preimage_profile(label.normal_form)) == frozenset(profile)


@pytest.mark.parametrize("label", list(L))
def test_profile_matches_table(label):
    assert cardinality_values(preimage_profile(label.normal_form)) == table_profile(label)


@pytest.mark.parametrize("label", [L.E1, L.H2, L.P1, L.DE2, L.DH1, L.DP4])
def test_profile_of_conjugates(label):
    rng = np.random.default_rng(list(L).index(label) + 100)
    N = label.normal_form.to_float()
    for _ in range(3):
        Q = compose(random_affine(rng), N, random_affine(rng))
        assert cardinality_values(preimage_profile(Q)) == table_profile(label)


def test_profile_needs_a_target():
    with pytest.raises(ValueError):
        preimage_profile(L.E1.normal_form, 0)


def test_preimage_topology():
    assert preimage_topology(preimage_profile(L.DH2.normal_form)) == {"circle"}
    assert preimage_topology(preimage_profile(L.E1.normal_form)) == frozenset()


def test_profile_is_deterministic():
    Q = L.H1.normal_form
    assert preimage_profile(Q, 200, 7) == preimage_profile(Q, 200, 7)


# -- convexity -------------------------------------------------------------------

def test_dh1_range_convex():
    assert isinstance(range_convexity(L.DH1.normal_form), ConvexConsistent)


def test_dp1_range_convex():
    assert range_convexity(L.DP1.normal_form).convex


def test_de1_range_not_convex():
    w = range_convexity(L.DE1.normal_form)
    assert isinstance(w, NonConvexWitness)
    inside = CLOSED_FORM_RANGES[L.DE1]
    assert inside(*w.p1) and inside(*w.p2)
    assert not inside(*w.midpoint)
    assert np.allclose(w.midpoint, np.add(w.p1, w.p2) / 2)


def test_de1_closed_form_example():
    inside = CLOSED_FORM_RANGES[L.DE1]
    assert inside(-1, 1) and inside(-1, -1) and not inside(-1, 0)
    assert preimage_count(L.DE1.normal_form, (-1, 0)).count == 0
    assert preimage_count(L.DE1.normal_form, (-1, 1)).count >= 1


@pytest.mark.parametrize("label", [L.DE1, L.DH1])
def test_closed_form_ranges_match_counts(label, rng):
    inside = CLOSED_FORM_RANGES[label]
    for u, v in rng.uniform(-3, 3, size=(200, 2)):
        if abs(u + (v * v if label is L.DE1 else -v * v)) < 1e-6:
            continue
        card = preimage_count(label.normal_form, (u, v))
        assert inside(u, v) == (card.infinite or card.count >= 1)


def test_convexity_needs_samples():
    with pytest.raises(ValueError):
        range_convexity(L.DH1.normal_form, n=50)


# -- collapses -------------------------------------------------------------------

def test_critical_set_class_surjection():
    image = {critical_set_class_of(label) for label in L}
    assert image == set(CriticalSetClass)
    merged = [{a, b} for a, b in itertools.combinations(L, 2)
              if critical_set_class_of(a) is critical_set_class_of(b)]
    assert sorted(map(sorted, merged)) == sorted(map(sorted, [
        {L.DE1, L.DH1}, {L.DE3, L.DP3}, {L.DH2, L.DP5}]))


def test_critical_set_class_examples():
    assert critical_set_class_of(L.DE1) is CriticalSetClass.LINE_TO_PARABOLA
    assert critical_set_class_of(L.DH2) is CriticalSetClass.PLANE_TO_RAY
    assert [lab for lab in L if critical_set_class_of(lab) is critical_set_class_of(L.E1)] == [L.E1]


@pytest.mark.parametrize("label", list(L))
def test_collapse_commutes_with_pipeline(label, rng):
    Q = compose(random_affine(rng), label.normal_form.to_float(), random_affine(rng))
    assert critical_set_class_of(classify(Q).label) is j0j1_class(Q)


def test_smooth_classes():
    assert len(SmoothClass) == 15
    assert {smooth_class_of(lab) for lab in L} == set(SmoothClass)
    assert SmoothClass.DE1_DH1_DP2.members == (L.DE1, L.DH1, L.DP2)
    assert SmoothClass.DP3_DP4.members == (L.DP3, L.DP4)
    assert smooth_class_of(L.E1) is SmoothClass.E1
    merged = [m for sc in SmoothClass if len(m := sc.members) > 1]
    assert len(merged) == 2


def test_polynomial_witnesses(rng):
    pts = rng.uniform(-3, 3, size=(100, 2))
    for w in POLYNOMIAL_WITNESSES:
        assert w.max_error(pts) <= 1e-10
    assert dp3_dp4_error(pts) <= 1e-10
    assert max(verify_smooth_witnesses(100, 1).values()) <= 1e-10


# -- separating invariants --------------------------------------------------------

@pytest.mark.parametrize("pair, name", [
    ((L.DE1, L.DH1), "range convexity"),
    ((L.DE3, L.DP3), "preimage topology"),
    ((L.DH2, L.DP5), "preimage topology"),
    ((L.DE2, L.P3), "line multiplicity of J0"),
])
def test_named_separators(pair, name):
    report = distinguishing_invariant(*pair)
    assert report.invariant == name
    assert report.separates


def test_de3_dp3_topology_values():
    report = distinguishing_invariant(L.DE3, L.DP3)
    assert "hyperbola" in report.left and "parabola" in report.right


def test_all_pairs_separated():
    for a, b in itertools.combinations(L, 2):
        assert distinguishing_invariant(a, b).separates


def test_same_label_rejected():
    with pytest.raises(ValueError):
        distinguishing_invariant(L.E1, L.E1)


# -- inverse -----------------------------------------------------------------------

def test_dp1_inverse_normal_form():
    assert quadratic_inverse(L.DP1.normal_form) == QuadraticMap(0, 0, 0, 0, 1, 0, 0, 0, -1, 1, 0, 0)


def test_henon_inverse_round_trip(rng):
    for Q in HENON_MAPS:
        Qi = quadratic_inverse(Q)
        pts = rng.uniform(-3, 3, size=(1000, 2))
        assert np.abs(evaluate(Q, evaluate(Qi, pts)) - pts).max() <= 1e-8
        assert np.abs(evaluate(Qi, evaluate(Q, pts)) - pts).max() <= 1e-8


def test_exact_conjugate_inverse_is_exact():
    rng = np.random.default_rng(11)
    for _ in range(10):
        h, k = (AffineMap2(*(Fraction(int(v), 4) for v in rng.integers(-8, 9, size=6)))
                for _ in range(2))
        if h.det() == 0 or k.det() == 0:
            continue
        Q = compose(k, L.DP1.normal_form, h)
        Qi = quadratic_inverse(Q)
        for p in [(0, 0), (1, 2), (Fraction(-3, 7), 5)]:
            assert evaluate(Q, evaluate(Qi, p)) == p


@pytest.mark.parametrize("label", [L.E1, L.DP2, L.DH2])
def test_inverse_rejects_other_classes(label):
    with pytest.raises(NotInvertibleError):
        quadratic_inverse(label.normal_form)


# -- injectivity on the critical set -----------------------------------------------

@pytest.mark.parametrize("label", [L.E1, L.E2, L.H1, L.P1, L.DE1, L.DH1, L.DP2])
def test_injective_classes(label):
    assert injective_on_critical_set(label.normal_form)


@pytest.mark.parametrize("label", [L.P2, L.P3, L.H2, L.H3, L.DE2])
def test_non_injective_classes(label):
    assert not injective_on_critical_set(label.normal_form)


@pytest.mark.parametrize("label", [L.DP1, L.DE3, L.DH2, L.DP3, L.DP4, L.DP5])
def test_injectivity_not_applicable(label):
    with pytest.raises(NotApplicableError):
        injective_on_critical_set(label.normal_form)


@pytest.mark.parametrize("label", [L.E1, L.P1, L.P2])
def test_injectivity_affine_invariant(label):
    rng = np.random.default_rng(list(L).index(label) + 200)
    want = injective_on_critical_set(label.normal_form)
    for _ in range(5):
        Q = compose(random_affine(rng), label.normal_form.to_float(), random_affine(rng))
        assert injective_on_critical_set(Q) == want


def test_cardinality_value_object():
    assert PreimageCardinality(3).value == 3
    assert not PreimageCardinality(0).infinite
