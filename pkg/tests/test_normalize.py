from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadmaps import normalize
from quadmaps.acceptance import DELTOID_MAP, random_affine
from quadmaps.analyze import critical_set_class_of
from quadmaps.core import AffineMap2, HomogeneousPart, QuadraticMap, compose
from quadmaps.critical import j0j1_class
from quadmaps.errors import (
    NoGuaranteedRootError,
    NotQuadraticError,
    VerificationError,
    WrongBranchError,
)
from quadmaps.normalize import (
    ClassLabel,
    WitnessPair,
    classify,
    elliptic_cubic,
    expected_label,
    find_positive_cubic_root,
    hyperbolic_cubic,
    reduce_homogeneous,
    solve_elliptic_longcase,
    solve_hyperbolic_longcase,
    verify_witness,
)

L = ClassLabel


def cubic(c, p):
    """Exact value of the cubic at the float ``p``."""
    c3, c1, c0 = (Fraction(v) for v in c)
    q = Fraction(p)
    return c3 * q ** 3 + c1 * q + c0


def longcase_map(sign, b10):
    return QuadraticMap(1.0, 0.0, float(sign), 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, float(b10), 0.0, 0.0)


# -- homogeneous reduction --------------------------------------------------------

def test_homogeneous_already_normal():
    label, w = reduce_homogeneous(HomogeneousPart(1, 0, -1, 0, 1, 0))
    assert label is L.E2
    assert compose(w.k, L.E2.normal_form, w.h) == L.E2.normal_form


def test_homogeneous_xy_lands_in_de3():
    H0 = HomogeneousPart(0, 1, 0, 0, 0, 0)
    label, w = reduce_homogeneous(H0)
    assert label is L.DE3
    assert verify_witness(H0.as_map(), label, w) <= 1e-12


def test_homogeneous_h3_example():
    H0 = HomogeneousPart(1, 0, 1, 0, 2, 0)
    label, w = reduce_homogeneous(H0)
    assert label is L.H3
    assert verify_witness(H0.as_map(), label, w) <= 1e-12
    assert all(c == 0 for c in (w.h.t1, w.h.t2, w.k.t1, w.k.t2))


def test_homogeneous_rejects_zero():
    with pytest.raises(NotQuadraticError):
        reduce_homogeneous(HomogeneousPart())


@pytest.mark.parametrize("label", list(L))
def test_homogeneous_family_of_conjugates(label, rng):
    fam = label.family
    N = label.normal_form.to_float()
    for _ in range(10):
        Q = compose(random_affine(rng), N, random_affine(rng))
        got, w = reduce_homogeneous(HomogeneousPart(Q.a20, Q.a11, Q.a02, Q.b20, Q.b11, Q.b02))
        assert got is fam


# -- classify -------------------------------------------------------------------

@pytest.mark.parametrize("label", list(L))
def test_normal_forms_are_fixed_points(label):
    r = classify(label.normal_form)
    assert r.label is label
    assert r.residual == 0
    for m in (r.witness.h, r.witness.k):
        assert (m.m11, m.m12, m.m21, m.m22) == (1, 0, 0, 1)


def test_deltoid_map_is_e1():
    assert classify(DELTOID_MAP).label is L.E1


def test_negative_half_is_h2():
    Q = QuadraticMap(1, 0, 1, 1, 0, 0, 0, 1, 0, Fraction(-1, 2), 0, 0)
    r = classify(Q)
    assert r.label is L.H2
    assert r.residual <= 1e-12


@pytest.mark.parametrize("label", list(L))
def test_conjugation_invariance(label):
    rng = np.random.default_rng(list(L).index(label))
    N = label.normal_form.to_float()
    for _ in range(25):
        h, k = random_affine(rng), random_affine(rng)
        Q = compose(k, N, h)
        r = classify(Q)
        assert r.label is label
        assert r.residual <= 1e-6 * Q.scale()
        assert abs(r.witness.h.det()) > 1e-9 and abs(r.witness.k.det()) > 1e-9


def test_exact_rational_conjugates_classify_exactly():
    rng = np.random.default_rng(3)
    for label in L:
        for _ in range(3):
            h, k = (AffineMap2(*(Fraction(int(v), 3) for v in rng.integers(-6, 7, size=6)))
                    for _ in range(2))
            if h.det() == 0 or k.det() == 0:
                continue
            Q = compose(k, label.normal_form, h)
            assert Q.is_exact
            assert classify(Q).label is label


def sparse_maps(rng, count):
    for _ in range(count):
        coeffs = rng.integers(-2, 3, size=12).astype(float)
        coeffs[rng.random(12) < rng.uniform(0.2, 0.8)] = 0.0
        if rng.random() < 0.5:
            coeffs += 0.0  # integer pattern
        else:
            coeffs *= rng.normal(size=12)
        Q = QuadraticMap(*coeffs)
        if Q.is_quadratic():
            yield Q


def test_totality_and_table_consistency():
    rng = np.random.default_rng(2024)
    labels = set()
    for Q in list(sparse_maps(rng, 1500)) + [QuadraticMap(*rng.normal(size=12)) for _ in range(500)]:
        r = classify(Q)
        labels.add(r.label)
        assert r.residual <= 1e-6 * max(1.0, Q.scale())
        assert critical_set_class_of(r.label) is j0j1_class(Q)
    assert len(labels) == 18


def test_expected_label_agrees_with_classify(rng):
    for label in L:
        Q = compose(random_affine(rng), label.normal_form.to_float(), random_affine(rng))
        assert expected_label(Q) is label


def test_trace_names_steps():
    r = classify(L.H2.normal_form)
    names = [s.name for s in r.trace]
    assert names[-1] == "cleanup: constants"
    assert any("Q0→Q1" in n for n in names)
    assert all("step" in s.as_dict() for s in r.trace)


def test_not_quadratic():
    with pytest.raises(NotQuadraticError):
        classify(QuadraticMap(a10=1, b01=1, a00=3))


def test_verification_failure_carries_trace(monkeypatch):
    monkeypatch.setattr(normalize, "RESIDUAL_LIMIT", -1.0)
    with pytest.raises(VerificationError) as info:
        classify(DELTOID_MAP)
    assert info.value.trace
    assert info.value.residual is not None


def test_verify_flag_skips_check(monkeypatch):
    monkeypatch.setattr(normalize, "RESIDUAL_LIMIT", -1.0)
    assert classify(DELTOID_MAP, verify=False).label is L.E1


# -- cubic roots and long cases -------------------------------------------------

def test_cubics_at_zero_have_root_one():
    assert elliptic_cubic(0) == (4, -3, -1)
    assert hyperbolic_cubic(0) == (4, -3, -1)
    assert find_positive_cubic_root(4, -3, -1) == 1.0


def test_positive_root_over_grid():
    for b in np.arange(-10, 10.0001, 0.1):
        for make in (elliptic_cubic, hyperbolic_cubic):
            c = make(b)
            if c[0] <= 0:
                continue
            assert cubic(c, 0) == -1
            p = find_positive_cubic_root(*c)
            assert p > 0
            assert abs(cubic(c, p)) <= 1e-14
        assert elliptic_cubic(b)[0] == pytest.approx((8 * b * b + 2) ** 2)


@pytest.mark.parametrize("c", [(0, 1, -1), (-1, 1, -1), (1, 1, 0), (1, 1, 2)])
def test_cubic_root_preconditions(c):
    with pytest.raises(NoGuaranteedRootError):
        find_positive_cubic_root(*c)


def test_elliptic_longcase_at_zero_is_identity():
    sol = solve_elliptic_longcase(0.0)
    assert (sol.p0, sol.s0, sol.p, sol.s) == (1.0, 1.0, 1.0, 1.0)
    for name in ("r", "r0", "q0", "u0", "v0", "q", "v", "u"):
        assert getattr(sol, name) == 0


def test_elliptic_longcase_at_one():
    sol = solve_elliptic_longcase(1.0)
    assert sol.max_residual <= 1e-9
    assert sol.p0 * sol.s0 - sol.q0 * sol.r0 == pytest.approx(sol.p0 ** 2 + sol.r0 ** 2)
    assert sol.p0 * sol.s0 - sol.q0 * sol.r0 > 0
    assert sol.p * sol.s - sol.q * sol.r == pytest.approx(sol.p ** 2 + 4 * sol.r ** 2)
    assert sol.p * sol.s - sol.q * sol.r > 0
    Q2 = longcase_map(-1, 1.0)
    assert verify_witness(Q2, L.E1, WitnessPair(sol.h, sol.k)) <= 1e-7


def test_elliptic_longcase_random_end_to_end():
    rng = np.random.default_rng(5)
    for b in rng.uniform(-5, 5, 200):
        sol = solve_elliptic_longcase(b)
        assert verify_witness(longcase_map(-1, b), L.E1, WitnessPair(sol.h, sol.k)) <= 1e-7


def test_hyperbolic_longcase_quarter():
    sol = solve_hyperbolic_longcase(0.25)
    assert sol.max_residual <= 1e-9
    assert (8 * 0.25 ** 2 - 2) * sol.p0 - 1 != 0
    assert sol.q0 ** 2 - sol.s0 ** 2 != 0
    assert verify_witness(longcase_map(1, 0.25), L.H1, WitnessPair(sol.h, sol.k)) <= 1e-7


def test_hyperbolic_b10_two_classifies_h1():
    assert classify(longcase_map(1, 2.0)).label is L.H1


@pytest.mark.parametrize("b", [0.0, 0.5, -0.5, 0.5 + 1e-12])
def test_hyperbolic_wrong_branch(b):
    with pytest.raises(WrongBranchError):
        solve_hyperbolic_longcase(b)


@pytest.mark.parametrize("b, label", [(0.0, L.H1), (0.5, L.H2), (-0.5, L.H2), (0.3, L.H1)])
def test_hyperbolic_branches_route(b, label):
    assert classify(longcase_map(1, b)).label is label


def test_verify_witness_identity_and_sensitivity():
    ident = WitnessPair()
    assert verify_witness(L.E1.normal_form, L.E1, ident) == 0
    sol = solve_elliptic_longcase(1.0)
    h = sol.h
    bad = AffineMap2(h.m11 + 1e-2, h.m12, h.m21, h.m22, h.t1, h.t2)
    assert verify_witness(longcase_map(-1, 1.0), L.E1, WitnessPair(bad, sol.k)) > 1e-4


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=12, max_size=12))
def test_integer_maps_classify_consistently(coeffs):
    Q = QuadraticMap(*coeffs)
    if not Q.is_quadratic():
        return
    r = classify(Q)
    assert r.residual <= 1e-6 * max(1.0, Q.scale())
    assert critical_set_class_of(r.label) is j0j1_class(Q)
    assert classify(Q.to_float()).label is r.label
