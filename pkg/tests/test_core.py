from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadmaps.acceptance import random_affine
from quadmaps.core import (
    AffineMap2,
    QuadraticMap,
    affine_invert,
    compose,
    evaluate,
    get_tolerance,
    homogeneous_part,
    is_zero,
    jacobian,
    max_coefficient_difference,
    precompose,
    to_number,
    tolerance,
)
from quadmaps.errors import NotQuadraticError, SingularMapError
from quadmaps.normalize import ClassLabel

E1 = ClassLabel.E1.normal_form
E2 = ClassLabel.E2.normal_form
DP1 = ClassLabel.DP1.normal_form

small_int = st.integers(-5, 5)
rational = st.fractions(min_value=-5, max_value=5, max_denominator=7)


def random_map(rng) -> QuadraticMap:
    return QuadraticMap(*rng.normal(size=12))


def test_evaluate_examples():
    assert evaluate(E2, (0, 0)) == (0, 0)
    assert evaluate(E1, (1, 1)) == (1, 1)
    assert evaluate(DP1, (2, 3)) == (7, 2)


def test_evaluate_array_matches_scalar(rng):
    Q = random_map(rng)
    pts = rng.normal(size=(10, 2))
    arr = evaluate(Q, pts)
    for p, v in zip(pts, arr):
        assert np.allclose(evaluate(Q, tuple(p)), v, rtol=1e-14, atol=1e-14)


def test_jacobian_examples():
    assert jacobian(E1, (0, 0)) == ((1, 0), (0, 0))
    for p in [(0, 0), (2, -3), (Fraction(1, 3), 7)]:
        (a, b), (c, d) = jacobian(DP1, p)
        assert a * d - b * c == -1


def test_jacobian_matches_finite_differences(rng):
    step = 1e-6
    for _ in range(5):
        Q = random_map(rng)
        pts = rng.normal(size=(100, 2))
        J = jacobian(Q, pts)
        for col, e in enumerate(np.eye(2)):
            fd = (evaluate(Q, pts + step * e) - evaluate(Q, pts - step * e)) / (2 * step)
            scale = np.maximum(np.abs(J[..., :, col]), 1.0)
            assert np.all(np.abs(fd - J[..., :, col]) <= 1e-6 * scale)


def test_compose_identity_leaves_map_unchanged(rng):
    Q = random_map(rng)
    assert compose(AffineMap2(), Q, AffineMap2()) == Q


def test_compose_rotation_pointwise(rng):
    r = AffineMap2.rotation(0.7)
    R = compose(r, E2, r)
    pts = rng.uniform(-3, 3, size=(100, 2))
    direct = r(evaluate(E2, affine_invert(r)(pts)))
    assert np.abs(evaluate(R, pts) - direct).max() <= 1e-10


def test_compose_hyperbolic_half_example():
    half = Fraction(1, 2)
    Q = QuadraticMap(1, 0, 1, 1, 0, 0, 0, 1, 0, -half, 0, 0)
    k = AffineMap2(1, 0, 0, -1, 0, 0)
    h = AffineMap2(0, -1, 1, 0, -half, half)
    # the example substitutes h directly, i.e. it is k o Q o h
    R = compose(k, Q, affine_invert(h))
    cleaned = QuadraticMap(*R.coefficients()[:5], 0, *R.coefficients()[6:11], 0)
    assert cleaned == ClassLabel.H2.normal_form


def test_compose_is_pointwise_k_q_hinv(rng):
    for _ in range(20):
        Q, h, k = random_map(rng), random_affine(rng), random_affine(rng)
        pts = rng.uniform(-2, 2, size=(50, 2))
        lhs = evaluate(compose(k, Q, h), pts)
        rhs = k(evaluate(Q, affine_invert(h)(pts)))
        assert np.abs(lhs - rhs).max() <= 1e-9 * max(1.0, np.abs(rhs).max())


def test_compose_rejects_singular_witness():
    singular = AffineMap2(1, 2, 2, 4, 0, 0)
    with pytest.raises(SingularMapError):
        compose(singular, E1, AffineMap2())
    with pytest.raises(SingularMapError):
        compose(AffineMap2(), E1, singular)


@settings(max_examples=40, deadline=None)
@given(st.lists(rational, min_size=12, max_size=12),
       st.lists(small_int, min_size=6, max_size=6),
       st.lists(small_int, min_size=6, max_size=6),
       st.lists(small_int, min_size=6, max_size=6),
       st.lists(small_int, min_size=6, max_size=6))
def test_compose_associative_exact(coeffs, h1, k1, h2, k2):
    Q = QuadraticMap(*coeffs)
    maps = [AffineMap2(*c) for c in (h1, k1, h2, k2)]
    if any(m.det() == 0 for m in maps):
        return
    h1, k1, h2, k2 = maps
    assert compose(k2, compose(k1, Q, h1), h2) == compose(k2 @ k1, Q, h2 @ h1)


@settings(max_examples=40, deadline=None)
@given(st.lists(rational, min_size=12, max_size=12),
       st.lists(small_int, min_size=6, max_size=6),
       st.lists(small_int, min_size=6, max_size=6))
def test_homogeneous_part_depends_only_on_quadratic_terms(coeffs, h, k):
    Q = QuadraticMap(*coeffs)
    h, k = AffineMap2(*h), AffineMap2(*k)
    if h.det() == 0 or k.det() == 0:
        return
    pq = homogeneous_part(Q).as_map()
    assert homogeneous_part(compose(k, Q, h)) == homogeneous_part(compose(k, pq, h))


def test_homogeneous_part_examples():
    assert homogeneous_part(E1).as_map() == E2
    dp3 = ClassLabel.DP3.normal_form
    assert homogeneous_part(dp3).as_map() == ClassLabel.DP5.normal_form


def test_affine_invert_examples(rng):
    assert affine_invert(AffineMap2()) == AffineMap2()
    assert affine_invert(AffineMap2.translation(2, -3)) == AffineMap2.translation(-2, 3)
    h = AffineMap2(2, 1, 1, 1, 1, 0)
    pts = rng.normal(size=(100, 2))
    assert np.abs(affine_invert(h)(h(pts)) - pts).max() <= 1e-12
    assert affine_invert(h) @ h == AffineMap2()


def test_affine_invert_singular():
    with pytest.raises(SingularMapError):
        affine_invert(AffineMap2(1, 1, 1, 1, 0, 0))


def test_exact_arithmetic_is_preserved():
    third = Fraction(1, 3)
    Q = QuadraticMap(third, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0)
    h = AffineMap2(1, third, 0, 2, 1, 0)
    R = compose(h, Q, h)
    assert R.is_exact
    assert all(isinstance(c, (int, Fraction)) for c in R.coefficients())


def test_precompose_matches_pointwise(rng):
    Q, g = random_map(rng), random_affine(rng)
    pts = rng.normal(size=(20, 2))
    assert np.allclose(evaluate(precompose(Q, g), pts), evaluate(Q, g(pts)), atol=1e-10)


def test_require_quadratic():
    with pytest.raises(NotQuadraticError):
        QuadraticMap(a10=1, b01=1).require_quadratic()
    assert QuadraticMap(a11=1).is_quadratic()


def test_from_coefficients_length():
    with pytest.raises(ValueError):
        QuadraticMap.from_coefficients([1, 2, 3])


def test_tolerance_context_restores():
    base = get_tolerance()
    with tolerance(1e-3):
        assert get_tolerance() == 1e-3
        assert is_zero(1e-4)
    assert get_tolerance() == base
    assert not is_zero(1e-4)


def test_is_zero_relative_to_scale():
    assert is_zero(1e-8, scale=100.0)
    assert not is_zero(1e-8, scale=1.0)
    assert is_zero(Fraction(0))
    assert not is_zero(Fraction(1, 10**20))


def test_to_number_parses_rationals():
    assert to_number("3/7", exact=True) == Fraction(3, 7)
    assert max_coefficient_difference(E1, E1) == 0


def test_str_is_readable():
    assert str(E1) == "(x^2 - y^2 + x, xy)"
    assert str(ClassLabel.DP5.normal_form) == "(x^2, 0)"
