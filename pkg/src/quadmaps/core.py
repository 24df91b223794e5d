"""Quadratic maps of the plane and affine changes of coordinates.

Coefficients are plain Python numbers.  A map whose coefficients are all
``int`` or :class:`fractions.Fraction` is *exact*: every operation in this
module keeps it exact.  Anything involving a ``float`` silently degrades to
float arithmetic, which is what the witness construction relies on when it
needs square or cubic roots.

Zero tests on floats use the module tolerance ``tau`` relative to a scale
(see :func:`is_zero`); exact values are compared with ``== 0``.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import NotQuadraticError, SingularMapError

Number = Union[int, float, Fraction]

DEFAULT_TOLERANCE = 1e-9

COEFF_NAMES = (
    "a20", "a11", "a02", "a10", "a01", "a00",
    "b20", "b11", "b02", "b10", "b01", "b00",
)

_tolerance: ContextVar[float] = ContextVar("quadmaps_tolerance", default=DEFAULT_TOLERANCE)


def get_tolerance() -> float:
    return _tolerance.get()


@contextmanager
def tolerance(tau: float):
    """Temporarily override the zero tolerance ``tau`` for the current context."""
    token = _tolerance.set(float(tau))
    try:
        yield
    finally:
        _tolerance.reset(token)


def is_exact(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def is_zero(v: Number, scale: float = 1.0, tol: float | None = None) -> bool:
    """Zero test: exact equality for rationals, ``|v| <= tol * scale`` for floats."""
    if is_exact(v):
        return v == 0
    if tol is None:
        tol = get_tolerance()
    return abs(v) <= tol * scale


def sign(v: Number, scale: float = 1.0, tol: float | None = None) -> int:
    if is_zero(v, scale, tol):
        return 0
    return 1 if v > 0 else -1


def to_number(value, exact: bool = False) -> Number:
    """Parse a coefficient from JSON-ish input.

    Strings such as ``"3/7"`` or ``"0.25"`` become :class:`Fraction` in exact
    mode.  Floats are converted exactly (``Fraction(0.1)`` is the binary
    value, not 1/10), so exact mode should be fed strings or ints.
    """
    if isinstance(value, bool):
        raise TypeError("boolean is not a coefficient")
    if exact:
        if isinstance(value, str):
            return Fraction(value.strip())
        if isinstance(value, (int, Fraction)):
            return Fraction(value)
        return Fraction(float(value))
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


def exact_sqrt(v: Number) -> Number:
    """Square root that stays rational when ``v`` is a rational perfect square."""
    if is_exact(v):
        v = Fraction(v)
        if v < 0:
            raise ValueError("negative argument")
        n, d = v.numerator, v.denominator
        rn, rd = math.isqrt(n), math.isqrt(d)
        if rn * rn == n and rd * rd == d:
            return Fraction(rn, rd)
    return math.sqrt(float(v))


# A component is the 6-tuple (c20, c11, c02, c10, c01, c00) of
# c20 x^2 + c11 xy + c02 y^2 + c10 x + c01 y + c00.

def _lin_product(l1, l2):
    """Product of two affine forms (alpha, beta, gamma) as a component 6-tuple."""
    a1, b1, g1 = l1
    a2, b2, g2 = l2
    return (
        a1 * a2,
        a1 * b2 + a2 * b1,
        b1 * b2,
        a1 * g2 + a2 * g1,
        b1 * g2 + b2 * g1,
        g1 * g2,
    )


def _precompose_component(c, g: "AffineMap2"):
    """Component ``c`` evaluated at ``g(x, y)``, expanded symbolically."""
    lx = (g.m11, g.m12, g.t1)
    ly = (g.m21, g.m22, g.t2)
    c20, c11, c02, c10, c01, c00 = c
    xx = _lin_product(lx, lx)
    xy = _lin_product(lx, ly)
    yy = _lin_product(ly, ly)
    out = []
    for i in range(6):
        v = c20 * xx[i] + c11 * xy[i] + c02 * yy[i]
        if i == 3:
            v += c10 * lx[0] + c01 * ly[0]
        elif i == 4:
            v += c10 * lx[1] + c01 * ly[1]
        elif i == 5:
            v += c10 * lx[2] + c01 * ly[2] + c00
        out.append(v)
    return tuple(out)


@dataclass(frozen=True)
class QuadraticMap:
    """``Q(x, y) = (a20 x^2 + a11 xy + a02 y^2 + a10 x + a01 y + a00, b20 x^2 + ... + b00)``.

    Coefficient order (also the serialization order) is ``COEFF_NAMES``.
    """

    a20: Number = 0
    a11: Number = 0
    a02: Number = 0
    a10: Number = 0
    a01: Number = 0
    a00: Number = 0
    b20: Number = 0
    b11: Number = 0
    b02: Number = 0
    b10: Number = 0
    b01: Number = 0
    b00: Number = 0

    @classmethod
    def from_coefficients(cls, coeffs: Sequence[Number]) -> "QuadraticMap":
        coeffs = tuple(coeffs)
        if len(coeffs) != 12:
            raise ValueError(f"expected 12 coefficients, got {len(coeffs)}")
        return cls(*coeffs)

    @classmethod
    def from_components(cls, first, second) -> "QuadraticMap":
        return cls(*first, *second)

    def coefficients(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))

    @property
    def first(self) -> tuple:
        return (self.a20, self.a11, self.a02, self.a10, self.a01, self.a00)

    @property
    def second(self) -> tuple:
        return (self.b20, self.b11, self.b02, self.b10, self.b01, self.b00)

    @property
    def is_exact(self) -> bool:
        return all(is_exact(c) for c in self.coefficients())

    def scale(self) -> float:
        """Largest coefficient magnitude (at least a tiny positive floor)."""
        return max(max(abs(float(c)) for c in self.coefficients()), 1e-300)

    def quadratic_scale(self) -> float:
        return max(abs(float(c)) for c in
                   (self.a20, self.a11, self.a02, self.b20, self.b11, self.b02))

    def is_quadratic(self, tol: float | None = None) -> bool:
        quad = (self.a20, self.a11, self.a02, self.b20, self.b11, self.b02)
        return not all(is_zero(c, self.scale(), tol) for c in quad)

    def require_quadratic(self, tol: float | None = None) -> None:
        if not self.is_quadratic(tol):
            raise NotQuadraticError("all degree-two coefficients vanish")

    def to_float(self) -> "QuadraticMap":
        return QuadraticMap(*(float(c) for c in self.coefficients()))

    def without_constants(self) -> "QuadraticMap":
        c = list(self.coefficients())
        c[5] = 0
        c[11] = 0
        return QuadraticMap(*c)

    def __call__(self, p):
        return evaluate(self, p)

    def __str__(self) -> str:
        return f"({_format_component(self.first)}, {_format_component(self.second)})"


def _format_component(c) -> str:
    monos = ("x^2", "xy", "y^2", "x", "y", "")
    terms = []
    for coef, mono in zip(c, monos):
        if coef == 0:
            continue
        if isinstance(coef, float):
            s = f"{coef:.6g}"
        else:
            s = str(coef)
        if mono and s in ("1", "1.0"):
            s = ""
        elif mono and s in ("-1", "-1.0"):
            s = "-"
        terms.append(f"{s}{mono}" if mono else s)
    if not terms:
        return "0"
    out = terms[0]
    for t in terms[1:]:
        out += f" - {t[1:]}" if t.startswith("-") else f" + {t}"
    return out


@dataclass(frozen=True)
class HomogeneousPart:
    """Degree-two part ``(a20 x^2 + a11 xy + a02 y^2, b20 x^2 + b11 xy + b02 y^2)``."""

    a20: Number = 0
    a11: Number = 0
    a02: Number = 0
    b20: Number = 0
    b11: Number = 0
    b02: Number = 0

    def as_map(self) -> QuadraticMap:
        return QuadraticMap(self.a20, self.a11, self.a02, 0, 0, 0,
                            self.b20, self.b11, self.b02, 0, 0, 0)

    def coefficients(self) -> tuple:
        return (self.a20, self.a11, self.a02, self.b20, self.b11, self.b02)


@dataclass(frozen=True)
class AffineMap2:
    """``(x, y) -> (m11 x + m12 y + t1, m21 x + m22 y + t2)``."""

    m11: Number = 1
    m12: Number = 0
    m21: Number = 0
    m22: Number = 1
    t1: Number = 0
    t2: Number = 0

    @classmethod
    def identity(cls) -> "AffineMap2":
        return cls()

    @classmethod
    def translation(cls, t1: Number, t2: Number) -> "AffineMap2":
        return cls(1, 0, 0, 1, t1, t2)

    @classmethod
    def linear(cls, m11, m12, m21, m22) -> "AffineMap2":
        return cls(m11, m12, m21, m22, 0, 0)

    @classmethod
    def from_matrix(cls, m, t=(0, 0)) -> "AffineMap2":
        return cls(m[0][0], m[0][1], m[1][0], m[1][1], t[0], t[1])

    @classmethod
    def rotation(cls, theta: float) -> "AffineMap2":
        c, s = math.cos(theta), math.sin(theta)
        return cls(c, -s, s, c, 0.0, 0.0)

    @classmethod
    def swap(cls) -> "AffineMap2":
        return cls(0, 1, 1, 0, 0, 0)

    def coefficients(self) -> tuple:
        return (self.m11, self.m12, self.m21, self.m22, self.t1, self.t2)

    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=float)

    def det(self) -> Number:
        return self.m11 * self.m22 - self.m12 * self.m21

    def linear_scale(self) -> float:
        return max(abs(float(v)) for v in (self.m11, self.m12, self.m21, self.m22))

    def is_invertible(self, tol: float | None = None) -> bool:
        return not is_zero(self.det(), max(self.linear_scale(), 1e-300) ** 2, tol)

    def inverse(self) -> "AffineMap2":
        return affine_invert(self)

    def to_float(self) -> "AffineMap2":
        return AffineMap2(*(float(v) for v in self.coefficients()))

    def __matmul__(self, other: "AffineMap2") -> "AffineMap2":
        """``(self @ other)(p) == self(other(p))``."""
        return AffineMap2(
            self.m11 * other.m11 + self.m12 * other.m21,
            self.m11 * other.m12 + self.m12 * other.m22,
            self.m21 * other.m11 + self.m22 * other.m21,
            self.m21 * other.m12 + self.m22 * other.m22,
            self.m11 * other.t1 + self.m12 * other.t2 + self.t1,
            self.m21 * other.t1 + self.m22 * other.t2 + self.t2,
        )

    def __call__(self, p):
        if isinstance(p, np.ndarray):
            p = np.asarray(p, dtype=float)
            x, y = p[..., 0], p[..., 1]
            return np.stack([float(self.m11) * x + float(self.m12) * y + float(self.t1),
                             float(self.m21) * x + float(self.m22) * y + float(self.t2)], axis=-1)
        x, y = p
        return (self.m11 * x + self.m12 * y + self.t1,
                self.m21 * x + self.m22 * y + self.t2)


def affine_invert(h: AffineMap2) -> AffineMap2:
    """Inverse affine map; exact for rational coefficients.

    Raises:
        SingularMapError: if ``|det|`` is within tolerance of zero, relative to
            the squared size of the linear part.
    """
    if not h.is_invertible():
        raise SingularMapError(f"affine map is singular (det={h.det()!r})")
    d = h.det()
    if is_exact(d):
        d = Fraction(d)
    i11, i12 = h.m22 / d, -h.m12 / d
    i21, i22 = -h.m21 / d, h.m11 / d
    return AffineMap2(i11, i12, i21, i22,
                      -(i11 * h.t1 + i12 * h.t2),
                      -(i21 * h.t1 + i22 * h.t2))


def evaluate(Q: QuadraticMap, p):
    """Evaluate ``Q`` at a point ``(x, y)`` or at an array of points of shape ``(..., 2)``."""
    if isinstance(p, np.ndarray):
        x, y = p[..., 0], p[..., 1]
        c = [float(v) for v in Q.coefficients()]
        u = c[0] * x * x + c[1] * x * y + c[2] * y * y + c[3] * x + c[4] * y + c[5]
        v = c[6] * x * x + c[7] * x * y + c[8] * y * y + c[9] * x + c[10] * y + c[11]
        return np.stack([u, v], axis=-1)
    x, y = p
    return (
        Q.a20 * x * x + Q.a11 * x * y + Q.a02 * y * y + Q.a10 * x + Q.a01 * y + Q.a00,
        Q.b20 * x * x + Q.b11 * x * y + Q.b02 * y * y + Q.b10 * x + Q.b01 * y + Q.b00,
    )


def jacobian(Q: QuadraticMap, p):
    """Jacobian matrix ``DQ(p)``; shape ``(2, 2)`` or ``(..., 2, 2)`` for arrays."""
    if isinstance(p, np.ndarray):
        x, y = p[..., 0], p[..., 1]
        a20, a11, a02, a10, a01, _, b20, b11, b02, b10, b01, _ = (float(v) for v in Q.coefficients())
        out = np.empty(p.shape[:-1] + (2, 2))
        out[..., 0, 0] = 2 * a20 * x + a11 * y + a10
        out[..., 0, 1] = a11 * x + 2 * a02 * y + a01
        out[..., 1, 0] = 2 * b20 * x + b11 * y + b10
        out[..., 1, 1] = b11 * x + 2 * b02 * y + b01
        return out
    x, y = p
    return (
        (2 * Q.a20 * x + Q.a11 * y + Q.a10, Q.a11 * x + 2 * Q.a02 * y + Q.a01),
        (2 * Q.b20 * x + Q.b11 * y + Q.b10, Q.b11 * x + 2 * Q.b02 * y + Q.b01),
    )


def precompose(Q: QuadraticMap, g: AffineMap2) -> QuadraticMap:
    """``Q o g`` by symbolic expansion."""
    return QuadraticMap.from_components(_precompose_component(Q.first, g),
                                        _precompose_component(Q.second, g))


def postcompose(k: AffineMap2, Q: QuadraticMap) -> QuadraticMap:
    """``k o Q``."""
    f, s = Q.first, Q.second
    first = [k.m11 * a + k.m12 * b for a, b in zip(f, s)]
    second = [k.m21 * a + k.m22 * b for a, b in zip(f, s)]
    first[5] += k.t1
    second[5] += k.t2
    return QuadraticMap.from_components(first, second)


def compose(k: AffineMap2, Q: QuadraticMap, h: AffineMap2) -> QuadraticMap:
    """``k o Q o h^-1``, the action of the witness pair ``(h, k)`` on ``Q``.

    Raises:
        SingularMapError: if ``h`` or ``k`` is singular.
    """
    if not k.is_invertible():
        raise SingularMapError("range map k is singular")
    return postcompose(k, precompose(Q, affine_invert(h)))


def homogeneous_part(Q: QuadraticMap) -> HomogeneousPart:
    return HomogeneousPart(Q.a20, Q.a11, Q.a02, Q.b20, Q.b11, Q.b02)


def max_coefficient_difference(P: QuadraticMap, Q: QuadraticMap) -> float:
    return max(abs(float(a - b)) for a, b in zip(P.coefficients(), Q.coefficients()))


def as_points(points: Iterable) -> np.ndarray:
    return np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
