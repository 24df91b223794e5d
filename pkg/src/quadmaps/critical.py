"""Critical set ``J0`` (a conic), critical image ``J1 = Q(J0)``, and cusps.

The Jacobian determinant of a quadratic map is a quadratic polynomial, so
``J0`` is a possibly degenerate conic.  Its type, together with a small
amount of information about how ``Q`` acts on the line components, decides
which of the fifteen critical-set classes a map belongs to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .core import (
    QuadraticMap,
    evaluate,
    get_tolerance,
    is_exact,
    is_zero,
    jacobian,
    sign,
)
from .errors import EmptySetError, NotACurveError, QuadMapError

DEFAULT_SAMPLES = 2048
_PHASE = 0.3819660112501051


class ConicTag(str, Enum):
    ELLIPSE = "ellipse"
    HYPERBOLA = "hyperbola"
    PARABOLA = "parabola"
    POINT = "point"
    INTERSECTING_LINES = "intersecting lines"
    PARALLEL_LINES = "parallel lines"
    COINCIDENT_LINES = "coincident lines"
    SINGLE_LINE = "single line"
    ALL_PLANE = "all of R^2"
    EMPTY = "empty"


class CriticalSetClass(str, Enum):
    """The fifteen (J0, J1) cases; values are the case numbers."""

    EMPTY = "1"
    POINT = "2"
    ELLIPSE = "3"
    HYPERBOLA = "4"
    CROSSING_TWO_RAYS = "5a"
    CROSSING_RAY_PARABOLA = "5b"
    PARABOLA = "6"
    PARALLEL_LINE_POINT = "7a"
    DOUBLE_LINE_POINT = "7b"
    LINE_TO_POINT = "8a"
    LINE_TO_LINE = "8b"
    LINE_TO_PARABOLA = "8c"
    PLANE_TO_LINE = "9a"
    PLANE_TO_RAY = "9b"
    PLANE_TO_PARABOLA = "9c"

    @property
    def description(self) -> str:
        return _CASE_TEXT[self]

    @property
    def j1_tag(self) -> str:
        return _J1_TAG[self]


_CASE_TEXT = {
    CriticalSetClass.EMPTY: "J0 empty; J1 empty",
    CriticalSetClass.POINT: "J0 a point; J1 a point",
    CriticalSetClass.ELLIPSE: "J0 an ellipse; J1 a closed curve with three cusps",
    CriticalSetClass.HYPERBOLA: "J0 a hyperbola; J1 two curves, one with a single cusp",
    CriticalSetClass.CROSSING_TWO_RAYS: "J0 two intersecting lines; J1 two rays from one point",
    CriticalSetClass.CROSSING_RAY_PARABOLA: "J0 two intersecting lines; J1 a ray and a parabola",
    CriticalSetClass.PARABOLA: "J0 a parabola; J1 a curve with a single cusp",
    CriticalSetClass.PARALLEL_LINE_POINT: "J0 two parallel lines; J1 a line and a point",
    CriticalSetClass.DOUBLE_LINE_POINT: "J0 a double line; J1 a point",
    CriticalSetClass.LINE_TO_POINT: "J0 a single line; J1 a point",
    CriticalSetClass.LINE_TO_LINE: "J0 a single line; J1 a line",
    CriticalSetClass.LINE_TO_PARABOLA: "J0 a single line; J1 a parabola",
    CriticalSetClass.PLANE_TO_LINE: "J0 the plane; J1 a line",
    CriticalSetClass.PLANE_TO_RAY: "J0 the plane; J1 a ray",
    CriticalSetClass.PLANE_TO_PARABOLA: "J0 the plane; J1 a parabola",
}

_J1_TAG = {
    CriticalSetClass.EMPTY: "empty",
    CriticalSetClass.POINT: "point",
    CriticalSetClass.ELLIPSE: "3-cusped curve",
    CriticalSetClass.HYPERBOLA: "two curves, one with cusp",
    CriticalSetClass.CROSSING_TWO_RAYS: "ray + ray",
    CriticalSetClass.CROSSING_RAY_PARABOLA: "parabola + ray",
    CriticalSetClass.PARABOLA: "curve with cusp",
    CriticalSetClass.PARALLEL_LINE_POINT: "line + point",
    CriticalSetClass.DOUBLE_LINE_POINT: "point",
    CriticalSetClass.LINE_TO_POINT: "point",
    CriticalSetClass.LINE_TO_LINE: "line",
    CriticalSetClass.LINE_TO_PARABOLA: "parabola",
    CriticalSetClass.PLANE_TO_LINE: "line",
    CriticalSetClass.PLANE_TO_RAY: "ray",
    CriticalSetClass.PLANE_TO_PARABOLA: "parabola",
}

_SIMPLE_CASES = {
    ConicTag.EMPTY: CriticalSetClass.EMPTY,
    ConicTag.POINT: CriticalSetClass.POINT,
    ConicTag.ELLIPSE: CriticalSetClass.ELLIPSE,
    ConicTag.HYPERBOLA: CriticalSetClass.HYPERBOLA,
    ConicTag.PARABOLA: CriticalSetClass.PARABOLA,
    ConicTag.PARALLEL_LINES: CriticalSetClass.PARALLEL_LINE_POINT,
    ConicTag.COINCIDENT_LINES: CriticalSetClass.DOUBLE_LINE_POINT,
}


def _exactify(v):
    return Fraction(v) if is_exact(v) else v


@dataclass(frozen=True)
class ConicCoefficients:
    """``A x^2 + B xy + C y^2 + D x + E y + F``."""

    A: object = 0
    B: object = 0
    C: object = 0
    D: object = 0
    E: object = 0
    F: object = 0

    def __post_init__(self):
        for name in "ABCDEF":
            object.__setattr__(self, name, _exactify(getattr(self, name)))

    def coefficients(self) -> tuple:
        return (self.A, self.B, self.C, self.D, self.E, self.F)

    def scale(self) -> float:
        return max(abs(float(c)) for c in self.coefficients())

    def evaluate(self, p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        A, B, C, D, E, F = (float(c) for c in self.coefficients())
        return A * x * x + B * x * y + C * y * y + D * x + E * y + F

    def _matrix(self):
        A, B, C, D, E, F = self.coefficients()
        half = Fraction(1, 2) if all(is_exact(c) for c in self.coefficients()) else 0.5
        b, d, e = B * half, D * half, E * half
        return ((A, b, d), (b, C, e), (d, e, F))

    def bordered_det(self):
        (A, b, d), (_, C, e), (_, _, F) = self._matrix()
        return A * (C * F - e * e) - b * (b * F - e * d) + d * (b * e - C * d)

    def bordered_det_magnitude(self) -> float:
        """Sum of absolute Laplace terms of the bordered determinant.

        Rounding errors in ``bordered_det`` are of order ``eps`` times this,
        so it is the natural scale for deciding whether the conic is
        degenerate.
        """
        m = [[abs(float(v)) for v in row] for row in self._matrix()]
        total = 0.0
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            total += m[0][i] * (m[1][j] * m[2][k] + m[1][k] * m[2][j])
        return total

    def discriminant(self):
        return self.B * self.B - 4 * self.A * self.C

    def __str__(self) -> str:
        return " + ".join(f"{c}{m}" for c, m in zip(self.coefficients(), ("x^2", "xy", "y^2", "x", "y", "")))


def det_jacobian_conic(Q: QuadraticMap) -> ConicCoefficients:
    """Coefficients of ``det DQ(x, y)`` through the 2x2 minors ``X_ij:kl = a_ij b_kl - a_kl b_ij``."""
    a = {"20": Q.a20, "11": Q.a11, "02": Q.a02, "10": Q.a10, "01": Q.a01}
    b = {"20": Q.b20, "11": Q.b11, "02": Q.b02, "10": Q.b10, "01": Q.b01}

    def X(ij, kl):
        return a[ij] * b[kl] - a[kl] * b[ij]

    return ConicCoefficients(
        A=2 * X("20", "11"),
        B=4 * X("20", "02"),
        C=2 * X("11", "02"),
        D=2 * X("20", "01") - X("11", "10"),
        E=X("11", "01") - 2 * X("02", "10"),
        F=X("10", "01"),
    )


@dataclass(frozen=True)
class CurvePiece:
    """One parametrized component of a conic.

    ``kind`` is one of ``ellipse``, ``branch`` (one hyperbola branch),
    ``parabola`` or ``line``.  ``origin``, ``u``, ``v`` are 2-vectors; the
    meaning of ``coeffs`` depends on ``kind``.
    """

    kind: str
    origin: tuple
    u: tuple
    v: tuple = (0.0, 0.0)
    coeffs: tuple = ()

    @property
    def closed(self) -> bool:
        return self.kind == "ellipse"

    def at(self, t):
        """Points and tangent vectors at parameter values ``t``."""
        t = np.asarray(t, dtype=float)
        o, u, v = (np.asarray(w, dtype=float) for w in (self.origin, self.u, self.v))
        tt = t[..., None]
        if self.kind == "ellipse":
            a, b = self.coeffs
            pts = o + a * np.cos(tt) * u + b * np.sin(tt) * v
            tan = -a * np.sin(tt) * u + b * np.cos(tt) * v
        elif self.kind == "branch":
            sgn, a, b = self.coeffs
            pts = o + sgn * a * np.cosh(tt) * u + b * np.sinh(tt) * v
            tan = sgn * a * np.sinh(tt) * u + b * np.cosh(tt) * v
        elif self.kind == "parabola":
            lam, mu, g, F = self.coeffs
            along = -(lam * tt * tt + mu * tt + F) / g
            pts = o + tt * u + along * v
            tan = u + (-(2 * lam * tt + mu) / g) * v
        elif self.kind == "line":
            pts = o + tt * u
            tan = np.broadcast_to(u, pts.shape).copy()
        else:
            raise ValueError(f"unknown piece kind {self.kind!r}")
        return pts, tan

    def size(self) -> float:
        """Rough geometric extent, used to choose sampling ranges."""
        extent = float(np.hypot(*self.origin))
        if self.kind in ("ellipse", "branch"):
            extent += max(abs(c) for c in self.coeffs[-2:])
        return extent

    def param_range(self, R: float) -> tuple[float, float]:
        if self.kind == "ellipse":
            return (0.0, 2 * math.pi)
        if self.kind == "branch":
            _, a, b = self.coeffs
            S = max(math.asinh(R / max(b, 1e-300)), math.acosh(max(R / max(a, 1e-300), 1.0)))
            S = min(S, 40.0)
            return (-S, S)
        if self.kind == "parabola":
            lam, mu, _, _ = self.coeffs
            sv = -mu / (2 * lam)
            return (sv - R, sv + R)
        return (-R, R)

    def sample_params(self, R: float, n: int) -> np.ndarray:
        """``n`` parameter values covering the piece out to distance about ``R``.

        Parabolas are sampled as ``t = vertex + l sinh(s)`` with ``s`` uniform,
        where ``l`` is the radius of curvature at the vertex: a narrow
        parabola turns through most of its angle within ``l`` of the vertex.
        """
        if self.closed:
            return np.linspace(0.0, 2 * math.pi, n, endpoint=False)
        t0, t1 = self.param_range(R)
        if self.kind == "parabola":
            lam, mu, g, _ = self.coeffs
            ell = min(abs(g) / (2 * abs(lam)), R)
            S = math.asinh(R / ell)
            return -mu / (2 * lam) + ell * np.sinh(np.linspace(-S, S, n))
        return np.linspace(t0, t1, n)


@dataclass(frozen=True)
class ConicClass:
    """Classified conic with enough geometry to sample it."""

    tag: ConicTag
    center: tuple | None = None
    axes: tuple = ()
    lines: tuple = ()
    pieces: tuple = ()

    @property
    def is_curve(self) -> bool:
        return bool(self.pieces)


def _real_line(point, direction) -> CurvePiece:
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    p = np.asarray(point, dtype=float)
    p = p - np.dot(p, d) * d  # foot of the perpendicular from the origin
    return CurvePiece("line", tuple(p), tuple(d))


def _center_value(c: ConicCoefficients, center, big_delta: int, delta: int, tol: float):
    """Value of a central conic at its centre, and the sign used to decide degeneracy.

    The centre is a stationary point, so errors in it only enter the value at
    second order, and the value is compared with the magnitudes of its own
    terms.  Testing the bordered determinant instead multiplies this by the
    relative size of ``B^2 - 4AC``, which misjudges eccentric conics far from
    the origin.  Exact coefficients use ``sign(det3) * sign(det2)``.
    """
    x, y = (float(v) for v in center)
    terms = [float(v) * m for v, m in zip(c.coefficients(), (x * x, x * y, y * y, x, y, 1.0))]
    value = math.fsum(terms)
    if all(is_exact(v) for v in c.coefficients()):
        return value, big_delta * -delta  # det2 = -(B^2 - 4AC) / 4
    return value, sign(value, math.fsum(abs(t) for t in terms), tol)


def classify_conic(c: ConicCoefficients, scale: float | None = None,
                   tol: float | None = None) -> ConicClass:
    """Classify ``c`` as one of the ten conic outcomes.

    Args:
        c: conic coefficients.
        scale: reference magnitude for the degree-one zero tests; sign tests
            of degree-``k`` invariants use ``scale**k``.  Defaults to the
            largest coefficient magnitude.
        tol: zero tolerance, defaults to the module tolerance.
    """
    u = c.scale() if scale is None else float(scale)
    if u == 0:
        return ConicClass(ConicTag.ALL_PLANE)
    if tol is None:
        tol = get_tolerance()
    A, B, C, D, E, F = c.coefficients()

    def zero(v, deg=1):
        return is_zero(v, u ** deg, tol)

    if zero(A) and zero(B) and zero(C):
        if zero(D) and zero(E):
            return ConicClass(ConicTag.ALL_PLANE if zero(F) else ConicTag.EMPTY)
        n = np.array([float(D), float(E)])
        nn = np.linalg.norm(n)
        p0 = -float(F) * n / nn ** 2
        line = _real_line(p0, (-n[1], n[0]))
        return ConicClass(ConicTag.SINGLE_LINE, lines=((line.origin, line.u),), pieces=(line,))

    Af_, Bf_, Cf_ = abs(float(A)), abs(float(B)), abs(float(C))
    delta = sign(c.discriminant(), Bf_ * Bf_ + 4 * Af_ * Cf_, tol)
    big_delta = sign(c.bordered_det(), c.bordered_det_magnitude(), tol)

    Af, Bf, Cf, Df, Ef, Ff = (float(v) for v in c.coefficients())
    Aq = np.array([[Af, Bf / 2], [Bf / 2, Cf]])
    lin = np.array([Df, Ef])

    if delta != 0:
        lam, vecs = np.linalg.eigh(Aq)
        # the eigenvalue signs disagree with delta only when rounding set its sign
        if np.linalg.det(Aq) == 0 or np.sign(lam[0] * lam[1]) != -delta:
            raise QuadMapError("discriminant is nonzero only by rounding; raise the tolerance")
        center = np.linalg.solve(Aq, -lin / 2)
        e1, e2 = vecs[:, 0], vecs[:, 1]
        ctr = tuple(center)
        f_center, f_sign = _center_value(c, center, big_delta, delta, tol)
        if delta < 0:
            if f_sign == 0:
                return ConicClass(ConicTag.POINT, center=ctr)
            if f_sign * (lam[0] + lam[1]) > 0:
                return ConicClass(ConicTag.EMPTY, center=ctr)
            a = math.sqrt(max(-f_center / lam[0], 0.0))
            b = math.sqrt(max(-f_center / lam[1], 0.0))
            piece = CurvePiece("ellipse", ctr, tuple(e1), tuple(e2), (a, b))
            return ConicClass(ConicTag.ELLIPSE, center=ctr,
                              axes=((tuple(e1), a), (tuple(e2), b)), pieces=(piece,))
        if f_sign == 0:
            r = math.sqrt(-lam[0] / lam[1]) if lam[1] != 0 else 0.0
            # lam[0] < 0 < lam[1]; lam0 s^2 + lam1 t^2 = 0  =>  t = +-sqrt(-lam0/lam1) s
            lines = []
            for sgn_ in (1.0, -1.0):
                d = e1 + sgn_ * r * e2
                d = d / np.linalg.norm(d)
                lines.append(CurvePiece("line", ctr, tuple(d)))
            return ConicClass(ConicTag.INTERSECTING_LINES, center=ctr,
                              lines=tuple((p.origin, p.u) for p in lines), pieces=tuple(lines))
        # hyperbola: transverse axis is the eigen-direction with -f/lam > 0
        if -f_center / lam[0] > 0:
            ea, la, eb, lb = e1, lam[0], e2, lam[1]
        else:
            ea, la, eb, lb = e2, lam[1], e1, lam[0]
        a = math.sqrt(-f_center / la)
        b = math.sqrt(f_center / lb)
        pieces = tuple(CurvePiece("branch", ctr, tuple(ea), tuple(eb), (s, a, b)) for s in (1.0, -1.0))
        return ConicClass(ConicTag.HYPERBOLA, center=ctr,
                          axes=((tuple(ea), a), (tuple(eb), b)), pieces=pieces)

    # delta == 0: quadratic part has rank one, lam * (n . p)^2
    lam_all, vecs = np.linalg.eigh(Aq)
    i = int(np.argmax(np.abs(lam_all)))
    lam = float(lam_all[i])
    n = vecs[:, i]
    d = vecs[:, 1 - i]
    mu = float(lin @ n)
    g = float(lin @ d)
    if big_delta != 0:
        piece = CurvePiece("parabola", (0.0, 0.0), tuple(n), tuple(d), (lam, mu, g, Ff))
        return ConicClass(ConicTag.PARABOLA, axes=((tuple(n), lam),), pieces=(piece,))
    half = Fraction(1, 2) if all(is_exact(v) for v in c.coefficients()) else 0.5
    K = A * F - (D * half) ** 2 + C * F - (E * half) ** 2
    k_scale = (abs(float(A * F)) + abs(float(C * F))
               + (float(D) ** 2 + float(E) ** 2) / 4)
    k_sign = sign(K, k_scale, tol)
    if k_sign > 0:
        return ConicClass(ConicTag.EMPTY)
    if k_sign == 0:
        s0 = -mu / (2 * lam)
        line = _real_line(s0 * n, d)
        return ConicClass(ConicTag.COINCIDENT_LINES, lines=((line.origin, line.u),), pieces=(line,))
    disc = math.sqrt(max(mu * mu - 4 * lam * Ff, 0.0))
    pieces = tuple(_real_line(((-mu + s * disc) / (2 * lam)) * n, d) for s in (1.0, -1.0))
    return ConicClass(ConicTag.PARALLEL_LINES, lines=tuple((p.origin, p.u) for p in pieces),
                      pieces=pieces)


def classify_critical_conic(Q: QuadraticMap, tol: float | None = None) -> ConicClass:
    """``classify_conic`` of ``det DQ`` with zero tests scaled by ``scale(Q)**2``."""
    return classify_conic(det_jacobian_conic(Q), scale=Q.scale() ** 2, tol=tol)


# -- curve samples ---------------------------------------------------------

@dataclass(frozen=True)
class SampledComponent:
    """A sampled piece of ``J0`` (``source``) and its image under ``Q``."""

    kind: str
    source: np.ndarray
    image: np.ndarray
    params: np.ndarray | None = None
    piece: CurvePiece | None = None
    closed: bool = False

    def __post_init__(self):
        for name in ("source", "image", "params"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)


@dataclass(frozen=True)
class Cusp:
    source: tuple
    image: tuple
    component: int
    param: float


@dataclass(frozen=True)
class CurveSample:
    components: tuple = ()
    cusps: tuple = ()
    j1_kind: str | None = None

    @property
    def source_points(self) -> np.ndarray:
        if not self.components:
            return np.empty((0, 2))
        return np.concatenate([c.source for c in self.components])

    @property
    def image_points(self) -> np.ndarray:
        if not self.components:
            return np.empty((0, 2))
        return np.concatenate([c.image for c in self.components])


def _sampling_radius(conic: ConicClass) -> float:
    data = [p.size() for p in conic.pieces]
    if conic.center is not None:
        data.append(float(np.hypot(*conic.center)))
    return 10.0 * (1.0 + max(data, default=0.0))


def _sample_piece(Q: QuadraticMap, piece: CurvePiece, n: int, R: float) -> SampledComponent:
    t = piece.sample_params(R, n)
    pts, _ = piece.at(t)
    return SampledComponent(piece.kind, pts, evaluate(Q, pts), t, piece, piece.closed)


def critical_set(Q: QuadraticMap, n: int = DEFAULT_SAMPLES,
                 tol: float | None = None) -> tuple[ConicClass, CurveSample]:
    """Classify ``J0`` and sample each of its components with ``n`` points.

    Point and empty critical sets give an empty sample; ``J0 = R^2`` gives a
    square reference grid of about ``n`` points.
    """
    conic = classify_critical_conic(Q, tol)
    if conic.tag in (ConicTag.EMPTY, ConicTag.POINT):
        return conic, CurveSample()
    if conic.tag is ConicTag.ALL_PLANE:
        m = max(int(math.sqrt(n)), 2)
        R = 10.0
        g = np.linspace(-R, R, m)
        X, Y = np.meshgrid(g, g)
        pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
        return conic, CurveSample((SampledComponent("grid", pts, evaluate(Q, pts)),))
    R = _sampling_radius(conic)
    comps = tuple(_sample_piece(Q, p, n, R) for p in conic.pieces)
    return conic, CurveSample(comps)


# -- how Q acts on a line, and on the plane when J0 = R^2 --------------------

def line_image_kind(Q: QuadraticMap, point, direction, tol: float | None = None) -> str:
    """Shape of ``Q(point + t * direction)``: point, line, ray or parabola.

    ``Q(p0 + t d) = Q(p0) + t DQ(p0) d + t^2 piQ(d)``; the image is a ray
    exactly when the linear and quadratic vectors are parallel.
    """
    p0 = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    Qf = Q.to_float()
    w = jacobian(Qf, p0[None, :])[0] @ d
    u = np.array([Qf.a20 * d[0] ** 2 + Qf.a11 * d[0] * d[1] + Qf.a02 * d[1] ** 2,
                  Qf.b20 * d[0] ** 2 + Qf.b11 * d[0] * d[1] + Qf.b02 * d[1] ** 2])
    s = Q.scale()
    reach = 1.0 + float(np.linalg.norm(p0))
    u_zero = is_zero(float(np.linalg.norm(u)), s, tol)
    w_zero = is_zero(float(np.linalg.norm(w)), s * reach, tol)
    if u_zero:
        return "point" if w_zero else "line"
    if w_zero:
        return "ray"
    cross = w[0] * u[1] - w[1] * u[0]
    return "ray" if is_zero(float(cross), s * s * reach, tol) else "parabola"


@dataclass(frozen=True)
class PlaneImage:
    """Structure of ``Q(R^2)`` when ``det DQ`` vanishes identically.

    ``kind`` is ``line``, ``ray`` or ``parabola``; ``curve`` is a domain
    curve whose image covers ``J1`` (once), sampled over ``t_range``.
    """

    kind: str
    curve: CurvePiece
    t_range: tuple


def plane_image(Q: QuadraticMap, tol: float | None = None) -> PlaneImage:
    """Analyse the range of a map whose critical set is the whole plane.

    The two components have proportional quadratic parts, so some
    combination ``g`` of them is affine.  If ``g`` is constant the range lies
    on a line and the remaining quadratic ``f`` decides between a line and a
    ray; otherwise ``f`` is a quadratic function of ``g`` and the range is a
    parabola.
    """
    Qf = Q.to_float()
    s = Q.scale()
    M = np.array([[Qf.a20, Qf.a11, Qf.a02], [Qf.b20, Qf.b11, Qf.b02]])
    U, _, _ = np.linalg.svd(M)
    uf, ug = U[:, 0], U[:, 1]
    lin = np.array([[Qf.a10, Qf.a01], [Qf.b10, Qf.b01]])
    L = ug @ lin
    fq = uf @ M
    P = np.array([[fq[0], fq[1] / 2], [fq[1] / 2, fq[2]]])
    ell = uf @ lin
    R = 10.0 * (1.0 + s / max(np.abs(fq).max(), 1e-300))
    if not is_zero(float(np.linalg.norm(L)), s, tol):
        dirn = L / np.linalg.norm(L)
        piece = CurvePiece("line", (0.0, 0.0), tuple(dirn))
        return PlaneImage("parabola", piece, (-R, R))
    lam, vecs = np.linalg.eigh(P)
    lam_scale = max(np.abs(lam).max(), 1e-300)
    z0 = is_zero(float(lam[0]), lam_scale, tol)
    z1 = is_zero(float(lam[1]), lam_scale, tol)
    if not z0 and not z1:
        if lam[0] * lam[1] > 0:
            vertex = -np.linalg.solve(P, ell) / 2
            piece = CurvePiece("line", tuple(vertex), tuple(vecs[:, 1]))
            return PlaneImage("ray", piece, (0.0, R))
        e = math.sqrt(lam[1]) * vecs[:, 0] + math.sqrt(-lam[0]) * vecs[:, 1]
        e = e / np.linalg.norm(e)
        p0 = 2 * (P @ e)
        piece = CurvePiece("line", tuple(p0), tuple(e))
        return PlaneImage("line", piece, (-R, R))
    k = 0 if z0 else 1
    z = vecs[:, k]
    e = vecs[:, 1 - k]
    lam_e = float(lam[1 - k])
    if is_zero(float(ell @ z), s, tol):
        vertex = -(ell @ e) / (2 * lam_e) * e
        piece = CurvePiece("line", tuple(vertex), tuple(e))
        return PlaneImage("ray", piece, (0.0, R))
    piece = CurvePiece("line", (0.0, 0.0), tuple(z))
    return PlaneImage("line", piece, (-R, R))


def j0j1_class(Q: QuadraticMap, tol: float | None = None) -> CriticalSetClass:
    """Which of the fifteen critical-set cases ``Q`` falls in."""
    conic = classify_critical_conic(Q, tol)
    if conic.tag in _SIMPLE_CASES:
        return _SIMPLE_CASES[conic.tag]
    if conic.tag is ConicTag.INTERSECTING_LINES:
        kinds = [line_image_kind(Q, p, d, tol) for p, d in conic.lines]
        if all(k == "ray" for k in kinds):
            return CriticalSetClass.CROSSING_TWO_RAYS
        return CriticalSetClass.CROSSING_RAY_PARABOLA
    if conic.tag is ConicTag.SINGLE_LINE:
        (p, d), = conic.lines
        kind = line_image_kind(Q, p, d, tol)
        return {
            "point": CriticalSetClass.LINE_TO_POINT,
            "line": CriticalSetClass.LINE_TO_LINE,
        }.get(kind, CriticalSetClass.LINE_TO_PARABOLA)
    kind = plane_image(Q, tol).kind
    return {
        "line": CriticalSetClass.PLANE_TO_LINE,
        "ray": CriticalSetClass.PLANE_TO_RAY,
        "parabola": CriticalSetClass.PLANE_TO_PARABOLA,
    }[kind]


def sample_critical_image(Q: QuadraticMap, n: int = DEFAULT_SAMPLES,
                          tol: float | None = None) -> CurveSample:
    """Sample ``J1 = Q(J0)`` as polylines, one per component of ``J0``.

    When ``J0`` is the whole plane the sample follows the range of ``Q``
    (a line, ray or parabola) instead.

    Raises:
        EmptySetError: if ``J0`` is empty.
    """
    conic, sample = critical_set(Q, n, tol)
    if conic.tag is ConicTag.EMPTY:
        raise EmptySetError("critical set is empty")
    if conic.tag is ConicTag.POINT:
        p = np.array([conic.center])
        comp = SampledComponent("point", p, evaluate(Q, p))
        return CurveSample((comp,), j1_kind="point")
    if conic.tag is ConicTag.ALL_PLANE:
        info = plane_image(Q, tol)
        t = np.linspace(*info.t_range, n)
        pts, _ = info.curve.at(t)
        comp = SampledComponent(info.kind, pts, evaluate(Q, pts), t, info.curve)
        return CurveSample((comp,), j1_kind=info.kind)
    kinds = []
    if conic.lines:
        kinds = [line_image_kind(Q, p, d, tol) for p, d in conic.lines]
    comps = []
    for i, c in enumerate(sample.components):
        kind = kinds[i] if kinds else c.kind
        comps.append(SampledComponent(kind, c.source, c.image, c.params, c.piece, c.closed))
    return CurveSample(tuple(comps), j1_kind=j0j1_class(Q, tol).j1_tag)


# -- cusps -------------------------------------------------------------------

def _tangency(Q: QuadraticMap, piece: CurvePiece, t):
    """``DQ(p(t)) p'(t)`` and the spectral norm of ``DQ(p(t))``."""
    pts, tan = piece.at(t)
    J = jacobian(Q, pts)
    F = np.einsum("...ij,...j->...i", J, tan)
    return F, np.linalg.norm(J, ord=2, axis=(-2, -1))


def _bisect(Q, piece, ref, lo, hi, tol=1e-10):
    """Zero of ``F(t) . ref`` in ``[lo, hi]``, where it is positive at ``lo``.

    Returns the root and ``|F|`` there.
    """
    for _ in range(200):
        if hi - lo <= tol * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        F, _ = _tangency(Q, piece, np.array([mid]))
        if F[0] @ ref > 0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    F, _ = _tangency(Q, piece, np.array([root]))
    return root, float(np.linalg.norm(F[0]))


def _jacobian_vanishes(Q, piece, t0, delta) -> bool:
    """Whether ``DQ`` is zero at ``t0`` on a line; it is linear along the line."""
    _, jn = _tangency(Q, piece, np.array([t0 - delta, t0, t0 + delta]))
    return jn[1] <= 1e-6 * max(jn[0], jn[2])


def count_cusps(Q: QuadraticMap, sample: CurveSample | None = None,
                n: int = DEFAULT_SAMPLES, tol: float | None = None) -> tuple[int, list[Cusp]]:
    """Cusps of ``J1``: points of ``J0`` where ``ker DQ`` is tangent to ``J0``.

    On ``J0`` the Jacobian has rank one, ``DQ = w r^T``, so along the curve
    ``F(t) = DQ(p(t)) p'(t) = w(t) (r(t) . p'(t))``.  At a cusp the scalar
    factor has a simple zero and ``F`` reverses direction; reversals are
    detected between consecutive samples and refined by bisection.  A
    reversal where ``DQ`` itself vanishes (the crossing point of two critical
    lines) comes from ``w`` and is not a cusp; ``DQ`` can only vanish at a
    singular point of ``J0``, so this is checked on lines alone.  Lines that
    ``Q`` collapses to a point have no cusps.

    Raises:
        NotACurveError: for point, empty, or whole-plane critical sets.
    """
    Qf = Q.to_float()
    if sample is None:
        conic, sample = critical_set(Q, n, tol)
        if not conic.is_curve:
            raise NotACurveError(f"critical set is {conic.tag.value}")
    if not sample.components or any(c.piece is None or c.kind in ("grid", "point")
                                    for c in sample.components):
        raise NotACurveError("critical set is not a curve")
    tau = tol if tol is not None else get_tolerance()
    scale = Q.scale()
    cusps: list[Cusp] = []
    for ci, comp in enumerate(sample.components):
        piece = comp.piece
        t = np.asarray(comp.params, dtype=float)
        if piece.closed:
            t = np.append(t, t[0] + 2 * math.pi)
        if len(t) > 1:
            # a generic phase keeps samples off symmetric points where F is exactly 0
            t = t[:-1] + _PHASE * np.diff(t)
            if piece.closed:
                t = np.append(t, t[0] + 2 * math.pi)
        F, jn = _tangency(Qf, piece, t)
        _, tan = piece.at(t)
        size = np.linalg.norm(F, axis=-1)
        # |F| against |DQ| |p'| at the same point: 0 exactly when the piece collapses
        ref = jn * np.linalg.norm(tan, axis=-1) + 1e-300 * scale
        if np.all(size <= tau * 1e3 * ref):
            continue  # the component collapses to a point
        floor = 1e-12 * ref
        found: list[float] = []
        span = t[-1] - t[0]
        last = None  # index of the last sample with a usable direction
        for j in range(len(t)):
            if size[j] <= floor[j]:
                continue
            if last is not None and F[last] @ F[j] < 0:
                root, at_root = _bisect(Qf, piece, F[last], t[last], t[j])
                # F vanishes at a cusp; when it only turns quickly past F[last]
                # its size at the root stays comparable to the bracket ends
                reverses = at_root <= 1e-4 * max(size[last], size[j])
                if reverses and (piece.kind != "line"
                                 or not _jacobian_vanishes(Qf, piece, root, 1e-3 * span)):
                    if piece.closed:
                        root = root % (2 * math.pi)
                    if all(min(abs(root - r), 2 * math.pi - abs(root - r) if piece.closed else math.inf)
                           > 1e-6 * span for r in found):
                        found.append(root)
            last = j
        for root in sorted(found):
            p, _ = piece.at(np.array([root]))
            img = evaluate(Qf, p)[0]
            cusps.append(Cusp(tuple(p[0]), tuple(img), ci, float(root)))
    return len(cusps), cusps
