"""Invariants that separate the affine classes, and the coarser collapses.

Preimages are counted by eliminating ``y`` between the two quadratic
equations.  The resultant is a polynomial of degree at most four in ``x``;
its real roots (clustered, since tangencies give multiple roots) are
back-substituted and each candidate point is checked against both
equations.  When the resultant vanishes identically the preimage is a curve,
which is then described with :func:`quadmaps.critical.classify_conic`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .core import (
    AffineMap2,
    QuadraticMap,
    evaluate,
    get_tolerance,
    jacobian,
    postcompose,
    precompose,
)
from .critical import (
    ConicCoefficients,
    ConicTag,
    CriticalSetClass,
    classify_conic,
    classify_critical_conic,
    count_cusps,
    critical_set,
    sample_critical_image,
)
from .errors import NotACurveError, NotApplicableError, NotInvertibleError, QuadMapError
from .normalize import ClassLabel, classify

INFINITE = "inf"


@dataclass(frozen=True)
class PreimageCardinality:
    """Number of preimages of a point, or ``None`` for a curve of preimages.

    ``description`` names the preimage curve in the infinite case (``line``,
    ``pair-of-lines``, ``circle``, ``parabola`` or ``hyperbola``).
    """

    count: int | None
    description: str | None = None

    @property
    def infinite(self) -> bool:
        return self.count is None

    @property
    def value(self):
        return INFINITE if self.count is None else self.count

    def __str__(self) -> str:
        if self.count is None:
            return f"inf ({self.description})"
        return str(self.count)


def cardinality_values(profile) -> frozenset:
    """Profile as a set of integers and ``"inf"``, the form Table-style comparisons use."""
    return frozenset(c.value for c in profile)


def preimage_topology(profile) -> frozenset:
    """Descriptions of the curves that occur as preimages."""
    return frozenset(c.description for c in profile if c.infinite)


# -- preimage counting -----------------------------------------------------

_CONIC_DESCRIPTION = {
    ConicTag.ELLIPSE: "circle",
    ConicTag.HYPERBOLA: "hyperbola",
    ConicTag.PARABOLA: "parabola",
    ConicTag.INTERSECTING_LINES: "pair-of-lines",
    ConicTag.PARALLEL_LINES: "pair-of-lines",
    ConicTag.COINCIDENT_LINES: "line",
    ConicTag.SINGLE_LINE: "line",
    ConicTag.ALL_PLANE: "plane",
}

_ANGLES = np.linspace(0.0, math.pi, 12, endpoint=False) + 0.1234


def _generic_rotation(Q: QuadraticMap) -> AffineMap2:
    """Rotation making the ``y^2`` coefficients of both components large."""
    best, best_score = None, -1.0
    for th in _ANGLES:
        rot = AffineMap2.rotation(float(th))
        R = precompose(Q, rot)
        p2, r2 = abs(R.a02), abs(R.b02)
        score = min(p2, r2) + 1e-3 * max(p2, r2)
        if score > best_score:
            best, best_score = rot, score
    return best


def _y_polys(c):
    """``(p2, p1(x), p0(x))`` of a component as numpy coefficient arrays in ``x``."""
    c20, c11, c02, c10, c01, c00 = c
    return (np.array([c02]), np.array([c01, c11]), np.array([c00, c10, c20]))


def _eliminant(P, R, absolute: bool = False):
    """Resultant in ``y`` of two components, as a polynomial in ``x``.

    With ``absolute`` every product is taken with absolute values, giving a
    magnitude polynomial whose coefficients bound the rounding error.
    """
    f = np.abs if absolute else (lambda a: a)
    p2, p1, p0 = (f(a) for a in _y_polys(P))
    r2, r1, r0 = (f(a) for a in _y_polys(R))
    m = npoly.polymul
    if absolute:
        s = npoly.polyadd
    else:
        s = npoly.polysub
    a = s(m(p2, r0), m(p0, r2))
    b = s(m(p2, r1), m(p1, r2))
    c = s(m(p1, r0), m(p0, r1))
    return s(m(a, a), m(b, c))


def _pad(a, n=5):
    out = np.zeros(n)
    out[: len(a)] = a[:n]
    return out


def _proportionality(P, R) -> float:
    """Ratio of singular values of the 2x6 coefficient matrix (0 when proportional)."""
    S = np.linalg.svd(np.array([P, R], dtype=float), compute_uv=False)
    return float(S[1] / S[0]) if S[0] > 0 else 0.0


def _infinite_description(P, R, rho) -> PreimageCardinality:
    """Preimage set when the eliminant vanishes identically."""
    M = np.array([P, R], dtype=float)
    if not np.any(M):
        return PreimageCardinality(None, "plane")
    if rho <= get_tolerance():
        dom = np.linalg.svd(M)[2][0]
        conic = classify_conic(ConicCoefficients(*(float(v) for v in dom)))
        if conic.tag is ConicTag.EMPTY:
            return PreimageCardinality(0)
        if conic.tag is ConicTag.POINT:
            return PreimageCardinality(1)
        return PreimageCardinality(None, _CONIC_DESCRIPTION[conic.tag])
    return PreimageCardinality(None, "line")


def _cluster_roots(E, Emag):
    roots = np.roots(E[::-1]) if np.any(E) else np.array([])
    clusters = [[z] for z in roots]
    while True:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                zi, zj = np.mean(clusters[i]), np.mean(clusters[j])
                d = abs(zi - zj)
                if d <= 1e-2 * (1 + abs(zi)) and (best is None or d < best[0]):
                    best = (d, i, j)
        if best is None:
            break
        _, i, j = best
        merged = clusters[i] + clusters[j]
        zm = np.mean(merged)
        val = abs(npoly.polyval(zm, E))
        mag = npoly.polyval(abs(zm), Emag)
        if val > 1e-10 * max(mag, 1e-300):
            break
        clusters[i] = merged
        del clusters[j]
    return [(np.mean(c), len(c), float(np.ptp(np.real(c)))) for c in clusters]


def _newton_polish(Q: QuadraticMap, p, target, steps=40):
    """Damped Newton; near singular points full steps overshoot, so halve them."""

    p = np.array(p, dtype=float)
    F = evaluate(Q, p) - target
    for _ in range(steps):
        dp = np.linalg.lstsq(jacobian(Q, p), -F, rcond=None)[0]
        lam = 1.0
        while lam > 1e-2:
            q = p + lam * dp
            Fq = evaluate(Q, q) - target
            if np.linalg.norm(Fq) < np.linalg.norm(F):
                break
            lam /= 2
        else:
            break
        p, F = q, Fq
        if not np.any(F):
            break
    return p


def _component_value(c, x, y):
    c20, c11, c02, c10, c01, c00 = c
    return c20 * x * x + c11 * x * y + c02 * y * y + c10 * x + c01 * y + c00


def _component_magnitude(c, x, y):
    x, y = abs(x), abs(y)
    return sum(abs(a) * m for a, m in zip(c, (x * x, x * y, y * y, x, y, 1.0)))


def _residual_ok(P, R, q, rel=1e-12) -> bool:
    x, y = q
    return all(abs(_component_value(c, x, y)) <= rel * (_component_magnitude(c, x, y) + 1e-300)
               for c in (P, R))


def _relative_residual(P, R, q) -> float:
    x, y = q
    return max(abs(_component_value(c, x, y)) / (_component_magnitude(c, x, y) + 1e-300)
               for c in (P, R))


def _near_critical(Q: QuadraticMap, q) -> bool:
    """Newton only converges linearly at singular points, so they get a looser residual."""

    J = jacobian(Q, np.asarray(q, dtype=float))
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    return abs(det) <= 1e-3 * (abs(J[0, 0] * J[1, 1]) + abs(J[0, 1] * J[1, 0]) + 1e-300)


def _same_point(P, R, p, q) -> bool:
    """Two solutions are one if they are close and their midpoint also solves.

    Near a fold two distinct solutions at distance ``d`` leave a midpoint
    residual of order ``d^2``, so only pairs within rounding of a tangency
    merge; badly conditioned copies of one solution always do.
    """
    d = np.linalg.norm(p - q)
    if d > 1e-3 * (1 + np.linalg.norm(p)):
        return False
    return d <= 1e-12 * (1 + np.linalg.norm(p)) or _residual_ok(P, R, (p + q) / 2, 1e-9)


def preimage_points(Q: QuadraticMap, target) -> tuple[PreimageCardinality, np.ndarray]:
    """Preimage cardinality together with the preimage points (finite case)."""
    Qf = Q.to_float()
    u, v = float(target[0]), float(target[1])
    shifted = QuadraticMap(*Qf.coefficients()[:5], Qf.a00 - u, *Qf.coefficients()[6:11], Qf.b00 - v)
    rot = _generic_rotation(shifted)
    Rm = precompose(shifted, rot)
    P, R = Rm.first, Rm.second
    scale = max(Rm.scale(), 1e-300)
    E = _pad(_eliminant(P, R))
    Emag = _pad(_eliminant(P, R, absolute=True))
    tol = get_tolerance()
    rho = _proportionality(P, R)
    # two proportional equations make the eliminant vanish to second order,
    # a shared linear factor only to first order
    if rho <= tol or np.all(np.abs(E) <= tol * min(rho, 1.0) * Emag.max()):
        return _infinite_description(P, R, rho), np.empty((0, 2))
    # drop leading coefficients that are rounding noise
    E = E.copy()
    for i in range(4, 0, -1):
        if abs(E[i]) <= 1e-12 * Emag[i] or abs(E[i]) <= 1e-14 * np.abs(E).max():
            E[i] = 0.0
        else:
            break
    if not np.any(E[1:]):
        return PreimageCardinality(0), np.empty((0, 2))
    xs = [(z.real, m, w) for z, m, w in _cluster_roots(E, Emag) if abs(z.imag) <= 1e-7 * (1 + abs(z))]
    p2, r2 = P[2], R[2]
    pts: list[np.ndarray] = []
    for x, mult, spread in xs:
        found: list[tuple[float, np.ndarray]] = []
        cands = []
        for c in (P, R):
            a2 = c[2]
            a1 = c[1] * x + c[4]
            a0 = c[0] * x * x + c[3] * x + c[5]
            if abs(a2) > 1e-14 * scale:
                disc = a1 * a1 - 4 * a2 * a0
                if disc >= -1e-8 * (a1 * a1 + abs(4 * a2 * a0)):
                    sq = math.sqrt(max(disc, 0.0))
                    cands += [(-a1 + sq) / (2 * a2), (-a1 - sq) / (2 * a2)]
            elif abs(a1) > 1e-14 * scale:
                cands.append(-a0 / a1)
        lin1 = r2 * (P[1] * x + P[4]) - p2 * (R[1] * x + R[4])
        lin0 = r2 * (P[0] * x * x + P[3] * x + P[5]) - p2 * (R[0] * x * x + R[3] * x + R[5])
        if abs(lin1) > 1e-14 * scale * scale:
            cands.append(-lin0 / lin1)
        for y in cands:
            q = _newton_polish(Rm, (x, y), np.zeros(2))
            if abs(q[0] - x) > 1e-3 * (1 + abs(x)) + 2 * spread:
                continue  # drifted to a solution over another root
            if not (_residual_ok(P, R, q) or (_near_critical(Rm, q) and _residual_ok(P, R, q, 1e-7))):
                continue
            if not any(_same_point(P, R, q, o) for _, o in found) and \
                    not any(_same_point(P, R, q, o) for o in pts):
                found.append((_relative_residual(P, R, q), q))
        # a root of multiplicity m carries at most m solutions
        found.sort(key=lambda item: item[0])
        pts += [q for _, q in found[:mult]]
    out = rot(np.array(pts)) if pts else np.empty((0, 2))
    return PreimageCardinality(len(pts)), out


def preimage_count(Q: QuadraticMap, target) -> PreimageCardinality:
    """Number of points ``p`` with ``Q(p) = target`` (``None`` count for a curve)."""
    return preimage_points(Q, target)[0]


# -- profiles ----------------------------------------------------------------

def _escape_targets(Q: QuadraticMap, rng, n: int) -> list:
    """Targets where a preimage escapes to infinity.

    In generic coordinates the eliminant has a fixed degree; its leading
    coefficient is a polynomial of degree at most two in the target, and
    the preimage count can jump where it vanishes.  The conic is recovered
    by interpolation at six targets and then sampled.
    """
    Qf = Q.to_float()
    rot = _generic_rotation(QuadraticMap(*Qf.coefficients()))
    base = precompose(Qf, rot)

    def elim(u, v):
        P = list(base.first)
        R = list(base.second)
        P[5] -= u
        R[5] -= v
        return _pad(_eliminant(P, R))

    probes = rng.normal(size=(8, 2)) * (1 + Qf.scale())
    coeffs = np.array([elim(*t) for t in probes])
    mags = np.abs(coeffs).max(axis=0)
    nz = [i for i in range(5) if mags[i] > 1e-9 * mags.max()]
    if not nz:
        return []
    deg = max(nz)
    design = np.array([[u * u, u * v, v * v, u, v, 1.0] for u, v in probes])
    sol, *_ = np.linalg.lstsq(design, coeffs[:, deg], rcond=None)
    sol[np.abs(sol) <= 1e-9 * np.abs(sol).max()] = 0.0
    conic = classify_conic(ConicCoefficients(*sol))
    out = []
    for piece in conic.pieces:
        t0, t1 = piece.param_range(10.0 * (1 + piece.size()))
        for t in np.concatenate([rng.uniform(t0, t1, n), [0.0]]):
            p, _ = piece.at(np.array([t]))
            out.append(p[0])
    if conic.center is not None and conic.tag is ConicTag.POINT:
        out.append(np.array(conic.center))
    return out


def _degenerate_level(Q: QuadraticMap) -> np.ndarray:
    """Image of the critical point of the dominant component.

    When ``J0`` is the plane the range is a curve and the preimages are the
    level sets of one quadratic function; this is its degenerate level.
    """
    M = np.array([Q.first[:5], Q.second[:5]], dtype=float)
    lam = np.linalg.svd(M)[0][:, 0]
    a20, a11, a02, a10, a01 = lam @ M
    p = np.linalg.lstsq(np.array([[2 * a20, a11], [a11, 2 * a02]]),
                        -np.array([a10, a01]), rcond=None)[0]
    return evaluate(Q, p[None, :])[0]


def profile_targets(Q: QuadraticMap, n: int = 200, seed: int = 0) -> np.ndarray:
    """Stratified targets: the range, its neighbourhood, ``J1``, and special points."""
    rng = np.random.default_rng(seed)
    Qf = Q.to_float()
    targets: list = []
    m = max(n // 5, 1)
    dom = rng.normal(size=(m, 2)) * 2.0
    targets += list(evaluate(Qf, dom))
    imgs = np.array(targets)
    spread = max(float(np.abs(imgs).max()), 1.0)
    targets += list(rng.uniform(-spread, spread, size=(m, 2)))
    conic, _ = critical_set(Qf, 256)
    try:
        j1 = sample_critical_image(Qf, 256)
    except QuadMapError:
        j1 = None
    if j1 is not None:
        for comp in j1.components:
            k = len(comp.image)
            idx = rng.choice(k, size=min(k, m), replace=False) if k > 1 else np.array([0])
            pts = comp.image[idx]
            targets += list(pts)
            eps = 1e-3 * spread
            targets += list(pts[: m // 2] + rng.normal(size=(len(pts[: m // 2]), 2)) * eps)
            if comp.params is not None and comp.piece is not None:
                # the point at parameter 0 is the crossing point or line foot
                p0, _ = comp.piece.at(np.array([0.0]))
                targets.append(evaluate(Qf, p0)[0])
    if conic.center is not None:
        targets.append(evaluate(Qf, np.array([conic.center]))[0])
    if conic.tag is ConicTag.ALL_PLANE:
        targets.append(_degenerate_level(Qf))
    if conic.is_curve:
        try:
            _, cusps = count_cusps(Qf)
            targets += [np.array(c.image) for c in cusps]
        except NotACurveError:
            pass
    targets += _escape_targets(Qf, rng, max(m // 4, 4))
    return np.array(targets, dtype=float)


def preimage_profile(Q: QuadraticMap, n: int = 200, seed: int = 0) -> frozenset:
    """Set of preimage cardinalities seen over at least ``n`` stratified targets."""
    if n < 1:
        raise ValueError("need at least one target")
    return frozenset(preimage_count(Q, t) for t in profile_targets(Q, n, seed))


# -- convexity ---------------------------------------------------------------

@dataclass(frozen=True)
class ConvexConsistent:
    samples: int

    @property
    def convex(self) -> bool:
        return True


@dataclass(frozen=True)
class NonConvexWitness:
    p1: tuple
    p2: tuple
    midpoint: tuple

    @property
    def convex(self) -> bool:
        return False


def _in_range(Q, p) -> bool:
    c = preimage_count(Q, p)
    return c.infinite or c.count >= 1


CLOSED_FORM_RANGES: dict[ClassLabel, Callable[[float, float], bool]] = {
    ClassLabel.DE1: lambda u, v: u >= -v * v,
    ClassLabel.DH1: lambda u, v: u >= v * v,
}


def range_convexity(Q: QuadraticMap, n: int = 200, seed: int = 0):
    """Look for two range points whose midpoint is outside the range.

    Pairs are drawn among sampled range points and among points of ``J1``,
    which carries the boundary of the range.  Finding a pair certifies
    non-convexity; finding none is only consistent with convexity.
    """
    if n < 100:
        raise ValueError("need at least 100 samples")
    rng = np.random.default_rng(seed)
    Qf = Q.to_float()
    pts = list(evaluate(Qf, rng.normal(size=(n, 2)) * 2.0))
    try:
        j1 = sample_critical_image(Qf, 128).image_points
        pts_j1 = list(j1[rng.choice(len(j1), size=min(len(j1), n), replace=False)])
    except QuadMapError:
        pts_j1 = []
    pools = [pts_j1, pts] if pts_j1 else [pts]
    for pool in pools:
        k = len(pool)
        if k < 2:
            continue
        for _ in range(n):
            i, j = rng.choice(k, size=2, replace=False)
            a, b = np.asarray(pool[i]), np.asarray(pool[j])
            mid = (a + b) / 2
            if not _in_range(Qf, mid):
                return NonConvexWitness(tuple(a), tuple(b), tuple(mid))
    return ConvexConsistent(n)


# -- collapses -----------------------------------------------------------------

_CASE_OF = {
    ClassLabel.E1: CriticalSetClass.ELLIPSE,
    ClassLabel.E2: CriticalSetClass.POINT,
    ClassLabel.H1: CriticalSetClass.HYPERBOLA,
    ClassLabel.H2: CriticalSetClass.CROSSING_RAY_PARABOLA,
    ClassLabel.H3: CriticalSetClass.CROSSING_TWO_RAYS,
    ClassLabel.P1: CriticalSetClass.PARABOLA,
    ClassLabel.P2: CriticalSetClass.PARALLEL_LINE_POINT,
    ClassLabel.P3: CriticalSetClass.DOUBLE_LINE_POINT,
    ClassLabel.DE1: CriticalSetClass.LINE_TO_PARABOLA,
    ClassLabel.DE2: CriticalSetClass.LINE_TO_POINT,
    ClassLabel.DE3: CriticalSetClass.PLANE_TO_LINE,
    ClassLabel.DH1: CriticalSetClass.LINE_TO_PARABOLA,
    ClassLabel.DH2: CriticalSetClass.PLANE_TO_RAY,
    ClassLabel.DP1: CriticalSetClass.EMPTY,
    ClassLabel.DP2: CriticalSetClass.LINE_TO_LINE,
    ClassLabel.DP3: CriticalSetClass.PLANE_TO_LINE,
    ClassLabel.DP4: CriticalSetClass.PLANE_TO_PARABOLA,
    ClassLabel.DP5: CriticalSetClass.PLANE_TO_RAY,
}


def critical_set_class_of(label: ClassLabel) -> CriticalSetClass:
    """The (J0, J1) case shared by every map in the affine class ``label``."""
    return _CASE_OF[ClassLabel(label)]


class SmoothClass(str, Enum):
    E1 = "E1"
    E2 = "E2"
    H1 = "H1"
    H2 = "H2"
    H3 = "H3"
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    DE1_DH1_DP2 = "DE1~DH1~DP2"
    DE2 = "DE2"
    DE3 = "DE3"
    DH2 = "DH2"
    DP1 = "DP1"
    DP3_DP4 = "DP3~DP4"
    DP5 = "DP5"

    @property
    def members(self) -> tuple:
        return tuple(ClassLabel(v) for v in self.value.split("~"))


def smooth_class_of(label: ClassLabel) -> SmoothClass:
    label = ClassLabel(label)
    for sc in SmoothClass:
        if label in sc.members:
            return sc
    raise AssertionError(label)


@dataclass(frozen=True)
class PolynomialWitness:
    """``k o left o h == right`` for polynomial maps ``h``, ``k`` (pointwise identity)."""

    left: ClassLabel
    right: ClassLabel
    h: Callable
    k: Callable
    h_text: str
    k_text: str

    def max_error(self, points: np.ndarray) -> float:
        lhs = self.k(evaluate(self.left.normal_form, self.h(points)))
        rhs = evaluate(self.right.normal_form, points)
        return float(np.abs(lhs - rhs).max())


def _ident(p):
    return p


def _k1(p):
    return np.stack([p[..., 0] + p[..., 1] ** 2, p[..., 1]], axis=-1)


def _k2(p):
    return np.stack([p[..., 0] - p[..., 1] ** 2, p[..., 1]], axis=-1)


def _swap_fold(p):
    return np.stack([p[..., 1], p[..., 0] - p[..., 1] ** 2], axis=-1)


# DP2 = k1 o DE1 = k2 o DH1, and DP3 o h = k o DP4 with h = k = (y, x - y^2).
# The last one is stored as k^-1 o DP3 o h = DP4 via k^-1 = (x, x^2 - y)... we
# keep both sides explicit instead: DP3 o h and k o DP4 are compared directly.
POLYNOMIAL_WITNESSES = (
    PolynomialWitness(ClassLabel.DE1, ClassLabel.DP2, _ident, _k1, "(x, y)", "(x + y^2, y)"),
    PolynomialWitness(ClassLabel.DH1, ClassLabel.DP2, _ident, _k2, "(x, y)", "(x - y^2, y)"),
)


def dp3_dp4_error(points: np.ndarray) -> float:
    """Max of ``|DP3 o h - (x, 0)|`` and ``|k o DP4 - (x, 0)|`` with ``h = k = (y, x - y^2)``."""
    target = np.stack([points[..., 0], np.zeros(len(points))], axis=-1)
    a = evaluate(ClassLabel.DP3.normal_form, _swap_fold(points))
    b = _swap_fold(evaluate(ClassLabel.DP4.normal_form, points))
    return float(max(np.abs(a - target).max(), np.abs(b - target).max()))


def verify_smooth_witnesses(n: int = 100, seed: int = 0) -> dict:
    """Pointwise errors of the polynomial witnesses for the merged groups."""
    pts = np.random.default_rng(seed).uniform(-3, 3, size=(n, 2))
    out = {f"{w.right.value} = k o {w.left.value}": w.max_error(pts) for w in POLYNOMIAL_WITNESSES}
    out["DP3 o h = k o DP4 = (x, 0)"] = dp3_dp4_error(pts)
    return out


# -- separating invariants ---------------------------------------------------

@dataclass(frozen=True)
class InvariantReport:
    invariant: str
    left: object
    right: object

    @property
    def separates(self) -> bool:
        return self.left != self.right


def _line_multiplicity(label: ClassLabel):
    tag = classify_critical_conic(label.normal_form).tag
    return {ConicTag.SINGLE_LINE: "single", ConicTag.COINCIDENT_LINES: "double"}.get(tag)


def _j1_class(label: ClassLabel) -> str:
    from .critical import j0j1_class

    return j0j1_class(label.normal_form).value


@lru_cache(maxsize=None)
def _profile_of(label: ClassLabel) -> frozenset:
    return preimage_profile(label.normal_form, 200, 0)


# cheap invariants first; each is evaluated lazily and cached per label
_INVARIANTS: tuple[tuple[str, Callable], ...] = (
    ("line multiplicity of J0", _line_multiplicity),
    ("J0 class", lambda label: classify_critical_conic(label.normal_form).tag.value),
    ("J1 class", _j1_class),
    ("preimage topology", lambda label: tuple(sorted(preimage_topology(_profile_of(label))))),
    ("preimage profile",
     lambda label: tuple(sorted(cardinality_values(_profile_of(label)), key=str))),
    ("range convexity", lambda label: range_convexity(label.normal_form, 200, 0).convex),
)


@lru_cache(maxsize=None)
def _invariant(label: ClassLabel, index: int):
    return _INVARIANTS[index][1](label)


def distinguishing_invariant(l1: ClassLabel, l2: ClassLabel) -> InvariantReport:
    """First invariant, recomputed on both normal forms, that differs.

    Raises:
        ValueError: if the labels are equal, or no invariant separates them.
    """
    l1, l2 = ClassLabel(l1), ClassLabel(l2)
    if l1 == l2:
        raise ValueError("labels must differ")
    for k, (name, _) in enumerate(_INVARIANTS):
        a, b = _invariant(l1, k), _invariant(l2, k)
        # multiplicity only applies when both critical sets are lines
        if k == 0 and (a is None or b is None):
            continue
        if a != b:
            return InvariantReport(name, a, b)
    raise ValueError(f"no invariant separates {l1.value} and {l2.value}")


# -- inverse and injectivity ---------------------------------------------------

_DP1_INVERSE = QuadraticMap(0, 0, 0, 0, 1, 0, 0, 0, -1, 1, 0, 0)


def quadratic_inverse(Q: QuadraticMap) -> QuadraticMap:
    """Inverse of a map in class DP1, which is again quadratic.

    With ``N = k o Q o h^-1`` the normal form ``(x^2 + y, x)``, whose inverse
    is ``(y, x - y^2)``, ``Q^-1 = h^-1 o N^-1 o k``.

    Raises:
        NotInvertibleError: if ``Q`` is not in class DP1.
    """
    r = classify(Q)
    if r.label is not ClassLabel.DP1:
        raise NotInvertibleError(f"map is in class {r.label.value}, not DP1")
    H, K = r.witness.h, r.witness.k
    return postcompose(H.inverse(), precompose(_DP1_INVERSE, K))


def _confirmed_collision(Q, pieces, ci, si, cj, sj, h) -> bool:
    """Refine a close pair of samples to a solution of ``Q(p(s)) = Q(p(t))``.

    A coarse zoom picks the closest pair near the samples, then Gauss-Newton
    in ``(s, t)`` lands on a crossing or a folded arc. Near a cusp the only
    nearby solutions have ``s = t``, so on one component the pair must stay
    apart.
    """
    pi, pj = pieces[ci], pieces[cj]
    hi, hj = h
    for _ in range(3):
        s = si + np.linspace(-hi, hi, 11)
        t = sj + np.linspace(-hj, hj, 11)
        a = evaluate(Q, pi.at(s)[0])
        b = evaluate(Q, pj.at(t)[0])
        d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
        k, m = np.unravel_index(int(np.argmin(d)), d.shape)
        si, sj = float(s[k]), float(t[m])
        hi, hj = hi / 5, hj / 5
    start = _param_gap(pi, si, sj) if ci == cj else None
    x0 = x = np.array([si, sj])
    # steps stay within a few sample spacings of the starting pair
    reach = 10 * max(h)
    for _ in range(40):
        (pa, ta), (pb, tb) = (pc.at(np.array([v])) for pc, v in ((pi, x[0]), (pj, x[1])))
        G = evaluate(Q, pa)[0] - evaluate(Q, pb)[0]
        rounding = 1e-13 * max(Q.scale(), 1.0) * (1 + float(pa[0] @ pa[0] + pb[0] @ pb[0]))
        if float(np.linalg.norm(G)) <= rounding:
            break
        Jm = np.column_stack([jacobian(Q, pa)[0] @ ta[0], -(jacobian(Q, pb)[0] @ tb[0])])
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(Jm))):
            return False
        dx = np.linalg.lstsq(Jm, -G, rcond=1e-12)[0]
        dx *= min(1.0, reach / max(float(np.abs(dx).max()), 1e-300))
        x = x + dx
        if np.abs(x - x0).max() > 10 * reach:
            return False
        if np.abs(dx).max() <= 1e-15 * (1 + np.abs(x).max()):
            break
    a = evaluate(Q, pi.at(np.array([x[0]]))[0])[0]
    b = evaluate(Q, pj.at(np.array([x[1]]))[0])[0]
    floor = 1e-9 * max(Q.scale(), 1.0) * (1 + float(np.abs(a).max()))
    if float(np.linalg.norm(a - b)) > floor:
        return False
    return start is None or _param_gap(pi, x[0], x[1]) >= 0.5 * start


def _param_gap(piece, s, t) -> float:
    d = abs(s - t)
    return min(d % (2 * np.pi), -d % (2 * np.pi)) if piece.closed else d


def injective_on_critical_set(Q: QuadraticMap, n: int = 512) -> bool:
    """Whether ``Q`` is one-to-one on its critical set, judged from samples.

    Sample pairs whose images are within twice the local spacing, and whose
    parameters are more than ``n/32`` samples apart on the same component,
    are candidate collisions. The closest are refined first to an exact
    solution of ``Q(p(s)) = Q(p(t))``.

    Raises:
        NotApplicableError: when ``J0`` is empty or the whole plane.
    """
    conic = classify_critical_conic(Q)
    if conic.tag in (ConicTag.EMPTY, ConicTag.ALL_PLANE):
        raise NotApplicableError(f"critical set is {conic.tag.value}")
    if conic.tag is ConicTag.POINT:
        return True
    Qf = Q.to_float()
    sample = sample_critical_image(Qf, n)
    comps = sample.components
    pieces = [c.piece for c in comps]
    steps = []
    for comp in comps:
        d = np.diff(comp.params)
        steps.append(np.maximum(np.append(d, d[-1]), np.insert(d, 0, d[0])))
    spacing = []
    for comp in comps:
        d = np.linalg.norm(np.diff(comp.image, axis=0), axis=1)
        if comp.closed:
            d = np.append(d, np.linalg.norm(comp.image[0] - comp.image[-1]))
            s = np.maximum(d, np.roll(d, 1))
        else:
            s = np.maximum(np.append(d, d[-1]), np.insert(d, 0, d[0]))
        spacing.append(s)
    img = np.concatenate([c.image for c in comps])
    cid = np.concatenate([np.full(len(c.image), k) for k, c in enumerate(comps)])
    idx = np.concatenate([np.arange(len(c.image)) for c in comps])
    par = np.concatenate([c.params for c in comps])
    step = np.concatenate(steps)
    sp = np.concatenate(spacing)
    floor = 1e-12 * max(Qf.scale(), 1.0) * (1 + np.abs(img).max())
    window = max(n // 32, 2)
    found = []
    for start in range(0, len(img), 256):
        rows = np.arange(start, min(start + 256, len(img)))
        dist = np.linalg.norm(img[rows, None, :] - img[None, :, :], axis=-1)
        close = dist <= 2 * np.maximum(sp[rows, None], sp[None, :]) + floor
        same = cid[rows, None] == cid[None, :]
        gap = np.abs(idx[rows, None] - idx[None, :])
        for k, comp in enumerate(comps):
            if comp.closed:
                m = len(comp.image)
                sel = (cid[rows, None] == k) & (cid[None, :] == k)
                gap = np.where(sel, np.minimum(gap, m - gap), gap)
        cand = close & ~(same & (gap <= window)) & (rows[:, None] < np.arange(len(img))[None, :])
        r, c = np.nonzero(cand)
        found.append(np.column_stack([rows[r], c, dist[r, c]]))
    cands = np.concatenate(found)
    # closest pairs first; a rejected pair vouches for its index neighbours
    rejected = np.empty((0, 2))
    for i, c, _ in cands[np.argsort(cands[:, 2], kind="stable")]:
        if (np.abs(rejected - (i, c)).max(axis=1, initial=0) <= 4).any():
            continue
        i, c = int(i), int(c)
        if _confirmed_collision(Qf, pieces, cid[i], par[i], cid[c], par[c], (step[i], step[c])):
            return False
        rejected = np.vstack([rejected, [i, c]])
    return True
