"""Reduction of a quadratic map to one of the 18 affine normal forms.

The reduction first brings the homogeneous quadratic part to one of six
forms by linear changes of coordinates, then removes linear terms family by
family.  Every step is recorded as a pair ``(h, k)`` acting by
``R -> k o R o h^-1``; the composed pair is the returned witness, and it is
checked by recomputing ``compose(K, Q, H)`` against the normal form.

Branch tests are zero tests with the module tolerance.  Before running the
chain, the target label is predicted from affine invariants (the pencil of
the homogeneous part and the critical-set class).  When a raw coefficient
test disagrees with that prediction the prediction wins and the trace says
so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .core import (
    AffineMap2,
    HomogeneousPart,
    QuadraticMap,
    affine_invert,
    compose,
    exact_sqrt,
    get_tolerance,
    is_exact,
    is_zero,
    postcompose,
    precompose,
    sign,
)
from .critical import CriticalSetClass, det_jacobian_conic, j0j1_class
from .errors import (
    NoGuaranteedRootError,
    NotQuadraticError,
    VerificationError,
    WrongBranchError,
)

RESIDUAL_LIMIT = 1e-6
LONGCASE_LIMIT = 1e-9

_HALF = Fraction(1, 2)


class ClassLabel(str, Enum):
    E1 = "E1"
    E2 = "E2"
    H1 = "H1"
    H2 = "H2"
    H3 = "H3"
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    DE1 = "DE1"
    DE2 = "DE2"
    DE3 = "DE3"
    DH1 = "DH1"
    DH2 = "DH2"
    DP1 = "DP1"
    DP2 = "DP2"
    DP3 = "DP3"
    DP4 = "DP4"
    DP5 = "DP5"

    @property
    def normal_form(self) -> QuadraticMap:
        return NORMAL_FORMS[self]

    @property
    def family(self) -> "ClassLabel":
        """Label of the homogeneous form this class shares its quadratic part with."""
        return _FAMILY[self]

    def __str__(self) -> str:
        return self.value


def _qm(first, second) -> QuadraticMap:
    return QuadraticMap.from_components(first, second)


NORMAL_FORMS = {
    ClassLabel.E1: _qm((1, 0, -1, 1, 0, 0), (0, 1, 0, 0, 0, 0)),
    ClassLabel.E2: _qm((1, 0, -1, 0, 0, 0), (0, 1, 0, 0, 0, 0)),
    ClassLabel.H1: _qm((1, 0, 1, 1, 0, 0), (0, 1, 0, 0, 0, 0)),
    ClassLabel.H2: _qm((1, 0, 1, 1, 0, 0), (0, 1, 0, _HALF, 0, 0)),
    ClassLabel.H3: _qm((1, 0, 1, 0, 0, 0), (0, 1, 0, 0, 0, 0)),
    ClassLabel.P1: _qm((1, 0, 0, 0, 1, 0), (0, 1, 0, 0, 0, 0)),
    ClassLabel.P2: _qm((1, 0, 0, 0, 0, 0), (0, 1, 0, 0, 1, 0)),
    ClassLabel.P3: _qm((1, 0, 0, 0, 0, 0), (0, 1, 0, 0, 0, 0)),
    ClassLabel.DE1: _qm((1, 0, -1, 0, 0, 0), (0, 0, 0, 0, 1, 0)),
    ClassLabel.DE2: _qm((1, 0, -1, 0, 0, 0), (0, 0, 0, 1, 1, 0)),
    ClassLabel.DE3: _qm((1, 0, -1, 0, 0, 0), (0, 0, 0, 0, 0, 0)),
    ClassLabel.DH1: _qm((1, 0, 1, 0, 0, 0), (0, 0, 0, 0, 1, 0)),
    ClassLabel.DH2: _qm((1, 0, 1, 0, 0, 0), (0, 0, 0, 0, 0, 0)),
    ClassLabel.DP1: _qm((1, 0, 0, 0, 1, 0), (0, 0, 0, 1, 0, 0)),
    ClassLabel.DP2: _qm((1, 0, 0, 0, 0, 0), (0, 0, 0, 0, 1, 0)),
    ClassLabel.DP3: _qm((1, 0, 0, 0, 1, 0), (0, 0, 0, 0, 0, 0)),
    ClassLabel.DP4: _qm((1, 0, 0, 0, 0, 0), (0, 0, 0, 1, 0, 0)),
    ClassLabel.DP5: _qm((1, 0, 0, 0, 0, 0), (0, 0, 0, 0, 0, 0)),
}

_L = ClassLabel
_FAMILY = {
    _L.E1: _L.E2, _L.E2: _L.E2,
    _L.H1: _L.H3, _L.H2: _L.H3, _L.H3: _L.H3,
    _L.P1: _L.P3, _L.P2: _L.P3, _L.P3: _L.P3,
    _L.DE1: _L.DE3, _L.DE2: _L.DE3, _L.DE3: _L.DE3,
    _L.DH1: _L.DH2, _L.DH2: _L.DH2,
    _L.DP1: _L.DP5, _L.DP2: _L.DP5, _L.DP3: _L.DP5, _L.DP4: _L.DP5, _L.DP5: _L.DP5,
}

# (homogeneous family, critical-set case) -> label
_C = CriticalSetClass
_EXPECTED = {
    (_L.E2, _C.ELLIPSE): _L.E1,
    (_L.E2, _C.POINT): _L.E2,
    (_L.H3, _C.HYPERBOLA): _L.H1,
    (_L.H3, _C.CROSSING_RAY_PARABOLA): _L.H2,
    (_L.H3, _C.CROSSING_TWO_RAYS): _L.H3,
    (_L.P3, _C.PARABOLA): _L.P1,
    (_L.P3, _C.PARALLEL_LINE_POINT): _L.P2,
    (_L.P3, _C.DOUBLE_LINE_POINT): _L.P3,
    (_L.DE3, _C.LINE_TO_PARABOLA): _L.DE1,
    (_L.DE3, _C.LINE_TO_POINT): _L.DE2,
    (_L.DE3, _C.PLANE_TO_LINE): _L.DE3,
    (_L.DH2, _C.LINE_TO_PARABOLA): _L.DH1,
    (_L.DH2, _C.PLANE_TO_RAY): _L.DH2,
    (_L.DP5, _C.EMPTY): _L.DP1,
    (_L.DP5, _C.LINE_TO_LINE): _L.DP2,
    (_L.DP5, _C.PLANE_TO_LINE): _L.DP3,
    (_L.DP5, _C.PLANE_TO_PARABOLA): _L.DP4,
    (_L.DP5, _C.PLANE_TO_RAY): _L.DP5,
}


@dataclass(frozen=True)
class WitnessPair:
    """Domain map ``h`` and range map ``k`` with ``compose(k, Q, h)`` the normal form."""

    h: AffineMap2 = field(default_factory=AffineMap2)
    k: AffineMap2 = field(default_factory=AffineMap2)


@dataclass(frozen=True)
class TraceStep:
    name: str
    result: QuadraticMap
    h: AffineMap2
    k: AffineMap2
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "step": self.name,
            "map": str(self.result),
            "h": [str(c) for c in self.h.coefficients()],
            "k": [str(c) for c in self.k.coefficients()],
            "note": self.note,
        }


@dataclass(frozen=True)
class ClassificationResult:
    label: ClassLabel
    witness: WitnessPair
    residual: float
    trace: tuple = ()
    homogeneous_label: ClassLabel | None = None
    critical_class: CriticalSetClass | None = None

    @property
    def overrides(self) -> list[str]:
        return [s.note for s in self.trace if s.note.startswith("override")]


# -- reduction state -------------------------------------------------------

_ID = AffineMap2()


class _Chain:
    """Current map ``R = K o Q o H^-1`` together with the accumulated witness."""

    def __init__(self, Q: QuadraticMap, family: str):
        self.Q = Q
        self.R = Q
        self.H = _ID
        self.K = _ID
        self.family = family
        self.trace: list[TraceStep] = []

    def step(self, name: str, *, k: AffineMap2 | None = None, h: AffineMap2 | None = None,
             pre: AffineMap2 | None = None, note: str = "") -> None:
        """Apply ``R -> k o R o h^-1``; ``pre=g`` is shorthand for ``R -> R o g``."""
        if pre is not None:
            h = affine_invert(pre)
        k = k or _ID
        h = h or _ID
        self.R = compose(k, self.R, h)
        self.H = h @ self.H
        self.K = k @ self.K
        self.trace.append(TraceStep(f"{self.family}: {name}", self.R, h, k, note))

    def note(self, text: str) -> None:
        self.trace.append(TraceStep(f"{self.family}: note", self.R, _ID, _ID, text))

    def zero(self, v) -> bool:
        return is_zero(v, self.R.scale())

    def decide(self, what: str, raw: bool, forced: bool | None) -> bool:
        if forced is None or forced == raw:
            return raw
        self.note(f"override: {what} is {raw} by coefficients, {forced} by invariants")
        return forced


def _lin(m11, m12, m21, m22, t1=0, t2=0) -> AffineMap2:
    return AffineMap2(m11, m12, m21, m22, t1, t2)


def _inv(v):
    return 1 / Fraction(v) if is_exact(v) else 1.0 / v


def _sqrt_abs(v):
    return exact_sqrt(abs(v))


# -- invariants used for routing ---------------------------------------------

def homogeneous_family(Q: QuadraticMap, tol: float | None = None) -> ClassLabel:
    """Which of the six homogeneous forms ``Q``'s quadratic part is equivalent to.

    The quadratic part of ``det DQ`` is a binary form whose discriminant sign
    separates E2, H3, P3.  When it vanishes the two components have
    proportional quadratic parts, and the discriminant of that common form
    separates DE3, DH2, DP5.
    """
    Q.require_quadratic(tol)
    c = det_jacobian_conic(Q)
    s = Q.quadratic_scale()
    if not all(is_zero(v, s * s, tol) for v in (c.A, c.B, c.C)):
        big = max(abs(float(v)) for v in (c.A, c.B, c.C))
        mag = float(c.B) ** 2 + 4 * abs(float(c.A * c.C)) + big * big
        d = sign(c.B * c.B - 4 * c.A * c.C, mag, tol)
        return {-1: _L.E2, 1: _L.H3, 0: _L.P3}[d]
    if Q.is_exact:
        a, b = Q.first[:3], Q.second[:3]
        form = a if any(v != 0 for v in a) else b
    else:
        M = np.array([[float(v) for v in Q.first[:3]], [float(v) for v in Q.second[:3]]])
        _, S, Vt = np.linalg.svd(M)
        form = tuple(S[0] * Vt[0])
    big = max(abs(float(v)) for v in form)
    mag = float(form[1]) ** 2 + 4 * abs(float(form[0] * form[2])) + big * big
    d = sign(form[1] * form[1] - 4 * form[0] * form[2], mag, tol)
    return {-1: _L.DH2, 1: _L.DE3, 0: _L.DP5}[d]


def expected_label(Q: QuadraticMap, tol: float | None = None) -> ClassLabel | None:
    """Label predicted from affine invariants, or ``None`` if they are inconsistent."""
    return _EXPECTED.get((homogeneous_family(Q, tol), j0j1_class(Q, tol)))


# -- homogeneous part ------------------------------------------------------

def _kill_x2002(ch: _Chain) -> None:
    """Q0 -> Q1: make ``X_20:02 = a20 b02 - a02 b20`` vanish."""
    R = ch.R
    c = det_jacobian_conic(R)
    s2 = R.quadratic_scale() ** 2
    if is_zero(c.B, s2):
        return
    if R.is_exact:
        # A domain shear completes the square in the quadratic part of det DQ.
        if c.A != 0:
            t = -c.B / (2 * c.A)
            ch.step("Q0→Q1", pre=_lin(1, t, 0, 1), note="shear (exact)")
        elif c.C != 0:
            t = -c.B / (2 * c.C)
            ch.step("Q0→Q1", pre=_lin(1, 0, t, 1), note="shear (exact)")
        else:
            ch.step("Q0→Q1", pre=_lin(1, 1, 1, -1), note="h(x,y)=(x+y,x-y) (exact)")
        return

    Rf = R.to_float()

    def x2002(theta):
        rot = AffineMap2.rotation(theta)
        T = compose(rot, Rf, rot)
        return T.a20 * T.b02 - T.a02 * T.b20

    lo, hi = 0.0, math.pi / 2
    flo = x2002(lo)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        fm = x2002(mid)
        if fm == 0:
            lo = hi = mid
            break
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    rot = AffineMap2.rotation(theta)
    ch.step("Q0→Q1", k=rot, h=rot, note=f"rotation theta={theta:.17g}")


def _homogeneous_chain(ch: _Chain, target: ClassLabel | None) -> ClassLabel:
    """Apply the linear steps taking ``pi(R)`` to one of the six forms."""
    _kill_x2002(ch)
    R = ch.R
    S = AffineMap2.swap()
    # Q1 -> Q2: make a20 nonzero, choosing the best-conditioned swap
    options = [
        ("identity", None, None, R.a20),
        ("S Q1", S, None, R.b20),
        ("Q1 S", None, S, R.a02),
        ("S Q1 S", S, S, R.b02),
    ]
    best = max(options, key=lambda o: abs(float(o[3])))
    if not ch.zero(best[3]):
        if best[0] != "identity":
            ch.step("Q1→Q2", k=best[1], pre=best[2], note=best[0])
    else:
        ch.step("Q1→Q2", pre=_lin(1, 1, 1, -1), note="h(x,y)=(x+y,x-y)")
        if ch.zero(ch.R.a20):
            ch.step("Q1→Q2", k=S, note="S Q1 h")
    R = ch.R
    r = R.b20 * _inv(R.a20)
    ch.step("Q2→Q3", k=_lin(1, 0, -r, 1), note="k(x,y)=(x,-rx+y)")
    ch.step("Q2→Q3", k=_lin(_inv(ch.R.a20), 0, 0, 1), note="k(x,y)=(x/a20,y)")

    forced_b11 = None
    forced_sign = None
    if target is not None:
        forced_b11 = target in (_L.E2, _L.H3, _L.P3)
        forced_sign = {_L.E2: -1, _L.DE3: -1, _L.P3: 0, _L.DP5: 0, _L.H3: 1, _L.DH2: 1}[target]

    b11_nonzero = ch.decide("b11 != 0", not ch.zero(ch.R.b11), forced_b11)
    if b11_nonzero:
        R = ch.R
        ch.step("Q3→Q4", k=_lin(1, -R.a11 * _inv(R.b11), 0, 1))
        a02 = ch.R.a02
        sg = sign(a02, ch.R.scale())
        sg = ch.decide("sign(a02)", sg, forced_sign)
        if sg == 0:
            ch.step("Q4→P3", k=_lin(1, 0, 0, _inv(ch.R.b11)))
            return _L.P3
        name = "Q4→E2" if sg < 0 else "Q4→H3"
        ch.step(name, pre=_lin(1, 0, 0, _inv(_sqrt_abs(a02))))
        ch.step(name, k=_lin(1, 0, 0, _inv(ch.R.b11)))
        return _L.E2 if sg < 0 else _L.H3
    # b11 = 0: complete the square in the domain
    ch.step("Q3→Q5", pre=_lin(1, -ch.R.a11 * _HALF, 0, 1), note="h(x,y)=(x-a11 y/2,y)")
    a02 = ch.R.a02
    sg = ch.decide("sign(a02)", sign(a02, ch.R.scale()), forced_sign)
    if sg == 0:
        return _L.DP5
    name = "Q5→DE3" if sg < 0 else "Q5→DH2"
    ch.step(name, pre=_lin(1, 0, 0, _inv(_sqrt_abs(a02))))
    return _L.DE3 if sg < 0 else _L.DH2


def reduce_homogeneous(H0: HomogeneousPart) -> tuple[ClassLabel, WitnessPair]:
    """Linear witnesses taking a homogeneous quadratic map to one of six forms.

    Raises:
        NotQuadraticError: if all six coefficients vanish.
    """
    Q = H0.as_map()
    Q.require_quadratic()
    ch = _Chain(Q, "homogeneous")
    label = _homogeneous_chain(ch, homogeneous_family(Q))
    return label, WitnessPair(ch.H, ch.K)


# -- long cases --------------------------------------------------------------

def find_positive_cubic_root(c3, c1, c0) -> float:
    """Positive root of ``c3 p^3 + c1 p + c0`` given ``c3 > 0`` and ``c0 < 0``.

    With no quadratic term and those signs there is exactly one positive
    root.  The bracket ``[0, hi]`` is grown by doubling until ``f(hi) > 0``
    and then bisected to full precision; of the two final bracket ends the
    one with the smaller exact residual is returned.

    Raises:
        NoGuaranteedRootError: if ``c3 <= 0`` or ``c0 >= 0``.
    """
    c3, c1, c0 = float(c3), float(c1), float(c0)
    if not (c3 > 0 and c0 < 0):
        raise NoGuaranteedRootError(f"need c3 > 0 and c0 < 0, got c3={c3}, c0={c0}")

    def f(p):
        return (c3 * p * p + c1) * p + c0

    lo, hi = 0.0, 1.0
    while f(hi) <= 0:
        lo, hi = hi, 2 * hi
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid

    def exact_f(p):
        q = Fraction(p)
        return abs((Fraction(c3) * q * q + Fraction(c1)) * q + Fraction(c0))

    # float evaluation near the root is noisier than the gap between lo and hi
    return lo if exact_f(lo) <= exact_f(hi) else hi


@dataclass(frozen=True)
class LongCaseSolution:
    """Coefficients of ``h = (p0 x + q0 y + u0, r0 x + s0 y + v0)`` and
    ``k = (p x + q y + u, r x + s y + v)`` with ``N o h = k o Q2``."""

    b10: float
    p0: float
    q0: float
    r0: float
    s0: float
    u0: float
    v0: float
    p: float
    q: float
    r: float
    s: float
    u: float
    v: float
    residuals: tuple = ()

    @property
    def h(self) -> AffineMap2:
        return AffineMap2(self.p0, self.q0, self.r0, self.s0, self.u0, self.v0)

    @property
    def k(self) -> AffineMap2:
        return AffineMap2(self.p, self.q, self.r, self.s, self.u, self.v)

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0


def _matching_residuals(N: QuadraticMap, Q2: QuadraticMap, h: AffineMap2, k: AffineMap2) -> tuple:
    """The twelve coefficient equations of ``N o h = k o Q2``, as absolute residuals."""
    lhs = precompose(N, h)
    rhs = postcompose(k, Q2)
    return tuple(abs(float(a - b)) for a, b in zip(lhs.coefficients(), rhs.coefficients()))


def _finish_longcase(name, N, Q2, b, vals) -> LongCaseSolution:
    sol = LongCaseSolution(b, *vals)
    res = _matching_residuals(N, Q2, sol.h, sol.k)
    sol = LongCaseSolution(b, *vals, residuals=res)
    if not (max(res) <= LONGCASE_LIMIT):
        raise VerificationError(f"{name} long case failed at b10={b!r}",
                                residual=max(res), details={"residuals": res})
    return sol


def elliptic_cubic(b10) -> tuple[float, float, float]:
    b2 = float(b10) ** 2
    return (64 * b2 * b2 + 32 * b2 + 4, -(12 * b2 + 3), -1.0)


def hyperbolic_cubic(b10) -> tuple[float, float, float]:
    b2 = float(b10) ** 2
    return (64 * b2 * b2 - 32 * b2 + 4, 12 * b2 - 3, -1.0)


def solve_elliptic_longcase(b10) -> LongCaseSolution:
    """Witness taking ``(x^2 - y^2 + x, xy + b10 x)`` to E1.

    Raises:
        VerificationError: if any of the twelve matching equations has residual
            above 1e-9 (per-equation residuals are in ``details``).
    """
    b = float(b10)
    p0 = find_positive_cubic_root(*elliptic_cubic(b))
    r = -2 * b * p0 * p0 / ((8 * b * b + 2) * p0 + 1)
    s0 = p0
    r0 = r / p0
    q0 = -r / s0
    den = 2 * (q0 * q0 + s0 * s0)
    u0 = -q0 * q0 / den
    v0 = s0 * q0 / den
    q = 2 * p0 * q0 - 2 * r0 * s0
    s = p0 * s0 + q0 * r0
    p = p0 * p0 - r0 * r0
    u = u0 * u0 - v0 * v0 + u0
    v = u0 * v0
    Q2 = QuadraticMap(1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, b, 0.0, 0.0)
    return _finish_longcase("elliptic", NORMAL_FORMS[_L.E1], Q2, b,
                            (p0, q0, r0, s0, u0, v0, p, q, r, s, u, v))


def solve_hyperbolic_longcase(b10) -> LongCaseSolution:
    """Witness taking ``(x^2 + y^2 + x, xy + b10 x)`` to H1.

    Raises:
        WrongBranchError: if ``b10`` is 0 or +-1/2 within tolerance.
        VerificationError: if the matching equations are not satisfied.
    """
    b = float(b10)
    for bad in (0.0, 0.5, -0.5):
        if is_zero(b - bad, 1.0):
            raise WrongBranchError(f"b10={b10!r} belongs to another branch")
    p0 = find_positive_cubic_root(*hyperbolic_cubic(b))
    d1 = (8 * b * b - 2) * p0 - 1
    r = 2 * b * p0 * p0 / d1
    r0 = q0 = r / p0
    s0 = p0
    p = s = p0 * p0 + r0 * r0
    q = 4 * r
    d2 = 2 * (q0 * q0 - s0 * s0)
    u0 = -q0 * q0 / d2
    v0 = s0 * q0 / d2
    u = v0 * v0 + u0 * u0 + u0
    v = u0 * v0
    if d1 == 0 or d2 == 0:
        raise VerificationError(f"hyperbolic long case has a zero denominator at b10={b!r}",
                                details={"denominators": (d1, d2)})
    Q2 = QuadraticMap(1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, b, 0.0, 0.0)
    return _finish_longcase("hyperbolic", NORMAL_FORMS[_L.H1], Q2, b,
                            (p0, q0, r0, s0, u0, v0, p, q, r, s, u, v))


# -- families ----------------------------------------------------------------

def _scale_step(ch: _Chain, name: str, a) -> None:
    """``k R h^-1`` with ``h = (x/a, y/a)`` and ``k = (x/a^2, y/a^2)``."""
    ia = _inv(a)
    ch.step(name, h=_lin(ia, 0, 0, ia), k=_lin(ia * ia, 0, 0, ia * ia))


def _forced_nonzero(target, yes, no):
    if target is None:
        return None
    if target in yes:
        return True
    if target in no:
        return False
    return None


def _elliptic(ch: _Chain, target) -> ClassLabel:
    R = ch.R
    ch.step("Q0→Q1", pre=AffineMap2.translation(-R.b01, R.a01 * _HALF))
    R = ch.R
    a_nz, b_nz = not ch.zero(R.a10), not ch.zero(R.b10)
    if target is _L.E2:
        a_nz = ch.decide("a10 != 0", a_nz, False)
        b_nz = ch.decide("b10 != 0", b_nz, False)
    elif target is _L.E1 and not (a_nz or b_nz) and (R.a10 != 0 or R.b10 != 0):
        ch.note("override: linear terms are tiny but invariants say E1")
        a_nz = abs(R.a10) >= abs(R.b10)
        b_nz = not a_nz
    if a_nz:
        _scale_step(ch, "Q1→Q2", R.a10)
        sol = solve_elliptic_longcase(ch.R.b10)
        ch.step("Q2→E1", h=sol.h, k=sol.k, note=f"long case, p0={sol.p0:.17g}")
        return _L.E1
    if b_nz:
        _scale_step(ch, "Q1→Q3", R.b10)
        ch.step("Q3→E1", h=_lin(0, -_HALF, _HALF, 0, -_HALF, 0),
                k=_lin(-Fraction(1, 4), 0, 0, -Fraction(1, 4), -Fraction(1, 4), 0))
        return _L.E1
    return _L.E2


def _boost(alpha: float) -> tuple[AffineMap2, AffineMap2]:
    """Symmetry of ``(x^2 + y^2, xy)``: scale ``x + y`` by ``alpha`` and ``x - y`` by ``1/alpha``.

    Returns ``(g, k)`` with ``k o (x^2 + y^2, xy) o g = (x^2 + y^2, xy)``.
    """
    c, s = (alpha + 1 / alpha) / 2, (alpha - 1 / alpha) / 2
    g = _lin(c, s, s, c)
    a2, ia2 = alpha * alpha, 1 / (alpha * alpha)
    k = _lin((ia2 + a2) / 2, ia2 - a2, (ia2 - a2) / 4, (ia2 + a2) / 2)
    return g, k


# Below this distance from +-1/2 the long-case witness loses accuracy.
_H2_MARGIN = 0.05


def _hyperbolic(ch: _Chain, target, depth: int = 0) -> ClassLabel:
    R = ch.R
    ch.step("Q0→Q1", pre=AffineMap2.translation(-R.b01, -R.a01 * _HALF))
    R = ch.R
    a_nz, b_nz = not ch.zero(R.a10), not ch.zero(R.b10)
    if target is _L.H3:
        a_nz = ch.decide("a10 != 0", a_nz, False)
        b_nz = ch.decide("b10 != 0", b_nz, False)
    elif target is _L.H2 and not a_nz and R.a10 != 0:
        a_nz = ch.decide("a10 != 0", a_nz, True)
    elif target is _L.H1 and not (a_nz or b_nz) and (R.a10 != 0 or R.b10 != 0):
        ch.note("override: linear terms are tiny but invariants say H1")
        a_nz = abs(R.a10) >= abs(R.b10)
        b_nz = not a_nz
    if a_nz:
        _scale_step(ch, "Q1→Q2", R.a10)
        b = ch.R.b10
        near = [h for h in (_HALF, -_HALF) if ch.zero(b - h)]
        half = near[0] if near else None
        if target is _L.H2 and half is None:
            half = _HALF if b > 0 else -_HALF
            ch.note(f"override: b10={b} treated as {half} by invariants")
        elif target is _L.H1 and half is not None:
            ch.note(f"override: b10={b} is near {half} but invariants say H1")
            half = None
        if half is not None:
            if half < 0:
                flip = _lin(1, 0, 0, -1)
                ch.step("Q2→H2", h=flip, k=flip, note="h=k=(x,-y)")
            return _L.H2
        if ch.zero(b):
            return _L.H1
        # In u = x + y, v = x - y the map is (u^2 + al v, v^2 + be u) up to
        # affine changes; the boost rescales al, be by a^-3, a^3.
        al, be = abs(1 + 2 * float(b)), abs(1 - 2 * float(b))
        if abs(abs(float(b)) - 0.5) < _H2_MARGIN and depth == 0 and al * be > 0:
            g, k = _boost((al / be) ** (1 / 6))
            ch.step("Q2→Q0", pre=g, k=k, note="re-route away from b10=+-1/2 by a symmetry of H3")
            return _hyperbolic(ch, target, depth + 1)
        sol = solve_hyperbolic_longcase(b)
        ch.step("Q2→H1", h=sol.h, k=sol.k, note=f"long case, p0={sol.p0:.17g}")
        return _L.H1
    if b_nz:
        _scale_step(ch, "Q1→Q3", R.b10)
        ch.step("Q3→H1", h=_lin(0, -_HALF, -_HALF, 0, -_HALF, 0),
                k=_lin(Fraction(1, 4), 0, 0, Fraction(1, 4), -Fraction(1, 4), 0))
        return _L.H1
    return _L.H3


def _parabolic(ch: _Chain, target) -> ClassLabel:
    R = ch.R
    ch.step("Q0→Q1", pre=AffineMap2.translation(-R.a10 * _HALF, -R.b10))
    R = ch.R
    a_nz = ch.decide("a01 != 0", not ch.zero(R.a01), _forced_nonzero(target, (_L.P1,), (_L.P2, _L.P3)))
    if a_nz:
        _scale_step(ch, "Q1→Q2", R.a01)
        c = ch.R.b01
        ch.step("Q2→P1",
                h=_lin(1, 0, -2 * c / 3, 1, c / 3, 2 * c * c / 9),
                k=_lin(1, 0, -2 * c / 3, 1, c * c / 3, 2 * c ** 3 / 27))
        return _L.P1
    b_nz = ch.decide("b01 != 0", not ch.zero(R.b01), _forced_nonzero(target, (_L.P2,), (_L.P3,)))
    if b_nz:
        ib = _inv(R.b01)
        ch.step("Q1→P2", h=_lin(ib, 0, 0, 1), k=_lin(ib * ib, 0, 0, ib))
        return _L.P2
    return _L.P3


def _deg_elliptic(ch: _Chain, target) -> ClassLabel:
    R = ch.R
    ch.step("Q0→Q1", pre=AffineMap2.translation(-R.a10 * _HALF, R.a01 * _HALF))
    R = ch.R
    b10_z, b01_z = ch.zero(R.b10), ch.zero(R.b01)
    if target is _L.DE3:
        b10_z = not ch.decide("b10 != 0", not b10_z, False)
        b01_z = not ch.decide("b01 != 0", not b01_z, False)
    if b10_z and b01_z:
        return _L.DE3
    if b10_z:
        ch.step("Q1→DE1", k=_lin(1, 0, 0, _inv(R.b01)))
        return _L.DE1
    if abs(R.b01) > abs(R.b10):
        # x^2 - y^2 is anti-symmetric under the swap; this keeps |b01/b10| <= 1
        ch.step("Q1→Q1'", pre=AffineMap2.swap(), k=_lin(-1, 0, 0, 1), note="swap x and y")
    ch.step("Q1→Q2", k=_lin(1, 0, 0, _inv(ch.R.b10)))
    b = ch.R.b01
    near = [s for s in (1, -1) if ch.zero(b - s)]
    unit = near[0] if near else None
    if target is _L.DE2 and unit is None:
        unit = 1 if b > 0 else -1
        ch.note(f"override: b01={b} treated as {unit} by invariants")
    elif target is _L.DE1 and unit is not None:
        ch.note(f"override: b01={b} is near {unit} but invariants say DE1")
        unit = None
    if unit is not None:
        if unit < 0:
            ch.step("Q2→DE2", pre=_lin(1, 0, 0, -1))
        return _L.DE2
    ch.step("Q2→DE1", h=_lin(b, 1, 1, b), k=_lin(b * b - 1, 0, 0, 1))
    return _L.DE1


def _deg_hyperbolic(ch: _Chain, target) -> ClassLabel:
    R = ch.R
    ch.step("Q0→Q1", pre=AffineMap2.translation(-R.a10 * _HALF, -R.a01 * _HALF))
    R = ch.R
    b10_z, b01_z = ch.zero(R.b10), ch.zero(R.b01)
    if target is _L.DH2:
        b10_z = not ch.decide("b10 != 0", not b10_z, False)
        b01_z = not ch.decide("b01 != 0", not b01_z, False)
    if b10_z and b01_z:
        return _L.DH2
    if b10_z:
        ch.step("Q1→DH1", k=_lin(1, 0, 0, _inv(R.b01)))
        return _L.DH1
    ch.step("Q1→Q2", k=_lin(1, 0, 0, _inv(R.b10)))
    b = ch.R.b01
    if abs(float(b) - 1) >= 0.25:
        c = (b + 1) * _inv(b - 1)
        ch.step("Q2→Q3", h=_lin(1, -c, -c, -1),
                k=_lin(2 * (b * b + 1) * _inv((b - 1) ** 2), 0, 0, -2 * _inv(b - 1)))
    elif not ch.zero(b - 1):
        # Near b01 = 1 the step above degenerates; an orthogonal change keeps
        # x^2 + y^2 and turns x + b01 y into a multiple of y directly.
        rho = math.hypot(1.0, float(b))
        n = (1.0 / rho, float(b) / rho)
        ch.step("Q2→DH1", pre=_lin(-n[1], n[0], n[0], n[1]), note="rotation")
        ch.step("Q2→DH1", k=_lin(1, 0, 0, 1 / rho))
        return _L.DH1
    # Q3 -> Q4 inverts the Q2 -> Q3 step at b01 = 0, then Q4 -> DH1 swaps x, y
    ch.step("Q3→Q4", h=_lin(_HALF, _HALF, _HALF, -_HALF), k=_lin(_HALF, 0, 0, _HALF))
    ch.step("Q4→DH1", pre=AffineMap2.swap())
    return _L.DH1


def _deg_parabolic(ch: _Chain, target) -> ClassLabel:
    R = ch.R
    ch.step("Q0→Q1", pre=AffineMap2.translation(-R.a10 * _HALF, 0))
    R = ch.R
    f_b10 = _forced_nonzero(target, (_L.DP1, _L.DP4), (_L.DP3, _L.DP5))
    f_b01 = _forced_nonzero(target, (_L.DP2,), (_L.DP1, _L.DP3, _L.DP4, _L.DP5))
    f_a01 = _forced_nonzero(target, (_L.DP1, _L.DP3), (_L.DP4, _L.DP5))
    if ch.decide("b10 != 0", not ch.zero(R.b10), f_b10):
        ch.step("Q1→Q2", k=_lin(1, 0, 0, _inv(R.b10)))
        R = ch.R
        if ch.decide("b01 != 0", not ch.zero(R.b01), f_b01):
            ch.step("Q2→Q3", pre=_lin(1, 0, 0, _inv(R.b01)))
            a = ch.R.a01
            ch.step("Q3→DP2", h=_lin(2, 0, 1, 1, -a, 0), k=_lin(4, -4 * a, 0, 1, a * a, 0))
            return _L.DP2
        if ch.decide("a01 != 0", not ch.zero(R.a01), f_a01):
            ch.step("Q2→DP1", pre=_lin(1, 0, 0, _inv(R.a01)))
            return _L.DP1
        return _L.DP4
    if ch.decide("b01 != 0", not ch.zero(R.b01), f_b01):
        ch.step("Q1→Q4", k=_lin(1, 0, 0, _inv(R.b01)))
        ch.step("Q4→DP2", k=_lin(1, -ch.R.a01, 0, 1))
        return _L.DP2
    if ch.decide("a01 != 0", not ch.zero(R.a01), f_a01):
        ch.step("Q1→DP3", pre=_lin(1, 0, 0, _inv(R.a01)))
        return _L.DP3
    return _L.DP5


_FAMILY_CHAINS = {
    _L.E2: ("elliptic", _elliptic),
    _L.H3: ("hyperbolic", _hyperbolic),
    _L.P3: ("parabolic", _parabolic),
    _L.DE3: ("degenerate elliptic", _deg_elliptic),
    _L.DH2: ("degenerate hyperbolic", _deg_hyperbolic),
    _L.DP5: ("degenerate parabolic", _deg_parabolic),
}


# -- public entry points -----------------------------------------------------

def verify_witness(Q: QuadraticMap, label: ClassLabel, w: WitnessPair) -> float:
    """Max coefficient deviation of ``compose(k, Q, h)`` from the normal form, constants ignored."""
    R = compose(w.k, Q, w.h).without_constants()
    return max(abs(float(a - b)) for a, b in zip(R.coefficients(), ClassLabel(label).normal_form.coefficients()))


def residual_limit(Q: QuadraticMap) -> float:
    return RESIDUAL_LIMIT * max(1.0, Q.scale())


def classify(Q: QuadraticMap, tol: float | None = None, verify: bool = True) -> ClassificationResult:
    """Reduce ``Q`` to its normal form and return the verified witness.

    Raises:
        NotQuadraticError: if ``Q`` has no degree-two terms.
        VerificationError: if the composed witness misses the normal form by
            more than ``1e-6 * max(1, scale(Q))``, or the reduction divides by
            a coefficient that the tolerance failed to treat as zero.
    """
    from .core import tolerance

    if tol is not None:
        with tolerance(tol):
            return classify(Q, None, verify)
    Q.require_quadratic()
    if Q.is_exact:
        Q = QuadraticMap(*(Fraction(c) for c in Q.coefficients()))
    else:
        Q = Q.to_float()
    family = homogeneous_family(Q)
    case = j0j1_class(Q)
    target = _EXPECTED.get((family, case))
    ch = _Chain(Q, "homogeneous")
    if target is None:
        ch.note(f"invariants inconsistent ({family.value}, case {case.value}); using raw tests")
    try:
        reached = _homogeneous_chain(ch, family)
        name, chain = _FAMILY_CHAINS[reached]
        ch.family = name
        label = chain(ch, target)
    except ZeroDivisionError as exc:
        # only reachable when the tolerance is too small for the input
        raise VerificationError(f"reduction broke down: {exc}", trace=list(ch.trace)) from None
    ch.family = "cleanup"
    ch.step("constants", k=AffineMap2.translation(-ch.R.a00, -ch.R.b00))
    witness = WitnessPair(ch.H, ch.K)
    residual = verify_witness(Q, label, witness)
    result = ClassificationResult(label, witness, residual, tuple(ch.trace), family, case)
    if verify and not residual <= residual_limit(Q):
        raise VerificationError(f"witness residual {residual:.3g} for {label.value}",
                                residual=residual, trace=list(ch.trace))
    return result
