"""Affine classification of real planar quadratic maps.

Every quadratic map of the plane is affinely map equivalent to exactly one
of eighteen normal forms.  :func:`classify` finds the class together with a
verified witness pair ``(h, k)``; the ``critical`` and ``analyze`` modules
describe the critical set, its image, preimage counts and the coarser
equivalences.
"""

from .analyze import (
    PreimageCardinality,
    SmoothClass,
    critical_set_class_of,
    distinguishing_invariant,
    injective_on_critical_set,
    preimage_count,
    preimage_profile,
    quadratic_inverse,
    range_convexity,
    smooth_class_of,
)
from .core import AffineMap2, QuadraticMap, compose, evaluate, tolerance
from .critical import (
    ConicTag,
    CriticalSetClass,
    classify_conic,
    classify_critical_conic,
    count_cusps,
    critical_set,
    j0j1_class,
    sample_critical_image,
)
from .errors import (
    NotInvertibleError,
    NotQuadraticError,
    QuadMapError,
    VerificationError,
)
from .normalize import ClassificationResult, ClassLabel, NORMAL_FORMS, classify

__version__ = "0.1.0"

__all__ = [
    "AffineMap2",
    "ClassLabel",
    "ClassificationResult",
    "ConicTag",
    "CriticalSetClass",
    "NORMAL_FORMS",
    "NotInvertibleError",
    "NotQuadraticError",
    "PreimageCardinality",
    "QuadMapError",
    "QuadraticMap",
    "SmoothClass",
    "VerificationError",
    "classify",
    "classify_conic",
    "classify_critical_conic",
    "compose",
    "count_cusps",
    "critical_set",
    "critical_set_class_of",
    "distinguishing_invariant",
    "evaluate",
    "injective_on_critical_set",
    "j0j1_class",
    "preimage_count",
    "preimage_profile",
    "quadratic_inverse",
    "range_convexity",
    "sample_critical_image",
    "smooth_class_of",
    "tolerance",
]
