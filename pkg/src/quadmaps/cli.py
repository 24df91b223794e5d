"""Command-line interface: ``quadmaps classify|plot|scan|selftest``.

Map input (a *MapSpec*) is a JSON object holding the twelve coefficients,
either at top level or under ``"coefficients"``::

    {"coefficients": {"a20": 1, "a11": 0, "a02": -1, "a10": 1, "a01": 0, "a00": 0,
                      "b20": 0, "b11": 1, "b02": 0, "b10": 0, "b01": 0, "b00": 0},
     "label": "E1", "mode": "exact"}

Keys follow the monomials: ``a20`` multiplies ``x^2`` in the first
component, ``b01`` multiplies ``y`` in the second, and so on; the order
``a20 a11 a02 a10 a01 a00 b20 b11 b02 b10 b01 b00`` is used wherever a flat
list appears.  ``label`` is an optional hint that is checked against the
result; ``mode`` is ``"exact"`` (rationals, strings such as ``"3/7"``
allowed) or ``"float"``.

Exit codes: 0 success, 2 malformed input, 3 domain error (for example a map
that is not quadratic), 4 witness verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .analyze import (
    critical_set_class_of,
    preimage_profile,
    quadratic_inverse,
    smooth_class_of,
)
from .core import COEFF_NAMES, QuadraticMap, get_tolerance, to_number, tolerance
from .critical import classify_critical_conic, j0j1_class
from .errors import QuadMapError, VerificationError
from .normalize import ClassLabel, classify

EXIT_OK, EXIT_PARSE, EXIT_DOMAIN, EXIT_VERIFY = 0, 2, 3, 4


class InputError(Exception):
    """Malformed MapSpec (exit code 2)."""


# -- MapSpec -----------------------------------------------------------------

@dataclass(frozen=True)
class MapSpec:
    coefficients: tuple
    label: str | None = None
    exact: bool = False

    def to_map(self) -> QuadraticMap:
        return QuadraticMap.from_coefficients(self.coefficients)


def _number(value, exact: bool):
    try:
        return to_number(value, exact)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InputError(f"bad coefficient {value!r}: {exc}") from None


def parse_mapspec(data, exact: bool | None = None) -> MapSpec:
    """Build a MapSpec from decoded JSON (an object or a list of 12 numbers).

    ``exact`` overrides the document's ``mode``.  Missing coefficients are
    zero; unknown keys are rejected.
    """
    label = None
    mode = None
    if isinstance(data, list):
        raw = dict(zip(COEFF_NAMES, data))
        if len(data) != 12:
            raise InputError(f"expected 12 coefficients, got {len(data)}")
    elif isinstance(data, dict):
        label = data.get("label")
        mode = data.get("mode")
        raw = data.get("coefficients", {k: v for k, v in data.items() if k not in ("label", "mode")})
        if isinstance(raw, list):
            if len(raw) != 12:
                raise InputError(f"expected 12 coefficients, got {len(raw)}")
            raw = dict(zip(COEFF_NAMES, raw))
        if not isinstance(raw, dict):
            raise InputError("coefficients must be an object or a list")
        unknown = set(raw) - set(COEFF_NAMES)
        if unknown:
            raise InputError(f"unknown coefficient keys: {sorted(unknown)}")
    else:
        raise InputError("MapSpec must be a JSON object or list")
    if mode not in (None, "exact", "float"):
        raise InputError(f"mode must be 'exact' or 'float', got {mode!r}")
    if label is not None and label not in {lab.value for lab in ClassLabel}:
        raise InputError(f"unknown label hint {label!r}")
    use_exact = exact if exact is not None else mode == "exact"
    coeffs = tuple(_number(raw.get(k, 0), use_exact) for k in COEFF_NAMES)
    return MapSpec(coeffs, label, use_exact)


def mapspec_from_map(Q: QuadraticMap, label: str | None = None) -> dict:
    return {"coefficients": {k: _json_number(v) for k, v in zip(COEFF_NAMES, Q.coefficients())},
            "label": label, "mode": "exact" if Q.is_exact else "float"}


def _read_input(args) -> MapSpec:
    exact = True if args.exact else None
    if getattr(args, "form", None):
        try:
            label = ClassLabel(args.form)
        except ValueError:
            raise InputError(f"unknown normal form {args.form!r}") from None
        return MapSpec(label.normal_form.coefficients(), label.value, True)
    if getattr(args, "coeffs", None):
        parts = [p for p in args.coeffs.replace(",", " ").split() if p]
        return parse_mapspec(parts, exact)
    source = args.input or "-"
    try:
        text = sys.stdin.read() if source == "-" else open(source, encoding="utf-8").read()
    except OSError as exc:
        raise InputError(str(exc)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc}") from None
    return parse_mapspec(data, exact)


# -- Report --------------------------------------------------------------------

def _json_number(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else v.numerator
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


@dataclass
class Report:
    """Everything ``classify`` prints; all fields are plain JSON values."""

    input: dict
    label: str
    witness: dict
    residual: float
    j0: dict
    j1: dict
    critical_set_class: str
    smooth_class: str
    preimage_profile: list
    trace: list
    label_hint_matches: bool | None = None
    quadratic_inverse: dict | None = None
    seed: int = 0
    tolerance: float = field(default_factory=get_tolerance)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls(**json.loads(text))


def build_report(spec: MapSpec, seed: int = 0, profile_samples: int = 200) -> Report:
    Q = spec.to_map()
    result = classify(Q)
    conic = classify_critical_conic(Q)
    case = j0j1_class(Q)
    profile = preimage_profile(Q, profile_samples, seed)
    inverse = None
    if result.label is ClassLabel.DP1:
        inverse = mapspec_from_map(quadratic_inverse(Q))["coefficients"]
    hint = None if spec.label is None else spec.label == result.label.value
    return Report(
        input=mapspec_from_map(Q, spec.label),
        label=result.label.value,
        witness={"h": [_json_number(c) for c in result.witness.h.coefficients()],
                 "k": [_json_number(c) for c in result.witness.k.coefficients()],
                 "convention": "normal form = k o Q o h^-1; affine maps as m11 m12 m21 m22 t1 t2"},
        residual=float(result.residual),
        j0={"tag": conic.tag.value},
        j1={"class": case.value, "tag": case.j1_tag, "description": case.description},
        critical_set_class=critical_set_class_of(result.label).value,
        smooth_class=smooth_class_of(result.label).value,
        preimage_profile=sorted((str(c) for c in profile), key=lambda s: (len(s), s)),
        trace=[step.as_dict() for step in result.trace],
        label_hint_matches=hint,
        quadratic_inverse=inverse,
        seed=seed,
        tolerance=get_tolerance(),
    )


def _fail(code: int, exc: BaseException) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, VerificationError):
        payload["residual"] = exc.residual
    print(json.dumps(payload, indent=2, default=str))
    return code


# -- subcommands ---------------------------------------------------------------

def cmd_classify(args) -> int:
    spec = _read_input(args)
    print(build_report(spec, args.seed, args.samples).to_json())
    return EXIT_OK


def _parse_pair(text: str, name: str) -> tuple[float, float]:
    try:
        a, b = (float(p) for p in text.split(","))
    except ValueError:
        raise InputError(f"{name} must look like 'x,y'") from None
    return a, b


def cmd_plot(args) -> int:
    from .plotting import plot_disk_image

    spec = _read_input(args)
    Q = spec.to_map()
    label = ClassLabel(spec.label) if spec.label else classify(Q).label
    center = _parse_pair(args.center, "--center") if args.center else None
    if args.radius <= 0:
        raise InputError("--radius must be positive")
    info = plot_disk_image(Q, args.output, center, args.radius, label, args.seed)
    print(json.dumps({"output": args.output, "label": label.value, **info}))
    return EXIT_OK


def _parse_direction(text: str) -> np.ndarray:
    vec = np.zeros(12)
    for part in text.split(","):
        if not part.strip():
            continue
        try:
            key, value = part.split("=")
            vec[COEFF_NAMES.index(key.strip())] = float(value)
        except ValueError:
            raise InputError(f"direction entries look like 'a10=1', got {part!r}") from None
    return vec


def _scan_cell(job):
    coeffs, tol = job
    with tolerance(tol):
        try:
            return classify(QuadraticMap(*coeffs)).label.value
        except QuadMapError:
            return "?"


def scan_grid(base: np.ndarray, d1: np.ndarray, d2: np.ndarray, s_values, t_values,
              workers: int = 1) -> list[list[str]]:
    """Labels of ``base + s d1 + t d2``; rows follow ``t``, columns follow ``s``.

    Raises:
        QuadMapError: if the directions are not linearly independent.
    """
    if np.linalg.matrix_rank(np.array([d1, d2]), tol=1e-12) < 2:
        raise QuadMapError("scan directions must be linearly independent")
    jobs = [(tuple(float(c) for c in base + s * d1 + t * d2), get_tolerance())
            for t in t_values for s in s_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_scan_cell, jobs, chunksize=16))
    else:
        flat = [_scan_cell(j) for j in jobs]
    n = len(s_values)
    return [flat[i * n:(i + 1) * n] for i in range(len(t_values))]


def _axis(text: str, count: int) -> np.ndarray:
    lo, hi = _parse_pair(text, "range")
    return np.array([lo]) if count == 1 else np.linspace(lo, hi, count)


def cmd_scan(args) -> int:
    from .plotting import plot_class_map

    spec = _read_input(args)
    base = np.array([float(c) for c in spec.coefficients])
    d1, d2 = _parse_direction(args.dir1), _parse_direction(args.dir2)
    try:
        ns, nt = (int(p) for p in args.resolution.split(","))
    except ValueError:
        raise InputError("--resolution must look like 'ns,nt'") from None
    if ns < 1 or nt < 1:
        raise InputError("--resolution entries must be positive")
    s_values, t_values = _axis(args.s_range, ns), _axis(args.t_range, nt)
    grid = scan_grid(base, d1, d2, s_values, t_values, args.workers)
    with open(args.csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "t", "label"])
        for row, t in zip(grid, t_values):
            for label, s in zip(row, s_values):
                writer.writerow([repr(float(s)), repr(float(t)), label])
    if args.svg:
        plot_class_map(grid, s_values, t_values, args.svg, args.seed)
    counts: dict[str, int] = {}
    for row in grid:
        for label in row:
            counts[label] = counts.get(label, 0) + 1
    print(json.dumps({"csv": args.csv, "svg": args.svg, "cells": ns * nt, "labels": counts},
                     sort_keys=True))
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .acceptance import run_all

    results = run_all(seed=args.seed)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else 1


# -- entry point ---------------------------------------------------------------

def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", nargs="?", help="MapSpec JSON file, or '-' for stdin (default)")
    p.add_argument("--coeffs", help="twelve coefficients a20..b00, comma or space separated")
    p.add_argument("--form", help="use a normal form by label, e.g. E1")


def _add_common(p: argparse.ArgumentParser, defaults: bool) -> None:
    # subcommands repeat the global flags without overriding them
    d = {} if defaults else {"default": argparse.SUPPRESS}
    p.add_argument("--exact", action="store_true", help="rational arithmetic", **d)
    p.add_argument("--tol", type=float, help="zero tolerance (default 1e-9)",
                   **(d or {"default": None}))
    p.add_argument("--seed", type=int, help="seed for all sampling", **(d or {"default": 0}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadmaps", description=__doc__.split("\n")[0])
    _add_common(parser, True)
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="classify a map and print a JSON report")
    _add_input(p)
    p.add_argument("--samples", type=int, default=200, help="targets for the preimage profile")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("plot", parents=[common], help="SVG of the image of a disk with J1 in red")
    _add_input(p)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--center", help="disk centre 'x,y' (default depends on the class)")
    p.add_argument("--radius", type=float, default=1.0)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("scan", parents=[common], help="classify over a 2-parameter family")
    _add_input(p)
    p.add_argument("--dir1", required=True, help="first direction, e.g. 'a10=1,b10=1'")
    p.add_argument("--dir2", required=True, help="second direction")
    p.add_argument("--s-range", default="-1,1")
    p.add_argument("--t-range", default="-1,1")
    p.add_argument("--resolution", default="21,21", help="'ns,nt' grid size")
    p.add_argument("--csv", required=True)
    p.add_argument("--svg")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("selftest", parents=[common], help="run the acceptance criteria")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        if args.tol is not None:
            if args.tol < 0:
                raise InputError("--tol must be non-negative")
            with tolerance(args.tol):
                return args.func(args)
        return args.func(args)
    except InputError as exc:
        return _fail(EXIT_PARSE, exc)
    except VerificationError as exc:
        return _fail(EXIT_VERIFY, exc)
    except (QuadMapError, ValueError) as exc:
        return _fail(EXIT_DOMAIN, exc)
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": 1}))
        return 1
    finally:
        if getattr(args, "command", None) == "selftest":
            print(f"total {time.perf_counter() - start:.1f} s", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
