import csv
import io
import json
from fractions import Fraction
from importlib import resources

import numpy as np
import pytest

import quadmaps.acceptance as acceptance
import quadmaps.cli as cli
import quadmaps.normalize as normalize
from quadmaps.acceptance import DELTOID_MAP
from quadmaps.core import COEFF_NAMES, QuadraticMap
from quadmaps.normalize import ClassLabel, classify

L = ClassLabel
SHIPPED = sorted(resources.files("quadmaps").joinpath("data/normal_forms").iterdir(),
                 key=lambda p: p.name)


def run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr().out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out)


def coeff_arg(Q):
    return ",".join(str(c) for c in Q.coefficients())


# -- classify ------------------------------------------------------------------------

def test_classify_e1_form(capsys):
    code, rep = run_json(capsys, "classify", "--form", "E1")
    assert code == cli.EXIT_OK
    assert rep["label"] == "E1"
    assert rep["residual"] == 0
    assert rep["label_hint_matches"] is True
    assert rep["j1"]["tag"] == "3-cusped curve"


def test_classify_deltoid(capsys):
    code, rep = run_json(capsys, "classify", "--coeffs", coeff_arg(DELTOID_MAP))
    assert code == 0 and rep["label"] == "E1"


def test_classify_dp1_reports_inverse(capsys):
    code, rep = run_json(capsys, "classify", "--exact", "--coeffs", "1,0,0,0,1,0,0,0,0,1,0,0")
    assert code == 0 and rep["label"] == "DP1"
    inv = rep["quadratic_inverse"]
    assert [inv[k] for k in COEFF_NAMES] == [0, 0, 0, 0, 1, 0, 0, 0, -1, 1, 0, 0]


def test_classify_stdin(capsys, monkeypatch):
    doc = {"coefficients": {"a20": 1, "b11": 1, "a02": -1, "a10": 1}, "label": "E1"}
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(doc)))
    code, rep = run_json(capsys, "classify")
    assert code == 0 and rep["label"] == "E1" and rep["label_hint_matches"]


def test_classify_rational_strings(tmp_path, capsys):
    path = tmp_path / "q.json"
    path.write_text(json.dumps({"mode": "exact", "coefficients": {"a20": "3/7", "b11": "1/2", "b10": 1}}))
    code, rep = run_json(capsys, "classify", str(path))
    assert code == 0
    assert rep["input"]["coefficients"]["a20"] == "3/7"
    assert rep["residual"] == 0


@pytest.mark.parametrize("path", SHIPPED, ids=lambda p: p.name)
def test_shipped_forms(path, capsys):
    code, rep = run_json(capsys, "classify", str(path))
    assert code == 0
    assert rep["label"] == path.name.removesuffix(".json")
    assert rep["residual"] == 0


def test_shipped_forms_are_distinct():
    assert len(SHIPPED) == 18
    labels = {json.loads(p.read_text())["label"] for p in SHIPPED}
    assert labels == {lab.value for lab in L}


def test_report_round_trip(capsys):
    _, out = run(capsys, "classify", "--form", "H1")
    rep = cli.Report.from_json(out)
    assert rep.to_json() == out.strip()
    assert cli.Report.from_json(rep.to_json()) == rep


def test_report_deterministic(capsys):
    _, a = run(capsys, "--seed", "3", "classify", "--form", "P2")
    _, b = run(capsys, "--seed", "3", "classify", "--form", "P2")
    assert a == b


def test_seed_variation_keeps_labels(capsys):
    rng = np.random.default_rng(5)
    for _ in range(3):
        coeffs = ",".join(repr(float(c)) for c in rng.normal(size=12))
        reps = [run_json(capsys, "--seed", str(s), "classify", f"--coeffs={coeffs}")[1] for s in range(3)]
        assert len({r["label"] for r in reps}) == 1
        assert len({json.dumps(r["witness"]) for r in reps}) == 1
        assert len({r["seed"] for r in reps}) == 3


def test_exit_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, err = run_json(capsys, "classify", str(path))
    assert code == cli.EXIT_PARSE == 2
    assert err["error"] == "InputError"


@pytest.mark.parametrize("doc", [
    {"coefficients": {"a30": 1}},
    {"coefficients": [1, 2, 3]},
    {"mode": "symbolic", "coefficients": {"a20": 1}},
    {"label": "Z9", "coefficients": {"a20": 1}},
    "x^2",
])
def test_exit_bad_mapspec(doc, tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert run(capsys, "classify", str(path))[0] == 2


def test_exit_not_quadratic(capsys):
    code, err = run_json(capsys, "classify", "--coeffs", "0,0,0,1,0,0,0,0,0,0,1,0")
    assert code == cli.EXIT_DOMAIN == 3
    assert err["error"] == "NotQuadraticError"


def test_exit_verification(capsys, monkeypatch):
    monkeypatch.setattr(normalize, "RESIDUAL_LIMIT", -1.0)
    code, err = run_json(capsys, "classify", "--form", "E1")
    assert code == cli.EXIT_VERIFY == 4
    assert err["error"] == "VerificationError" and "residual" in err


def test_global_flags_after_subcommand(capsys):
    _, a = run(capsys, "--seed", "4", "--exact", "classify", "--form", "E2")
    _, b = run(capsys, "classify", "--form", "E2", "--seed", "4", "--exact")
    assert a == b and json.loads(a)["seed"] == 4


def test_exit_negative_tolerance(capsys):
    assert run(capsys, "--tol", "-1", "classify", "--form", "E1")[0] == 2


def test_parse_mapspec_list_and_exact():
    spec = cli.parse_mapspec([1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0], exact=True)
    assert spec.exact and all(isinstance(c, Fraction) for c in spec.coefficients)
    assert classify(spec.to_map()).label is L.DP1


# -- plot ----------------------------------------------------------------------------

def test_plot_e1_has_red_curve(tmp_path, capsys):
    out = tmp_path / "e1.svg"
    code, info = run_json(capsys, "plot", "--form", "E1", "-o", str(out))
    assert code == 0
    svg = out.read_text()
    assert svg.startswith("<?xml") and "#ff0000" in svg
    assert info["j1_polylines"] == 1 and info["center"] == [0.0, 0.0]


def test_plot_dp1_has_no_red(tmp_path, capsys):
    out = tmp_path / "dp1.svg"
    code, info = run_json(capsys, "plot", "--form", "DP1", "-o", str(out))
    assert code == 0 and info["j1_polylines"] == 0
    assert "#ff0000" not in out.read_text()


def test_plot_e2_default_offset(tmp_path, capsys):
    code, info = run_json(capsys, "plot", "--form", "E2", "-o", str(tmp_path / "e2.svg"))
    assert code == 0 and info["center"] == [0.5, 0.5]


def test_plot_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for path in (a, b):
        run(capsys, "--seed", "2", "plot", "--form", "H1", "-o", str(path))
    assert a.read_bytes() == b.read_bytes()


def test_plot_bad_radius(tmp_path, capsys):
    assert run(capsys, "plot", "--form", "E1", "-o", str(tmp_path / "x.svg"), "--radius", "0")[0] == 2


def test_plot_unwritable(tmp_path, capsys):
    assert run(capsys, "plot", "--form", "E1", "-o", str(tmp_path / "missing" / "x.svg"))[0] == 1


# -- scan ----------------------------------------------------------------------------

def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["s", "t", "label"]
    return [(float(s), float(t), lab) for s, t, lab in rows[1:]]


def test_scan_h3_matches_cellwise_classify(tmp_path, capsys):
    out, svg = tmp_path / "h3.csv", tmp_path / "h3.svg"
    code, info = run_json(capsys, "scan", "--form", "H3", "--dir1", "a10=1", "--dir2", "b10=1",
                          "--resolution", "5,5", "--csv", str(out), "--svg", str(svg))
    assert code == 0 and info["cells"] == 25
    cells = read_csv(out)
    base = L.H3.normal_form.to_float()
    for s, t, lab in cells:
        Q = QuadraticMap(*(c + (s if k == "a10" else t if k == "b10" else 0)
                           for k, c in zip(COEFF_NAMES, base.coefficients())))
        assert lab == classify(Q).label.value
    labels = {(s, t): lab for s, t, lab in cells}
    assert labels[(0.0, 0.0)] == "H3"
    assert {"H1", "H2"} <= set(labels.values())
    assert svg.read_text().startswith("<?xml")


def test_scan_single_cell(tmp_path, capsys):
    out = tmp_path / "e1.csv"
    code, _ = run_json(capsys, "scan", "--form", "E1", "--dir1", "a10=1", "--dir2", "b10=1",
                       "--resolution", "1,1", "--s-range", "0,0", "--t-range", "0,0", "--csv", str(out))
    assert code == 0
    assert read_csv(out) == [(0.0, 0.0, "E1")]


def test_scan_p3_branch_predicate(tmp_path, capsys):
    out = tmp_path / "p3.csv"
    code, _ = run_json(capsys, "scan", "--form", "P3", "--dir1", "a01=1", "--dir2", "b01=1",
                       "--resolution", "5,5", "--csv", str(out))
    assert code == 0
    for s, t, lab in read_csv(out):
        assert lab == ("P1" if s != 0 else "P2" if t != 0 else "P3")


def test_scan_dependent_directions(tmp_path, capsys):
    code, err = run_json(capsys, "scan", "--form", "E1", "--dir1", "a10=1", "--dir2", "a10=2",
                         "--csv", str(tmp_path / "x.csv"))
    assert code == 3 and "independent" in err["message"]


def test_scan_bad_direction(tmp_path, capsys):
    assert run(capsys, "scan", "--form", "E1", "--dir1", "q=1", "--dir2", "a10=1",
               "--csv", str(tmp_path / "x.csv"))[0] == 2


def test_scan_independent_of_workers(tmp_path, capsys):
    outs = []
    for w in ("1", "2"):
        path = tmp_path / f"w{w}.csv"
        args = ["scan", "--form", "H3", "--dir1", "a10=1,b01=0.5", "--dir2", "b10=1",
                "--resolution", "4,3", "--csv", str(path), "--workers", w]
        assert run(capsys, *args)[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_scan_marks_failures(monkeypatch):
    monkeypatch.setattr(normalize, "RESIDUAL_LIMIT", -1.0)
    grid = cli.scan_grid(np.array(L.E1.normal_form.to_float().coefficients()), np.eye(12)[3],
                         np.eye(12)[9], [0.0], [0.0, 1.0])
    assert grid == [["?"], ["?"]]


# -- selftest ------------------------------------------------------------------------

def fake_result(passed):
    return acceptance.CriterionResult(1, "stub", passed, 0.0, 1.0, "detail")


@pytest.mark.parametrize("passed, code", [(True, 0), (False, 1)])
def test_selftest_exit_code(passed, code, capsys, monkeypatch):
    monkeypatch.setattr(acceptance, "run_all", lambda seed=0: [fake_result(True), fake_result(passed)])
    got, out = run(capsys, "selftest")
    assert got == code
    assert out.count("stub") == 2


def test_selftest_negative_control(capsys, monkeypatch):
    # conjugation invariance relies on the tolerance; with tau = 0 it must fail loudly
    monkeypatch.setattr(acceptance, "run_all", lambda seed=0: [acceptance.run_criterion(2, seed)])
    code, out = run(capsys, "--tol", "0", "selftest")
    assert code == 1
    assert "[FAIL] 2." in out and "failures" in out and "Error" in out
