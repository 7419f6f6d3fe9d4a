import json

import pytest

from chiralkit import cli
from chiralkit.polyform import DifferentialForm, parse_polynomial as P


def run(tmp_path, *argv):
    return cli.main(["--out", str(tmp_path), "--quiet", *argv])


def load(tmp_path, name):
    return json.loads((tmp_path / name).read_text())


def test_analyze_catalog(tmp_path):
    assert run(tmp_path, "analyze", "D4minus") == 0
    rep = load(tmp_path, "report.json")
    assert rep["numeric_index"] == -2 and rep["corank"] == 2 and rep["hessian_trace"] == "1/1"


def test_analyze_inline_and_json(tmp_path):
    assert run(tmp_path, "analyze", "x^2/2 + y^2/2 - z^2") == 0
    assert load(tmp_path, "report.json")["morse_index"] == 1
    path = tmp_path / "phi.json"
    path.write_text(json.dumps(DifferentialForm.function(P("x^2 - y^2 + z^2")).to_json()))
    assert run(tmp_path, "analyze", str(path)) == 0
    assert load(tmp_path, "report.json")["numeric_index"] == -1


def test_analyze_level_sets(tmp_path):
    assert run(tmp_path, "analyze", "Morse1", "--levelsets", "--resolution", "48") == 0
    sets = load(tmp_path, "report.json")["level_sets"]
    assert sets["plus"]["euler_characteristic"] == 0 and sets["minus"]["euler_characteristic"] == 2
    assert (tmp_path / "levelset_plus.obj").read_text().startswith("v ")


def test_parse_error_exit_code(tmp_path, capsys):
    assert run(tmp_path, "analyze", "x^2 + (y") == 1
    assert "column" in capsys.readouterr().err


def test_check_exit_codes(tmp_path):
    assert run(tmp_path, "check", "--eta", "x + y z, y - x z, -2 z") == 0
    assert load(tmp_path, "defect.json")["sign_verdict"] == "positive-semidefinite"
    assert run(tmp_path, "check", "--eta", "z, x, 0") == 2


def test_perturb_and_series(tmp_path):
    assert run(tmp_path, "perturb", "x^2/2 + y^2/2 - z^2") == 0
    nu = DifferentialForm.from_json(load(tmp_path, "perturbation.json")["nu"])
    assert nu == DifferentialForm.one_form(P("y z"), P("-x z"), 0)
    assert run(tmp_path, "series", "Morse1", "--K", "3") == 0
    data = load(tmp_path, "series.json")
    assert data["recursion_exact"] and all(r >= 5 for r in data["ratios"])
    assert run(tmp_path, "perturb", "D4minus") == 1  # not harmonic


def test_metric(tmp_path):
    assert run(tmp_path, "metric", "--t", "1/2", "--points", "20") == 0
    assert run(tmp_path, "metric", "--t", "1/2", "--points", "20", "--scale", "uncorrected") == 2


def test_abc_and_lutz(tmp_path):
    assert run(tmp_path, "abc", "--B", "0.8", "--C", "0.8") == 0
    assert load(tmp_path, "abc.json")["tightness"] == "overtwisted"
    assert run(tmp_path, "lutz", "--s", "0", "--t", "1", "--points", "500", "--export-grid", "6") == 0
    header = (tmp_path / "lutz_grid.csv").read_text().splitlines()[0]
    assert header == "x,y,z,ex,ey,ez,wx,wy,wz,defect"


def test_divide_and_surface(tmp_path):
    assert run(tmp_path, "divide", "--phi", "D4minus", "--expect", "3") == 0
    assert load(tmp_path, "dividing_set.json")["giroux_verdict"] == "overtwisted"
    assert run(tmp_path, "divide", "--eta", "0, x, 1", "--expect", "2") == 2
    assert run(tmp_path, "surface", "--X", "y, -x, 0", "--Y", "x, y, 0", "--require-tangent") == 0
    assert run(tmp_path, "surface", "--X", "x, y, 0", "--Y", "0, 0, 0", "--require-tangent") == 2


def test_trace(tmp_path):
    argv = ["trace", "--field", "lutz", "--s", "-1", "--point", "0,0,1", "--t-max", "20", "--periodic"]
    assert run(tmp_path, *argv) == 0
    data = load(tmp_path, "orbits.json")
    assert [o["verdict"] for o in data["periodic"]] == ["periodic"]
    assert (tmp_path / "trajectory.csv").read_text().startswith("t,x,y,z\n")


def test_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["--out", str(d), "--seed", "3", "--quiet", "metric", "--points", "30"]) == 0
    assert (a / "metric.json").read_bytes() == (b / "metric.json").read_bytes()


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
