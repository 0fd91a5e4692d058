import csv
import json
import subprocess
import sys

import pytest

from catcurve.cli import build_parser, fmt, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def values(out):
    return dict(line.split("=", 1) for line in out.splitlines() if "=" in line and ":" not in line.split("=")[0])


def test_fmt():
    assert fmt(0.28240740740740744) == "2.82407407e-01"
    assert fmt(-0.0) == "0.00000000e+00"
    assert fmt(3) == "3"
    assert fmt(True) == "true"
    assert fmt(None) == "none"


def test_help_lists_subcommands():
    text = build_parser().format_help()
    for cmd in ("info", "dist", "geodesic", "angle", "cat-check", "verify"):
        assert cmd in text


def test_info(capsys):
    code, out, _ = run(capsys, "info", "cusp")
    assert code == 0
    assert "m=2" in out and "psi degrees=[0, 1]" in out
    assert "kappa_sup=-3.27719618e-02" in out
    assert "working_radius=5.00000000e-01" in out


def test_dist_closed_form(capsys):
    code, out, _ = run(capsys, "dist", "cusp", "0", "0.5", "--oracle")
    v = values(out)
    assert code == 0
    assert v["distance"] == "2.82407407e-01"
    assert v["through_origin"] == "true"
    assert v["oracle"] == "2.82407407e-01"


def test_dist_polar_through_origin(capsys):
    code, out, _ = run(capsys, "dist", "cusp", "0.3", "0:0.3@2.356194490192345")
    v = values(out)
    assert v["through_origin"] == "true"
    assert float(v["distance"]) == pytest.approx(2 * ((4 + 9 * 0.09) ** 1.5 - 8) / 27, abs=1e-8)


def test_dist_node_cross_branch(capsys):
    _, out, _ = run(capsys, "dist", "node", "0:0.3", "1:0.4")
    assert values(out)["distance"] == "7.00000000e-01"


def test_geodesic_csv_and_json(capsys, tmp_path):
    code, out, _ = run(capsys, "geodesic", "cusp", "0.3", "0.2,0.1")
    rows = list(csv.reader(out.splitlines()))
    assert code == 0
    assert rows[0] == ["t", "branch", "re_z", "im_z", "re_zdot", "im_zdot"]
    assert rows[1][2] == "3.00000000e-01"
    target = tmp_path / "g.json"
    run(capsys, "geodesic", "cusp", "0.3", "0.2,0.1", "--format", "json", "--out", str(target))
    data = json.loads(target.read_text())
    assert data[0]["re_z"] == "3.00000000e-01"
    _, out, _ = run(capsys, "geodesic", "cusp", "0.3", "0.2,0.1", "--ambient")
    assert out.splitlines()[0] == "t,re_phi1,im_phi1,re_phi2,im_phi2"


def test_angle(capsys):
    code, out, _ = run(capsys, "angle", "cusp", "0.3", "0.3@0.7853981633974483", "--estimate")
    v = values(out)
    assert code == 0
    assert v["angle_at_origin"] == "1.57079633e+00"
    assert abs(float(v["limit_estimate"]) - 1.5707963) < 1e-3


def test_cat_check_exit_codes(capsys):
    code, out, _ = run(capsys, "cat-check", "cusp", "0.3", "0.3@1.2", "0.05@0.6", "--samples", "6")
    assert code == 0 and "satisfied=true" in out
    code, out, _ = run(capsys, "cat-check", "cusp", "0.3", "0.3@1.2", "0.05@0.6", "--samples", "6",
                       "--kappa", "-50")
    assert code == 1 and "satisfied=false" in out


def test_verify_subset(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "cusp", "--experiments", "curvature,gradient",
                       "--set", "gradient_points=3", "--out", str(tmp_path))
    assert code == 0
    assert out.splitlines()[-1] == "2 passed, 0 failed"
    assert "time=" not in out
    assert (tmp_path / "summary.csv").exists()


def test_verify_failure_exit_code(capsys):
    code, out, _ = run(capsys, "verify", "cusp", "--experiments", "closed_form_distance",
                       "--set", "distance_tol=1e-30")
    assert code == 1 and "FAIL" in out


@pytest.mark.parametrize("argv, fragment", [
    (["info", "no_such_curve.json"], "error"),
    (["dist", "cusp", "0.3", "0.9"], "working radius"),
    (["dist", "cusp", "0.3", "2:0.1"], "branch"),
    (["angle", "cusp", "0", "0.1"], "origin"),
    (["verify", "cusp", "--experiments", "bogus"], "unknown"),
])
def test_errors_exit_2(capsys, argv, fragment):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert fragment in err


def test_bad_point_syntax(capsys):
    with pytest.raises(SystemExit) as info:
        main(["dist", "cusp", "0.3", "1,2,3"])
    assert info.value.code == 2


def test_output_is_byte_identical_across_processes():
    cmd = [sys.executable, "-m", "catcurve", "dist", "perturbed_cusp", "0.3,0.1", "0.1@2.0"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and b"distance=" in a
