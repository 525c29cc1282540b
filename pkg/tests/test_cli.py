import json
import math
import subprocess
import sys

import pytest

from killingforms import cli, ypq


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def ypq_file(tmp_path, a=0.5, einstein=True):
    params = ypq.YpqParams(a)
    data = {
        "name": "ypq-file",
        "coords": list(ypq.COORDS),
        "params": params.binding,
        "metric": {f"{i},{j}": s for (i, j), s in ypq.METRIC_ENTRIES.items()},
        "domain": {k: list(v) for k, v in params.domain.items()},
        "foliation": {
            "n": 3,
            "x": list(ypq.FOLIATION_X),
            "f_names": ["theta", "y"],
            "angle_names": ["psi_p", "phi_p", "beta_p"],
            "coords": ypq.ANGLE_LINK,
        },
    }
    if einstein:
        data["einstein"] = 4.0
    path = tmp_path / "ypq.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_verify_flat3(capsys):
    code, out, _ = run(capsys, "verify", "flat3", "--samples", "20")
    report = json.loads(out)
    assert code == 0 and report["pass"]
    names = [c["name"] for c in report["checks"]]
    assert "killing(Psi_flat)" in names and "einstein(lambda=0)" in names


def test_verify_ypq_small(capsys, tmp_path):
    out_path = tmp_path / "report.json"
    code, out, _ = run(capsys, "verify", "ypq", "--a", "0.3", "--samples", "3", "--seed", "7", "--out", str(out_path))
    assert code == 0 and out == ""
    report = json.loads(out_path.read_text(encoding="utf-8"))
    assert report["pass"] and report["chart"] == "ypq" and report["seed"] == 7
    by_name = {c["name"]: c for c in report["checks"]}
    assert by_name["special(Psi_1=eta^d_eta)"]["c"] == pytest.approx(-4.0, abs=1e-6)
    assert by_name["special(Xi)"]["expected_c"] == -3.0
    assert all(c["pass"] for c in report["checks"])


def test_verify_is_deterministic(tmp_path):
    reports = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        assert cli.main(["verify", "flat3", "--samples", "5", "--seed", "3", "--out", str(path)]) == 0
        rep = json.loads(path.read_text(encoding="utf-8"))
        rep.pop("duration_ms")
        reports.append(rep)
    assert reports[0] == reports[1]


def test_verify_fails_on_tight_tolerance(capsys):
    code, out, _ = run(capsys, "verify", "ypq", "--samples", "2", "--tol", "1e-30")
    assert code == 1 and not json.loads(out)["pass"]


@pytest.mark.parametrize("argv", [["verify", "ypq", "--a", "1.5"], ["verify", "ypq", "--samples", "0"], ["verify"]])
def test_verify_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error:")


def test_verify_file(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--file", str(ypq_file(tmp_path)), "--samples", "3")
    report = json.loads(out)
    assert code == 0 and report["pass"] and report["chart"] == "ypq-file"
    names = {c["name"] for c in report["checks"]}
    assert {"extractor_vs_oracle", "omega_identity", "r_independence", "killing(Xi)", "special(Upsilon)"} <= names


def test_verify_bad_files(capsys, tmp_path):
    missing = tmp_path / "nope.json"
    assert run(capsys, "verify", "--file", str(missing))[0] == 2
    path = ypq_file(tmp_path)
    data = json.loads(path.read_text(encoding="utf-8"))
    data["foliation"]["x"] = data["foliation"]["x"][:2]
    data["foliation"]["n"] = 2
    path.write_text(json.dumps(data), encoding="utf-8")
    assert run(capsys, "verify", "--file", str(path))[0] == 2


POINT = "theta=1.0,y=0.05,psi=0.3,phi=0.7,alpha=0.2,r=1.0"


def test_extract_table(capsys):
    code, out, _ = run(capsys, "extract", "ypq", "--point", POINT)
    assert code == 0
    assert "dtheta^dy" in out and "closed-form" in out


def test_extract_json_matches_closed_form(capsys):
    code, out, _ = run(capsys, "extract", "ypq", "--point", POINT, "--json")
    data = json.loads(out)
    assert code == 0 and data["closed_form_diff"] < 1e-10
    rows = {row["component"]: row for row in data["omega"]}
    _, _, p = ypq.aux_functions(0.5, 0.05)
    s = math.sqrt((1 - 0.05) / (6 * p))
    re, im = rows["dtheta^dy"]["extractor"]
    assert complex(re, im) == pytest.approx(s * complex(math.cos(0.3), math.sin(0.3)), abs=1e-12)
    assert max(row["diff"] for row in data["omega"]) < 1e-11


def test_extract_from_file(capsys, tmp_path):
    path = ypq_file(tmp_path, einstein=False)
    code, out, _ = run(capsys, "extract", "--file", str(path), "--point", POINT, "--json")
    assert code == 0 and "closed_form_diff" not in json.loads(out)


@pytest.mark.parametrize(
    "point",
    [
        "theta=0,y=0.05,psi=0.3,phi=0.7,alpha=0.2",
        "theta=1.0,y=0.05,psi=0.3,phi=0.7",
        "theta=1.0,y=0.05,psi=0.3,phi=0.7,alpha=0.2,gamma=1",
        "theta=1.0,y,psi=0.3",
        "theta=abc,y=0.05,psi=0.3,phi=0.7,alpha=0.2",
        "theta=1.0,y=0.05,psi=0.3,phi=0.7,alpha=0.2,r=-1",
        "",
    ],
)
def test_extract_bad_points(capsys, point):
    assert run(capsys, "extract", "ypq", "--point", point)[0] == 2


def test_roots(capsys):
    code, out, _ = run(capsys, "roots", "--a", "0.5", "--json")
    data = json.loads(out)
    assert code == 0
    y1, y2, y3 = data["roots"]
    assert y1 < 0 < y2 < y3 and max(data["back_substitution"]) < 1e-12
    code, out, _ = run(capsys, "roots", "--a", "0.999")
    assert code == 0 and out.count("y") >= 3
    assert run(capsys, "roots", "--a", "0")[0] == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "killingforms", "roots", "--a", "0.5"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and proc.stdout.startswith("a = 0.5")
