import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from diracweyl import cli
from diracweyl import radial as R

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def rows(path):
    return list(csv.reader(io.StringIO(path.read_text())))


def write_spec(tmp_path, doc, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def last_error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_radial_density_constant(tmp_path):
    assert cli.main(["radial", "--kappa", "0", "--m", "0", "--lambda", "1:5:0.5",
                     "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "radial.csv")
    assert table[0] == ["lambda", "density"]
    lam = [float(r[0]) for r in table[1:]]
    assert lam == pytest.approx(np.arange(1, 5.25, 0.5))
    assert all(float(r[1]) == pytest.approx(1 / math.pi, rel=1e-15) for r in table[1:])


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out, threads in ((a, "1"), (b, "3")):
        assert cli.main(["mfunc", "--spec", str(PROBLEMS / "radial_kappa1.json"),
                         "--z-grid=-2:2:0.5,0.7", "--threads", threads,
                         "--out", str(out)]) == 0
    data = (a / "mfunc.csv").read_bytes()
    assert data == (b / "mfunc.csv").read_bytes()
    assert b"\r" not in data
    _, *body = rows(a / "mfunc.csv")
    for re_z, im_z, re_m, im_m in body:
        z = complex(float(re_z), float(im_z))
        M = R.M_kappa(R.RadialParams(1.0), z)
        assert abs(complex(float(re_m), float(im_m)) - M) < 1e-8 * max(1, abs(M))
    # 17 significant digits round-trip exactly
    assert float(body[0][0]) == -2.0 and len(body[1][3].lstrip("-").replace(".", "")) >= 15


def test_eig_free_dirichlet(tmp_path):
    assert cli.main(["eig", "--spec", str(PROBLEMS / "free_dirichlet_pi.json"),
                     "--out", str(tmp_path)]) == 0
    header, *body = rows(tmp_path / "eig.csv")
    assert header == ["n", "lambda", "gamma_sq"]
    n = np.array([int(r[0]) for r in body])
    lam = np.array([float(r[1]) for r in body])
    assert np.array_equal(n, np.arange(-5, 6))
    assert np.abs(lam - n).max() < 1e-8
    assert np.abs(np.array([float(r[2]) for r in body]) - math.pi).max() < 1e-6
    report = json.loads((tmp_path / "eig.json").read_text())
    assert report["schema_version"] == 1


def test_eig_gap_warning_exit_3(tmp_path, capsys):
    spec = write_spec(tmp_path, {"schema_version": 1,
                                 "potential": {"interval": [0, math.pi], "m": 2.0},
                                 "frame": {"kind": "custom"},
                                 "eig": {"window": [-3.5, 3.5]}})
    assert cli.main(["eig", "--spec", str(spec), "--out", str(tmp_path / "o")]) == 3
    assert last_error(capsys)["code"] == 3
    assert (tmp_path / "o" / "eig.csv").is_file()


@pytest.mark.parametrize("doc", [
    "{not json",
    {"schema_version": 2, "frame": {"kind": "radial", "kappa": 0}},
    {"schema_version": 1, "frame": {"kind": "radial", "kappa": 0}, "surprise": 1},
    {"schema_version": 1, "frame": {"kind": "nowhere"}},
    {"schema_version": 1, "frame": {"kind": "radial", "kappa": -1}},
    {"schema_version": 1, "potential": {"interval": [0, 1]}, "frame": {"kind": "custom"},
     "transform": {"samples": "missing.csv"}},
])
def test_malformed_spec_exit_2_no_files(tmp_path, capsys, doc):
    p = tmp_path / "bad.json"
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    out = tmp_path / "out"
    assert cli.main(["mfunc", "--spec", str(p), "--z-grid", "0:1:0.5", "--out", str(out)]) == 2
    err = last_error(capsys)
    assert err["code"] == 2 and err["message"]
    assert not out.exists() or not any(out.iterdir())


@pytest.mark.parametrize("argv", [
    ["eig"],
    ["radial", "--lambda", "1:2:0.5"],
    ["radial", "--kappa", "0", "--lambda", "2:1:0.5"],
    ["mfunc", "--spec", str(PROBLEMS / "radial_kappa1.json"), "--z-grid", "bad"],
    ["radial", "--kappa", "0", "--lambda", "1:2:0.5", "--threads", "0"],
])
def test_bad_flags_exit_2(tmp_path, argv, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2
    assert last_error(capsys)["code"] == 2
    assert not any(tmp_path.iterdir())


def test_real_z_rejected(tmp_path, capsys):
    assert cli.main(["mfunc", "--spec", str(PROBLEMS / "radial_kappa1.json"),
                     "--z-grid", "1:2:0.5,0", "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_4(tmp_path, capsys):
    # |P| ~ x^-1.5 is not integrable at 0, which only the solver discovers
    spec = write_spec(tmp_path, {"schema_version": 1, "frame": {
        "kind": "perturbed", "kappa": 0.0, "x_max": 2.0, "perturbation": {
            "support": [0, 1], "q_am": {"kind": "expr", "expr": "x^(-1.5)"}}},
        "perturbed": {"z": [1.0, 1.0]}})
    out = tmp_path / "out"
    assert cli.main(["perturbed", "--spec", str(spec), "--out", str(out)]) == 4
    assert last_error(capsys)["code"] == 4
    assert not out.exists()


def test_density(tmp_path):
    spec = write_spec(tmp_path, {"schema_version": 1, "frame": {"kind": "radial", "kappa": 0.0}})
    assert cli.main(["density", "--spec", str(spec), "--lambda", "1:2:0.25",
                     "--eps-ladder", "0.1,0.03,0.01,0.003", "--out", str(tmp_path)]) == 0
    _, *body = rows(tmp_path / "density.csv")
    assert all(abs(float(r[1]) * math.pi - 1) < 0.02 for r in body)
    rep = json.loads((tmp_path / "density.json").read_text())
    assert abs(rep["mass"] * math.pi - 1) < 0.02


def test_transform_roundtrip(tmp_path):
    x = np.linspace(0, math.pi, 801)
    with open(tmp_path / "f.csv", "w") as fh:
        fh.write("x,f1,f2\n")
        for v in x:
            fh.write(f"{float(v)!r},{math.sin(v) ** 3!r},0\n")
    base = {"schema_version": 1, "potential": {"interval": [0, math.pi]},
            "frame": {"kind": "custom"}, "eig": {"window": [-20.5, 20.5]}}
    fwd = write_spec(tmp_path, {**base, "transform": {"samples": "f.csv"}}, "fwd.json")
    assert cli.main(["transform", "--spec", str(fwd), "--out", str(tmp_path / "f")]) == 0
    header, *body = rows(tmp_path / "f" / "transform.csv")
    assert header == ["lambda_n", "fhat"]
    lam = [float(r[0]) for r in body]
    fhat = [float(r[1]) for r in body]
    inv = write_spec(tmp_path, {**base, "transform": {
        "direction": "inverse", "samples": {"lambda_n": lam, "fhat": fhat},
        "x": [0.5, 1.0, 2.0]}}, "inv.json")
    assert cli.main(["transform", "--spec", str(inv), "--out", str(tmp_path / "i")]) == 0
    _, *back = rows(tmp_path / "i" / "transform.csv")
    for xv, f1, f2 in back:
        assert abs(float(f1) - math.sin(float(xv)) ** 3) < 1e-3
        assert abs(float(f2)) < 1e-3


def test_perturbed_report(tmp_path):
    assert cli.main(["perturbed", "--spec", str(PROBLEMS / "perturbed_bump.json"),
                     "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "perturbed.json").read_text())
    assert rep["factorial_decay"] is True
    assert rep["ode_residual"] < 1e-6
    header, *body = rows(tmp_path / "perturbed.csv")
    assert header == list(cli.HEADERS["perturbed"]) and len(body) > 10


def test_bm_and_susy_reports(tmp_path):
    assert cli.main(["bm-check", "--spec", str(PROBLEMS / "bm_bump.json"),
                     "--out", str(tmp_path)]) == 0
    bm = json.loads((tmp_path / "bm.json").read_text())
    assert abs(bm["rate"] / 1.0 - 1) < 0.1 and len(bm["radii"]) == len(bm["diffs"])
    assert cli.main(["susy-check", "--kappa", "1", "--m", "0.5", "--seed", "3",
                     "--out", str(tmp_path)]) == 0
    first = (tmp_path / "susy.json").read_bytes()
    rep = json.loads(first)
    assert rep["residual"] < 1e-6 and rep["weyl_relation_defect"] < 1e-10
    cli.main(["susy-check", "--kappa", "1", "--m", "0.5", "--seed", "3", "--out", str(tmp_path)])
    assert (tmp_path / "susy.json").read_bytes() == first


def test_no_temporary_files_left(tmp_path):
    cli.main(["radial", "--kappa", "1", "--lambda", "0:3:1", "--z-grid", "0:1:1",
              "--out", str(tmp_path)])
    assert sorted(p.name for p in tmp_path.iterdir()) == ["radial.csv", "radial_M.csv"]


def test_grid_parsers():
    zs = cli.parse_z_grid("0:1:0.5")
    assert np.array_equal(zs, [0 + 1j, 0.5 + 1j, 1 + 1j])
    assert cli.parse_z_grid("1:2:1,0.25")[-1] == 2 + 0.25j
    assert np.array_equal(cli.parse_eps_ladder("0.1, 0.01,0.001"), [0.1, 0.01, 0.001])
    for bad in ("1:2", "1:2:0", "a:b:c"):
        with pytest.raises(cli.SpecError):
            cli.parse_lambda(bad)
    with pytest.raises(cli.SpecError):
        cli.parse_eps_ladder("0.1,0.2,0.05")


def test_console_entry_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "diracweyl.cli", "eig", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["code"] == 2
