import json
import os
from fractions import Fraction as F

import pytest

from p1normal import io
from p1normal.cli import main
from p1normal.normal_form import P1, Forcing, solve_normal_form


@pytest.fixture
def series_file(tmp_path):
    path = tmp_path / "s.json"
    io.save_series(solve_normal_form(P1, 12, 8), path)
    return path


def test_roundtrip_exact(tmp_path):
    nf = solve_normal_form(Forcing.parse("2*x+1"), 9, 3, gauge=F(1, 3), x0=F(1, 2))
    io.save_series(nf, tmp_path / "a.json")
    back = io.load_series(tmp_path / "a.json")
    assert back.gamma == nf.gamma and back.eta == nf.eta and back.theta == nf.theta
    assert back.Lgamma == nf.Lgamma
    assert (back.K, back.N, back.forcing, back.gauge_gamma7_0, back.x0) == (nf.K, nf.N, nf.forcing, nf.gauge_gamma7_0, nf.x0)


def test_schema_checked(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 99}))
    with pytest.raises(io.SchemaError):
        io.load_series(bad)
    bad.write_text(json.dumps({"schema_version": io.SCHEMA_VERSION, "header": {}}))
    with pytest.raises(io.SchemaError):
        io.load_series(bad)


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write(tmp_path / "x.txt", "hello\n")
    assert sorted(os.listdir(tmp_path)) == ["x.txt"]


def test_coeffs_gamma5_row(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert main(["coeffs", "--forcing", "x", "--K", "8", "--N", "4", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    row = d["gamma"]["5"]
    assert row[0][1] == "-1/640" and row[1][1] == "-7/352"
    assert "deg_bound=ok" in capsys.readouterr().out


def test_coeffs_obstruction(tmp_path, capsys):
    assert main(["coeffs", "--forcing", "x^2", "--K", "8", "--N", "4", "--out", str(tmp_path / "o.json")]) == 2
    assert "obstruction at k=6" in capsys.readouterr().err
    assert not (tmp_path / "o.json").exists()


def test_usage_errors(tmp_path):
    assert main(["coeffs", "--K", "3"]) == 3
    assert main(["nope"]) == 3
    assert main(["coeffs", "--forcing", "sin(x)"]) == 3


def test_verify_fresh_and_perturbed(series_file, tmp_path, capsys):
    assert main(["verify", "--series", str(series_file)]) == 0
    out = capsys.readouterr().out
    assert "pde_residual=0 exact" in out and "deg_bound=ok" in out
    d = json.loads(series_file.read_text())
    c = F(d["gamma"]["9"][0][0]) + F(1, 10**6)
    d["gamma"]["9"][0][0] = f"{c.numerator}/{c.denominator}"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    assert main(["verify", "--series", str(bad)]) == 1
    assert "pde_residual=nonzero" in capsys.readouterr().out


def test_map_identity_axis(series_file, capsys):
    assert main(["map", "--series", str(series_file), "--t", "0.5", "--v", "0"]) == 0
    out = capsys.readouterr().out
    assert "base=0.5+0j" in out and "v=0+0j" in out
    assert main(["map", "--series", str(series_file), "--t", "1", "--v", "0.1", "--inverse"]) == 0


def _integrate_args(tmp_path, tag):
    return ["integrate", "--y0", "0.1", "--yp0", "0.1", "--theta", "0.5", "--length", "0.5",
            "--trace-out", str(tmp_path / f"t{tag}.tsv"), "--catalog-out", str(tmp_path / f"c{tag}.json")]


def test_integrate_no_pole_and_determinism(tmp_path, capsys):
    assert main(_integrate_args(tmp_path, 1)) == 0
    assert main(_integrate_args(tmp_path, 2)) == 0
    assert "poles=0" in capsys.readouterr().out
    assert (tmp_path / "t1.tsv").read_bytes() == (tmp_path / "t2.tsv").read_bytes()
    assert (tmp_path / "c1.json").read_bytes() == (tmp_path / "c2.json").read_bytes()
    rows = io.read_trace(tmp_path / "t1.tsv")
    assert rows[-1][0] == pytest.approx(0.5)
    assert json.loads((tmp_path / "c1.json").read_text())["poles"] == []


def test_integrate_through_pole(tmp_path, capsys):
    from conftest import laurent_coeffs, laurent_eval

    p, z = 0.3 - 0.2j, 0.3 * complex(0.6216099682706644, 0.7833269096274834)
    y, yp = laurent_eval(laurent_coeffs(p, 0.4 + 0.1j), z)
    import cmath

    args = ["integrate", "--x0", str(p + z), "--y0", str(y), "--yp0", str(yp), "--theta", str(cmath.phase(-z)), "--length", "0.6",
            "--trace-out", str(tmp_path / "t.tsv"), "--catalog-out", str(tmp_path / "c.json")]
    assert main(args) == 0
    cat = json.loads((tmp_path / "c.json").read_text())
    assert len(cat["poles"]) == 1
    rec = cat["poles"][0]
    assert abs(complex(*rec["p"]) - p) < 1e-10 and rec["residual_check"] < 1e-6


def test_poles_parallel_matches_serial(tmp_path, capsys):
    base = ["poles", "--y0-re", "-1:1:3", "--length", "0.5"]
    assert main(base + ["--out", str(tmp_path / "a.json")]) == 0
    assert main(base + ["--out", str(tmp_path / "b.json"), "--workers", "2"]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert main(["poles", "--y0-re", "bad"]) == 3


@pytest.mark.parametrize("forcing,code", [("x", 0), ("1", 0), ("x^2", 2), ("x^3", 2)])
def test_obstruct(forcing, code, capsys):
    assert main(["obstruct", "--forcing", forcing]) == code
    assert "agree=True" in capsys.readouterr().out


def test_env_vars_and_flag_precedence(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("P1NF_COEFFS_FORCING", "x^2")
    assert main(["coeffs", "--out", str(tmp_path / "e.json")]) == 2
    assert main(["coeffs", "--forcing", "x", "--out", str(tmp_path / "e.json")]) == 0
    monkeypatch.setenv("P1NF_COEFFS_K", "3")
    assert main(["coeffs", "--forcing", "x", "--out", str(tmp_path / "e.json")]) == 3
    assert main(["coeffs", "--forcing", "x", "--K", "6", "--out", str(tmp_path / "e.json")]) == 0
