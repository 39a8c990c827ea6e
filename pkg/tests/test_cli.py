import json

import numpy as np
import pytest

from specloc.cli import main
from specloc.config import parse_config
from specloc.errors import ConfigurationError, GeometryError

SMALL = """\
# coarse sweep used by the CLI tests
geometry.eps = 1, 1/2, 1/4
geometry.h = 1/8
geometry.n_seg = 16
study.j = 1, 2
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_defaults_parse():
    cfg = parse_config("")
    assert cfg.eps_list == pytest.approx([1 / 2, 1 / 3, 1 / 4, 1 / 6, 1 / 8])
    assert cfg.q.value_at_origin == 1.0
    np.testing.assert_array_equal(cfg.q.hessian, np.diag([2.0, 4.0]))


def test_fractions_and_comments():
    cfg = parse_config("geometry.h = 1/32  # fine\n\ngeometry.eps = 1/2,1/4\n")
    assert cfg["geometry.h"] == 1 / 32
    assert cfg.eps_list == [0.5, 0.25]


@pytest.mark.parametrize("text,match", [
    ("geometry.bogus = 1\n", r"<string>:1: unknown key"),
    ("\n\ngeometry.h 0.1\n", r"<string>:3: expected"),
    ("solver.k = two\n", r"<string>:1: bad value"),
    ("solver.k = 3\nsolver.k = 4\n", r"<string>:2: duplicate key"),
    ("geometry.eps = 0.3\n", r"not a positive integer"),
    ("geometry.eps = 1/4, 1/2\n", r"strictly decreasing"),
    ("coeff.a = marble\n", r"bad value"),
    ("effective.a11 = 1\n", r"effective block needs"),
])
def test_strict_rejections(text, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_config(text)


def test_geometry_revalidated():
    with pytest.raises(GeometryError):
        parse_config("geometry.hole_radius = 0.45\ngeometry.h = 0.1\n")


def test_coefficient_families():
    assert parse_config("coeff.a = laminate\n").a.harmonic_mean() == pytest.approx(1.6)
    A = parse_config("coeff.a = constant\ncoeff.a11 = 2\ncoeff.a12 = 0.5\n").a(np.zeros((1, 2)))[0]
    np.testing.assert_array_equal(A, [[2.0, 0.5], [0.5, 1.0]])


def test_cell_command_identity(tmp_path):
    cfg = write(tmp_path, "geometry.hole_radius = 0\ngeometry.h = 1/4\n")
    assert main(["cell", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "cell.csv").read_text().splitlines()[1] == "1.0,0.0,1.0,1.0,0.0"


def test_effective_command(tmp_path):
    cfg = write(tmp_path, "effective.a11 = 1\neffective.a22 = 1\neffective.q11 = 1\neffective.q22 = 1\neffective.h = 1/8\n")
    assert main(["effective", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "effective.csv").read_text().splitlines()
    assert lines[0] == "index,mu,n1,n2,multiplicity_cluster,mu_numeric"
    assert lines[1].startswith("1,2.0,0,0,1,")
    assert lines[2].startswith("2,4.0,")
    numeric = [float(ln.split(",")[-1]) for ln in lines[1:]]
    np.testing.assert_allclose(numeric, [2, 4, 4, 6, 6, 6], atol=2e-2)


def test_solve_command(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "eigenvalues.csv").read_text().splitlines()
    assert rows[0] == "j,lambda,mu_eps,residual" and len(rows) == 7
    cloud = np.loadtxt(tmp_path / "eigenfunction_1.csv", delimiter=",", skiprows=1)
    assert cloud.shape[1] == 3


def test_study_command_deterministic(tmp_path, monkeypatch):
    cfg = write(tmp_path, SMALL)
    assert main(["study", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "7"]) == 0
    monkeypatch.setenv("SPECLOC_JOBS", "2")
    assert main(["study", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "7"]) == 0
    a = (tmp_path / "a" / "study.csv").read_bytes()
    assert a == (tmp_path / "b" / "study.csv").read_bytes()
    assert len(a.decode().splitlines()) == 1 + 3 * 2
    fits = json.loads((tmp_path / "a" / "fits.json").read_text())
    assert all(np.isfinite(f["rate"]) for f in fits)


def test_check_trace_command(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["check-trace", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "eps,field,gap,bound,ratio"
    ones = [ln for ln in lines if ",one," in ln]
    assert all(float(ln.split(",")[2]) < 1e-10 for ln in ones)


def test_exit_codes(tmp_path, capsys, monkeypatch):
    bad = write(tmp_path, "geometry.nope = 1\n")
    assert main(["cell", "--config", bad]) == 1
    assert "unknown key" in capsys.readouterr().err
    assert main(["cell", "--config", str(tmp_path / "missing.cfg")]) == 1
    monkeypatch.setenv("SPECLOC_JOBS", "many")
    assert main(["cell", "--config", write(tmp_path, "")]) == 1


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    from specloc import cli
    from specloc.errors import EigensolverError

    def boom(*args, **kwargs):
        raise EigensolverError("forced")

    monkeypatch.setattr(cli, "solve_full", boom)
    assert main(["solve", "--config", write(tmp_path, SMALL), "--out", str(tmp_path)]) == 2
