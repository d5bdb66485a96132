import math

import numpy as np
import pytest

from eqstab.cli import main


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return header, data


def check_schema(header, data):
    assert data.shape[1] == len(header)
    axis = data[:, 0]
    assert np.all(np.diff(axis) > 0)
    k = data[:, 1:]
    finite = np.isfinite(k)
    assert np.all(k[finite] >= 1 - 1e-12)


def test_circuit_sweep_schema_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["circuit-sweep", "--fmin", "1e-20", "--fmax", "1e40", "--points", "13",
            "--include-static"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    header, data = read_csv(a)
    assert header == ["f_Hz", "kappa_orig", "kappa_i", "kappa_iii"]
    check_schema(header, data)
    assert data[0, 0] == 0 and math.isinf(data[0, 1])
    # original breaks down towards low frequencies, stabilized curves stay flat
    low = data[1]
    assert low[1] > 1e20 and low[2] == pytest.approx(5e11) and low[3] == pytest.approx(1.0)
    assert "e+" in a.read_text().splitlines()[2]


def test_circuit_sweep_ratio_of_asymptotes(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["circuit-sweep", "--C", "1e12", "--fmin", "1e-20", "--fmax", "1e-20",
                 "--points", "1", "--out", str(out)]) == 0
    _, data = read_csv(out)
    assert data.shape[0] == 1
    assert data[0, 2] / data[0, 3] == pytest.approx(2e12, rel=1e-2)


def test_circuit_sweep_rejects_unknown_variant(capsys):
    assert main(["circuit-sweep", "--variant", "iv", "--points", "1"]) == 2
    assert "supports" in capsys.readouterr().err


def test_field_sweep_dt(tmp_path):
    out = tmp_path / "f.csv"
    assert main(["field-sweep", "--min", "1e-6", "--max", "1e6", "--points", "3",
                 "--variant", "orig,ii,iv", "--include-static", "--out", str(out)]) == 0
    header, data = read_csv(out)
    assert header == ["dt_s", "kappa_orig", "kappa_ii", "kappa_iv"]
    check_schema(header, data)
    assert math.isinf(data[-1, 0]) and math.isinf(data[-1, 1])
    assert np.all(np.isfinite(data[-1, 2:]))


def test_field_sweep_single_variant_frequency(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["field-sweep", "--axis", "frequency", "--min", "1", "--max", "100",
                 "--points", "2", "--variant", "orig", "--include-static",
                 "--out", str(out)]) == 0
    header, data = read_csv(out)
    assert header == ["f_Hz", "kappa_orig"]
    assert data[0, 0] == 0 and math.isinf(data[0, 1])


def test_point_failure_becomes_nan(capsys):
    from eqstab.cli import _fmt, _safe_kappa
    from eqstab.stabilize import SingularBlock

    def fail():
        raise SingularBlock("conductor floats")

    assert math.isnan(_safe_kappa(fail, "dt=1"))
    assert "conductor floats" in capsys.readouterr().err
    assert _fmt(float("nan")) == "nan" and _fmt(float("inf")) == "inf"


def test_solve_frequency_and_vtk(tmp_path, capsys):
    vtk = tmp_path / "phi.vtk"
    assert main(["solve", "--variant", "iv", "--vtk", str(vtk)]) == 0
    line = capsys.readouterr().out
    assert "min|D|=7.37849" in line and "max|D|=7.37849" in line
    assert vtk.read_text().startswith("# vtk DataFile Version 3.0")


def test_solve_original_static_fails(capsys):
    assert main(["solve", "--variant", "orig", "--f", "0"]) == 2
    assert "singular" in capsys.readouterr().err


def test_solve_iii_at_static_is_undefined(capsys):
    assert main(["solve", "--variant", "iii", "--f", "0"]) == 2
    assert "cannot recover" in capsys.readouterr().err


def test_solve_iii_matches_iv(tmp_path, capsys):
    a, b = tmp_path / "a.vtk", tmp_path / "b.vtk"
    assert main(["solve", "--variant", "iii", "--vtk", str(a)]) == 0
    assert main(["solve", "--variant", "iv", "--vtk", str(b)]) == 0

    def field(p):
        lines = p.read_text().splitlines()
        i = lines.index("SCALARS phi_re double 1") + 2
        return np.array([float(v) for v in lines[i:i + 1728]])

    np.testing.assert_allclose(field(a), field(b), rtol=0, atol=1e-10)


def test_solve_transient_csv(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["solve", "--mode", "transient", "--dt", "1e-3", "--t-end", "5e-3",
                 "--probe", "0.11,0.11,0.11", "--out", str(out)]) == 0
    header, data = read_csv(out)
    assert header == ["t", "probe_phi0", "max_D", "min_D"]
    assert data.shape[0] == 6
    assert data[-1, 2] == pytest.approx(7.378e-11, rel=1e-3)


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "toy.cfg"
    cfg.write_text("preset = toy-capacitor\nV = 2\n")
    assert main(["solve", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    dmax = float(out.split("max|D|=")[1].split()[0])
    assert dmax == pytest.approx(2 * 7.378490e-11, rel=1e-6)


def test_bad_mesh_reports_error(capsys):
    assert main(["solve", "--mesh", "10x10x10"]) == 2
    assert "interface" in capsys.readouterr().err
