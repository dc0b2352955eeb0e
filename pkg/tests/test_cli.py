import json

import pytest

from boltzlab.cli import main


@pytest.fixture()
def diagnose_config(tmp_path):
    path = tmp_path / "diagnose.json"
    path.write_text(json.dumps({
        "profile": {"kind": "counterexample", "a": 100.0, "rho": 0.1,
                    "c": 1.0, "floor_delta": 1e-6},
        "quadrature": {"n_sigma": 2048},
    }))
    return path


def test_diagnose_command(tmp_path, diagnose_config, capsys):
    rc = main(["diagnose", "--config", str(diagnose_config),
               "--out", str(tmp_path / "out")])
    assert rc == 0
    assert (tmp_path / "out" / "report.json").exists()
    assert (tmp_path / "out" / "regions.csv").exists()
    assert "dtd_total" in capsys.readouterr().out


def test_quad_scale_flag(tmp_path, diagnose_config):
    rc = main(["diagnose", "--config", str(diagnose_config),
               "--out", str(tmp_path / "out"), "--quad-scale", "2"])
    assert rc == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["quadrature"]["n_sigma"] == 4096


def test_malformed_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"profile": {"kind": "counterexample",\n  "a": }')
    rc = main(["diagnose", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "config error" in err
    assert ":2:" in err            # line-anchored message


def test_invalid_params_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(
        {"profile": {"kind": "counterexample", "a": 10.0, "rho": 0.5,
                     "c": 1.0}}))
    rc = main(["diagnose", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "rho" in capsys.readouterr().err


def test_choose_c_command(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"profile": {"a": 100.0}}))
    rc = main(["choose-c", "--config", str(cfg)])
    assert rc == 0
    assert float(capsys.readouterr().out.strip()) == 1.0


def test_fit_command(tmp_path, capsys):
    cfg = tmp_path / "fit.json"
    cfg.write_text(json.dumps(
        {"samples": [[10.0, 1e4], [100.0, 1e8], [1000.0, 1e12]]}))
    rc = main(["fit", "--config", str(cfg)])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["pure_power"]["exponent_p"] == pytest.approx(4.0, abs=1e-9)


def test_sweep_command(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({
        "a_values": [30.0, 100.0, 300.0],
        "delta_values": [1e-6],
        "c": 1.0,
        "quadrature": {"n_sigma": 2048},
    }))
    rc = main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "out"),
               "--threads", "2"])
    assert rc == 0
    assert (tmp_path / "out" / "sweep.csv").exists()
    assert "0 failed" in capsys.readouterr().out


def test_evolve_command(tmp_path):
    cfg = tmp_path / "evolve.json"
    cfg.write_text(json.dumps({
        "profile": {"kind": "counterexample", "a": 30.0, "rho": 0.15,
                    "c": 1.0, "floor_delta": 1e-6, "r_domain": 7.0,
                    "smoothing_width": 0.04},
        "quadrature": {"n_sigma": 256, "n_angular_outer": 4},
        "grid": {"half_extent": 7.0, "n_per_axis": 351},
        "evolution": {"n_steps": 2, "sample_every": 1, "scheme": "euler"},
    }))
    rc = main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 0
    assert (tmp_path / "out" / "timeseries.csv").exists()
