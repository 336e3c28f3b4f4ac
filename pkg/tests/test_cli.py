import io
import json
import sys

import pytest

from main import main

SHIFT_SPEC = {
    "kind": "shift",
    "template": {"kind": "triangular", "params": {"center": 0.0, "half_width": 0.6, "cells": 32}},
    "theta_box": [[-0.2, 0.2]],
}
LOCATION_SCALE_SPEC = {
    "kind": "location_scale",
    "template": {"kind": "uniform", "params": {"lo": -0.5, "hi": 0.5, "cells": 32}},
    "theta_box": [[1.0, 2.0], [-1.0, 1.0]],
}


@pytest.fixture
def shift_spec(tmp_path):
    path = tmp_path / "shift.json"
    path.write_text(json.dumps(SHIFT_SPEC))
    return path


@pytest.fixture
def location_scale_spec(tmp_path):
    path = tmp_path / "location_scale.json"
    path.write_text(json.dumps(LOCATION_SCALE_SPEC))
    return path


@pytest.fixture
def measure_dir(tmp_path):
    directory = tmp_path / "inputs"
    directory.mkdir()
    (directory / "a.csv").write_text("-0.5,0.5\n0.5,0.5\n")
    (directory / "b.csv").write_text("0.0,0.5\n1.0,0.5\n")
    return directory


# ==========================================
# Parser and exit codes
# ==========================================
def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "wbary" in capsys.readouterr().out


def test_no_command_is_usage_error():
    assert main([]) == 2


def test_unknown_flag_is_usage_error():
    assert main(["w2", "--bogus"]) == 2


def test_missing_required_flag(capsys):
    assert main(["w2", "--mu", "x.csv"]) == 2
    assert "--nu" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("oops,1\nx,y\n")
    assert main(["w2", "--mu", str(bad), "--nu", str(bad)]) == 2


def test_repeated_runs_after_stderr_is_closed(measure_dir, monkeypatch, capsys):
    path = str(measure_dir / "a.csv")
    first = io.StringIO()
    monkeypatch.setattr(sys, "stderr", first)
    assert main(["w2", "--mu", path, "--nu", path, "--log-level", "DEBUG"]) == 0
    first.close()
    second = io.StringIO()
    monkeypatch.setattr(sys, "stderr", second)
    assert main(["w2", "--mu", path, "--nu", path, "--log-level", "DEBUG"]) == 0
    assert "[CLI] w2" in second.getvalue()
    assert capsys.readouterr().out.splitlines() == ["0.0", "0.0"]


# ==========================================
# w2 and barycenter
# ==========================================
def test_w2_of_identical_measures(measure_dir, capsys):
    path = str(measure_dir / "a.csv")
    assert main(["w2", "--mu", path, "--nu", path]) == 0
    assert capsys.readouterr().out.strip() == "0.0"


def test_w2_lp_with_plan(measure_dir, tmp_path, capsys):
    plan = tmp_path / "plan.csv"
    args = ["w2", "--mu", str(measure_dir / "a.csv"), "--nu", str(measure_dir / "b.csv"), "--plan-out", str(plan)]
    assert main(args) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.25)
    assert plan.read_text().startswith("i,j,x0,y0,mass")


def test_barycenter_1d(measure_dir, tmp_path, capsys):
    out = tmp_path / "bary.json"
    assert main(["barycenter", "--inputs", str(measure_dir), "--out", str(out)]) == 0
    assert "method=1d inputs=2" in capsys.readouterr().out
    payload = json.loads(out.read_text())
    assert sorted(p[0] for p in payload["points"]) == pytest.approx([-0.25, 0.75])


def test_barycenter_affine(location_scale_spec, tmp_path, capsys):
    thetas = tmp_path / "thetas.csv"
    thetas.write_text("1.0,0.5\n2.0,-0.5\n")
    assert main(["barycenter", "--method", "affine", "--family", str(location_scale_spec),
                 "--thetas", str(thetas)]) == 0
    assert "A=[1.5] b=[0]" in capsys.readouterr().out


def test_barycenter_affine_needs_thetas(location_scale_spec):
    assert main(["barycenter", "--method", "affine", "--family", str(location_scale_spec)]) == 2


def test_fixed_support_writes_trace(measure_dir, tmp_path):
    trace = tmp_path / "trace.csv"
    assert main(["barycenter", "--method", "fixed-support", "--inputs", str(measure_dir),
                 "--trace", str(trace)]) == 0
    assert trace.read_text().splitlines()[0] == "iteration,objective"


# ==========================================
# Family commands
# ==========================================
def test_family_info(shift_spec, capsys):
    assert main(["family-info", "--family", str(shift_spec), "--nodes", "9"]) == 0
    out = capsys.readouterr().out
    assert "kind=shift dim=1 param_dim=1" in out
    assert "quadrature_nodes=9" in out


def test_duality_check_on_shift_family(shift_spec, tmp_path, capsys):
    out = tmp_path / "duality.csv"
    assert main(["duality-check", "--family", str(shift_spec), "--nodes", "9", "--grid", "128",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "J_P,J_P*,gap"
    assert lines[2] == "theta,w2_pushforward"
    assert float(lines[1].split(",")[0]) == pytest.approx(0.5 * 0.4 ** 2 / 12 * (1 - 1 / 81))


def test_compare_means(shift_spec, tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    assert main(["compare-means", "--family", str(shift_spec), "--n", "50", "--grid", "64",
                 "--out", str(out)]) == 0
    assert "w2_to_template=" in capsys.readouterr().out
    assert out.exists()


def test_compare_means_rejects_other_families(location_scale_spec):
    assert main(["compare-means", "--family", str(location_scale_spec), "--n", "5"]) == 2


# ==========================================
# simulate and runs
# ==========================================
def test_simulate_with_one_replicate_is_insufficient(shift_spec, tmp_path):
    out = tmp_path / "report"
    assert main(["simulate", "--family", str(shift_spec), "--n", "4,8,16,32", "--reps", "1",
                 "--out", str(out)]) == 2
    assert (out / "records.csv").exists()
    assert not (out / "slope.json").exists()


def test_simulate_and_list_runs(shift_spec, tmp_path, capsys):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    out = tmp_path / "report"
    code = main(["simulate", "--family", str(shift_spec), "--n", "8,16,32,64", "--reps", "60",
                 "--seed", "7", "--nodes", "9", "--out", str(out), "--db", url])
    assert code in (0, 1)
    printed = capsys.readouterr().out
    assert "checksum=" in printed
    assert json.loads((out / "slope.json").read_text())["checksum"] in printed

    assert main(["runs", "--db", url]) == 0
    assert "shift" in capsys.readouterr().out
    assert main(["runs", "--db", url, "--show", "1"]) == 0
    assert "n,replicate,seed,d2" in capsys.readouterr().out
    assert main(["runs", "--db", url, "--show", "42"]) == 2


def test_config_file_supplies_defaults(shift_spec, tmp_path):
    config = tmp_path / "config.json"
    out = tmp_path / "report"
    config.write_text(json.dumps({"family": str(shift_spec), "out": str(out), "n": "4,8,16,32", "reps": 1}))
    assert main(["simulate", "--config", str(config)]) == 2
    assert (out / "records.csv").exists()


def test_bad_config_file(tmp_path):
    config = tmp_path / "config.json"
    config.write_text("[1, 2]")
    assert main(["family-info", "--config", str(config)]) == 2
