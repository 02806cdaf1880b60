import json
import subprocess
import sys

import pytest

from nambu import cli
from nambu.errors import ConfigError

FAST = {
    "euler-top": ["--steps", "200"],
    "bracket-check": [],
    "reduce-check": ["--steps", "100"],
    "vortex": ["--steps", "5", "--grid-n", "8"],
    "fluid": ["--steps", "5", "--grid-n", "8"],
    "clebsch-fluid": ["--steps", "5", "--grid-n", "8"],
    "nls": ["--steps", "5", "--grid-n", "8"],
    "correspondence": ["--steps", "5"],
}


def parse_summary(line: str) -> dict:
    return dict(item.split("=", 1) for item in line.split())


def test_parse_config_defaults():
    cfg = cli.parse_config("euler-top")
    assert cfg.dt == 1e-2 and cfg.steps == 10_000 and cfg.moments == (1.0, 2.0, 3.0)
    assert cfg.out == "euler-top"


def test_parse_config_rejects_negative_dt():
    with pytest.raises(ConfigError, match="dt"):
        cli.parse_config("euler-top", {"dt": "-1"})


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ConfigError, match="'foo'"):
        cli.parse_config("euler-top", {"foo": "1"})


@pytest.mark.parametrize(
    "values",
    [{"steps": "0"}, {"grid_n": "7"}, {"hbar": "0"}, {"moments": "1, 2"}, {"method": "euler"}, {"steps": "1.5"}],
)
def test_parse_config_range_errors(values):
    with pytest.raises(ConfigError):
        cli.parse_config("nls", values)


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nsteps = 40\nmoments = 1, 3, 5\nhbar=0.5\n")
    cfg = cli.parse_config("euler-top", cli.read_config_file(path), {"steps": 7, "hbar": None})
    assert cfg.steps == 7 and cfg.hbar == 0.5 and cfg.moments == (1.0, 3.0, 5.0)


def test_json_config_equivalent(tmp_path):
    a, b = tmp_path / "a.cfg", tmp_path / "b.json"
    a.write_text("steps = 40\nxi0 = 1 0 0.5\n")
    b.write_text(json.dumps({"steps": 40, "xi0": [1, 0, 0.5], "experiment": "euler-top"}))
    assert cli.parse_config("euler-top", cli.read_config_file(a)) == cli.parse_config("euler-top", cli.read_config_file(b))


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        cli.read_config_file(tmp_path / "missing.cfg")
    bad = tmp_path / "bad.cfg"
    bad.write_text("just words\n")
    with pytest.raises(ConfigError):
        cli.read_config_file(bad)
    with pytest.raises(ConfigError):
        cli.parse_config("nls", {"experiment": "vortex"})


@pytest.mark.parametrize("experiment", cli.EXPERIMENTS)
def test_every_experiment_runs(experiment, tmp_path, capsys):
    out = tmp_path / experiment
    code = cli.main([experiment, "--out", str(out), *FAST[experiment]])
    assert code == 0
    line = capsys.readouterr().out.strip()
    assert "\n" not in line
    summary = parse_summary(line)
    assert summary["experiment"] == experiment
    assert (tmp_path / f"{experiment}.csv").exists()
    report = json.loads((tmp_path / f"{experiment}.json").read_text())
    assert set(report["summary"]) == set(summary) - {"experiment"}


def test_euler_top_output_contract(tmp_path, capsys):
    assert cli.main(["euler-top", "--out", str(tmp_path / "e"), "--steps", "50"]) == 0
    summary = parse_summary(capsys.readouterr().out)
    assert float(summary["max_drift_H2"]) <= 1e-10
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "time,xi1,xi2,xi3,H1,H2" and len(lines) == 52


def test_bracket_check_reports_zero_jacobi(tmp_path, capsys):
    assert cli.main(["bracket-check", "--out", str(tmp_path / "b")]) == 0
    rows = (tmp_path / "b.csv").read_text().splitlines()[1:]
    jacobi = [r for r in rows if r.startswith("jacobi,bianchi") or r.startswith("jacobi,so3")]
    assert len(jacobi) == 12 and all(float(r.split(",")[2]) == 0 for r in jacobi)


def test_reduce_check_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert cli.main(["reduce-check", "--out", str(tmp_path / name), "--seed", "7", "--steps", "50"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_config_error_exit_code(tmp_path, capsys):
    assert cli.main(["euler-top", "--dt", "-1", "--out", str(tmp_path / "x")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and "dt" in err["message"]


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("xi0 = 10, 10, 10\n")
    code = cli.main(["euler-top", "--config", str(cfg), "--dt", "5", "--steps", "3", "--out", str(tmp_path / "x")])
    assert code == 3
    assert json.loads(capsys.readouterr().err)["type"] == "ConvergenceError"


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "nambu.cli", "euler-top", "--steps", "10", "--out", str(tmp_path / "m")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("experiment=euler-top ")
