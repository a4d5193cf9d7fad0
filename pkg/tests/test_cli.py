import dataclasses
import io
import os
import subprocess
import sys

import pytest

from nowpac.cli import UsageError, main, parse_args
from nowpac.core import SolverConfig
from nowpac.errors import ConfigRangeError

# a valid non-default value for every solver parameter
OVERRIDES = {
    "eps_b": "5", "eta_0": "0.05", "eta_1": "0.8", "gamma": "0.7", "gamma_inc": "1.5", "omega": "0.5",
    "eps_c": "0.02", "mu": "2", "p": "0.25", "q": "0.5", "rho_0": "0.2", "rho_min": "0.01",
    "rho_max": "0.9", "mu_1": "0.001", "max_evals": "400", "feasibility_margin": "0.001",
    "noise_window": "6", "tau_threshold": "1.2", "nc_limit": "2", "seed": "7", "early_termination": "false",
}


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def test_overrides_cover_every_field():
    assert set(OVERRIDES) == {f.name for f in dataclasses.fields(SolverConfig)}


def test_parse_solve():
    inv = parse_args(["solve", "rosenbrock", "--set", "rho_min=1e-5"])
    assert inv.subcommand == "solve" and inv.problem == "rosenbrock"
    assert inv.config.rho_min == 1e-5


def test_parse_bench_csv():
    inv = parse_args(["bench", "--format", "csv"])
    assert inv.subcommand == "bench" and inv.problem is None and inv.format == "csv"


def test_range_error_cites_interval():
    with pytest.raises(ConfigRangeError, match=r"gamma=1.5 .*\]0, 1\["):
        parse_args(["solve", "rosenbrock", "--set", "gamma=1.5"])


@pytest.mark.parametrize("argv,flag", [
    (["solve", "rosenbrock", "--set", "foo=1"], "--set"),
    (["solve", "rosenbrock", "--set", "max_evals=2.5"], "--set"),
    (["solve", "rosenbrock", "--set", "gamma"], "--set"),
    (["sweep", "--noise-f", "a,b"], "--noise-f"),
    (["sweep", "--replicates", "0"], "--replicates"),
    (["solve", "rosenbrock", "--format", "xml"], "--format"),
])
def test_usage_errors_name_flag(argv, flag):
    with pytest.raises(UsageError, match=flag):
        parse_args(argv)


def test_exit_codes():
    assert _run(["solve", "banana"])[0] == 2
    assert _run(["solve", "rosenbrock", "--set", "gamma=1.5"])[0] == 2
    assert _run(["frobnicate"])[0] == 2
    code, _, err = _run(["solve", "hs29", "--set", "rho_0=0.5", "--set", "rho_max=0.4"])
    assert code == 2 and "rho" in err


def test_solve_prints_result():
    code, out, _ = _run(["solve", "rosenbrock", "--set", "rho_min=1e-5"])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[-1] == "terminated_by=rho_min"
    assert lines[0].startswith("x_best=")


def test_config_file_and_set_precedence(tmp_path):
    cfg = tmp_path / "solver.cfg"
    cfg.write_text("# tuned\neta_1 = 0.75\ngamma = 0.5  # shrink harder\n\n")
    inv = parse_args(["solve", "hs227", "--config", str(cfg), "--set", "gamma=0.6"])
    assert inv.config.eta_1 == 0.75 and inv.config.gamma == 0.6


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("eta_1 0.75\n")
    with pytest.raises(UsageError, match="--config"):
        parse_args(["solve", "hs227", "--config", str(cfg)])
    with pytest.raises(UsageError, match="--config"):
        parse_args(["solve", "hs227", "--config", str(tmp_path / "missing.cfg")])


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("NOWPAC_OUT", str(tmp_path))
    assert parse_args(["solve", "rosenbrock"]).output_dir == str(tmp_path)
    assert parse_args(["solve", "rosenbrock", "--out", "elsewhere"]).output_dir == "elsewhere"


def test_every_field_round_trips_into_history(tmp_path):
    argv = ["solve", "hs227", "--out", str(tmp_path)]
    for key, value in OVERRIDES.items():
        argv += ["--set", f"{key}={value}"]
    code, _, err = _run(argv)
    assert code == 0, err
    (hist,) = os.listdir(tmp_path)
    header = {}
    for line in (tmp_path / hist).read_text().splitlines():
        if line.startswith("# ") and " = " in line:
            k, v = line[2:].split(" = ", 1)
            header[k] = v
    expected = parse_args(["solve", "hs227"] + sum((["--set", f"{k}={v}"] for k, v in OVERRIDES.items()), [])).config
    for key in OVERRIDES:
        assert header[key] == str(getattr(expected, key)), key
    assert header["early_termination"] == "False" and header["seed"] == "7"


def test_flags_map_onto_config():
    inv = parse_args(["sweep", "--seed", "3", "--no-early-termination", "--noise-f", "1e-2,1e-3",
                      "--noise-c", "1e-4", "--replicates", "4", "--sc", "1e-3"])
    assert inv.config.seed == 3 and inv.config.early_termination is False
    assert inv.noise_f == [1e-2, 1e-3] and inv.noise_c == [1e-4]
    assert inv.replicates == 4 and inv.sc == 1e-3
    assert parse_args(["sweep"]).replicates == 100


def test_sweep_one_row_per_level():
    code, out, _ = _run(["sweep", "--noise-f", "1e-2,1e-3", "--replicates", "2", "--format", "markdown"])
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 4
    assert "df=0.01" in lines[2] and "df=0.001" in lines[3]


def test_bench_single_problem():
    code, out, _ = _run(["bench", "hs227"])
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 2 and lines[1].startswith("hs227,0.001,")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nowpac", "solve", "hs228", "--set", "rho_min=1e-3"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert proc.stdout.strip().splitlines()[-1] == "terminated_by=rho_min"
