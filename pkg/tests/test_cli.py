import json
import os
import subprocess
import sys

import pytest

from rotopump.cli import execute, resolve_threads
from rotopump.config import RunParameters, load_run_parameters, parse_override
from rotopump.errors import ConfigError
from rotopump.io import fmt, read_csv, write_csv

SIM = """
gamma_d_hz = 5e5
gamma_o_hz = 1e6
gamma_l_hz = 5e5
rotor_rate_rad_s = 10
sigma_m = 3
dt_s = 2e-9
t_total_s = 4e-6
snapshot_stride = 100
n_trajectories = 4
"""


@pytest.fixture
def sim_params(tmp_path):
    p = tmp_path / "sim.params"
    p.write_text(SIM)
    return p


def _run(*args):
    return execute([str(a) for a in args])


def test_simulate_artifacts_and_thread_independence(tmp_path, sim_params):
    outs = []
    for threads in (1, 3):
        out = tmp_path / f"t{threads}"
        assert _run("simulate", "--params", sim_params, "--out", out, "--seed", 77, "--threads", threads) == 0
        outs.append(out)
    for name in ("series.csv", "distributions.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    cols = read_csv(outs[0] / "series.csv")
    assert list(cols)[:4] == ["t_s", "mean_lz_hbar", "var_lz_hbar2", "e_rot_J"]
    man = json.loads((outs[0] / "manifest.json").read_text())
    assert man["seed"] == 77 and man["command"] == "simulate"
    assert "series.csv" in man["artifacts"]
    assert {"numpy", "scipy", "numba", "rotopump"} <= set(man["versions"])
    assert json.loads((outs[0] / "distributions.json").read_text())["seed"] == 77
    other = tmp_path / "other"
    _run("simulate", "--params", sim_params, "--out", other, "--seed", 78, "--threads", 1)
    assert (other / "series.csv").read_bytes() != (outs[0] / "series.csv").read_bytes()


def test_manifest_replay(tmp_path, sim_params):
    first = tmp_path / "first"
    assert _run("simulate", "--params", sim_params, "--out", first, "--seed", 5, "--threads", 1) == 0
    man = json.loads((first / "manifest.json").read_text())
    lines = [f"{k} = {fmt(v) if isinstance(v, float) else v}" for k, v in man["parameters"].items() if v is not None]
    replay_params = tmp_path / "replay.params"
    replay_params.write_text("\n".join(lines) + "\n")
    assert load_run_parameters(replay_params).config_hash() == man["config_hash"]
    second = tmp_path / "second"
    assert _run("simulate", "--params", replay_params, "--out", second, "--threads", 2) == 0
    assert (second / "series.csv").read_bytes() == (first / "series.csv").read_bytes()
    assert json.loads((second / "manifest.json").read_text())["config_hash"] == man["config_hash"]


@pytest.mark.parametrize("command", ["rates", "phonon", "sweep", "design"])
def test_commands_deterministic(tmp_path, command):
    a, b = tmp_path / "a", tmp_path / "b"
    extra = ["--set", "gamma_o_points=9", "--set", "volume_points=7", "--set", "field_points=401"]
    assert _run(command, "--out", a, "--threads", 1, *extra) == 0
    assert _run(command, "--out", b, "--threads", 4, *extra) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    if command != "design":
        assert csvs
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    plots = list((a / "plot").glob("*.dat")) if (a / "plot").exists() else []
    for p in plots:
        assert p.read_text().startswith("#")


def test_verify_command(tmp_path, capsys):
    assert _run("verify", "--out", tmp_path) == 0
    text = capsys.readouterr().out
    assert "PASS" in text and "FAIL" not in text
    rows = read_csv(tmp_path / "verify.csv")
    assert rows["passed"] and all(v == "true" for v in rows["passed"])


def test_exit_codes(tmp_path, sim_params, capsys):
    assert _run("simulate", "--params", sim_params, "--out", tmp_path / "x", "--set", "dt_s=1e-6") == 4
    assert _run("rates", "--out", tmp_path / "y", "--set", "no_such_key=1") == 2
    assert _run("rates", "--out", tmp_path / "y", "--params", tmp_path / "missing.params") == 2
    bad = tmp_path / "bad.params"
    bad.write_text("gamma_d_hz = fast\n")
    assert _run("rates", "--out", tmp_path / "z", "--params", bad) == 2
    cap = tmp_path / "cap.params"
    cap.write_text(SIM + "max_sites = 12\n")
    assert _run("simulate", "--params", cap, "--out", tmp_path / "w", "--set", "t_total_s=2e-5",
                "--set", "sigma_m=0") == 5
    err = capsys.readouterr().err
    assert "error" in err
    with pytest.raises(SystemExit):
        _run("nonsense", "--out", tmp_path)


def test_inputs_not_mutated(tmp_path, sim_params):
    before = sim_params.read_bytes()
    _run("simulate", "--params", sim_params, "--out", tmp_path / "o", "--threads", 1)
    assert sim_params.read_bytes() == before


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("ROTOPUMP_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv("ROTOPUMP_THREADS", "x")
    with pytest.raises(ConfigError):
        resolve_threads(None)
    monkeypatch.delenv("ROTOPUMP_THREADS")
    assert resolve_threads(None) == (os.cpu_count() or 1)
    with pytest.raises(ConfigError):
        resolve_threads(0)


def test_env_threads_recorded(tmp_path):
    env = dict(os.environ, ROTOPUMP_THREADS="2")
    out = tmp_path / "env"
    proc = subprocess.run([sys.executable, "-m", "rotopump.cli", "rates", "--out", str(out), "--set", "gamma_o_points=5"],
                          env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads((out / "manifest.json").read_text())["threads"] == 2


def test_config_overrides_and_units():
    p = RunParameters.from_mapping({}).with_overrides([parse_override("eta_ppm=2"), ("gamma_d_hz", "3e5")])
    assert p["eta_m3"] == pytest.approx(3.52e23)
    assert p["gamma_d_hz"] == 3e5
    with pytest.raises(ConfigError):
        parse_override("novalue")
    with pytest.raises(ConfigError):
        RunParameters.from_mapping({"gamma_d_hz": "inf"})
    q = RunParameters.from_mapping({"gamma_l_list_hz": "0, 1e5"})
    assert q.float_list("gamma_l_list_hz") == [0.0, 1e5]
    assert p.config_hash() != RunParameters.from_mapping({}).config_hash()


def test_csv_format(tmp_path):
    path = write_csv(tmp_path / "c.csv", {"a": [0.1, 1e-300], "b": [True, False]})
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    back = read_csv(path)
    assert [float(x) for x in back["a"]] == [0.1, 1e-300]
