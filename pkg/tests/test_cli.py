import json
import subprocess
import sys

import pytest

from parmimo.cli import main

CFG = {
    "N": 16, "M": 2, "T": 2, "frames": 9, "snr_db": [0, 8, 16],
    "precoders": [{"kind": "LS"}, {"kind": "MF"}, {"kind": "LS_CLIP", "target_par_db": 4.0},
                  {"kind": "PMP", "lam": 0.25, "K": 40}],
    "lambda_exponents": [-12, 4], "K_list": [40], "target_pars_db": [4.0],
    "N_list": [12, 16], "T_list": [2],
}

OUTPUTS = {
    "par-ccdf": ["par_ccdf.csv", "par_star.csv"],
    "ser-sweep": ["ser.csv", "operating_points.csv"],
    "tradeoff": ["tradeoff_pmp.csv", "tradeoff_clip.csv", "tradeoff_ls.csv"],
    "antenna-sweep": ["antenna_sweep.csv"],
}


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(CFG))
    return path


@pytest.mark.parametrize("command", sorted(OUTPUTS))
def test_rerun_is_byte_identical(command, cfg_path, tmp_path, capsys):
    for run in ("a", "b"):
        assert main([command, "--config", str(cfg_path), "--seed", "11", "--out", str(tmp_path / run)]) == 0
    report = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert report["command"] == command
    for name in OUTPUTS[command]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_changes_output(cfg_path, tmp_path):
    for seed in ("1", "2"):
        assert main(["par-ccdf", "--config", str(cfg_path), "--seed", seed, "--out", str(tmp_path / seed)]) == 0
    assert (tmp_path / "1" / "par_ccdf.csv").read_bytes() != (tmp_path / "2" / "par_ccdf.csv").read_bytes()


def test_threads_do_not_change_output(cfg_path, tmp_path):
    for threads in ("1", "2"):
        assert main(["par-ccdf", "--config", str(cfg_path), "--threads", threads, "--out", str(tmp_path / threads)]) == 0
    assert (tmp_path / "1" / "par_ccdf.csv").read_bytes() == (tmp_path / "2" / "par_ccdf.csv").read_bytes()


def test_trace_flag(cfg_path, tmp_path):
    assert main(["par-ccdf", "--config", str(cfg_path), "--trace", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "trace_PMP_lam_0_25_K_40.csv").read_text().startswith("k,objective,alpha\n")


def error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return json.loads(err[0])


def test_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({**CFG, "antennas": 4}))
    assert main(["par-ccdf", "--config", str(path)]) == 2
    assert error_line(capsys) == {"error": "ConfigError", "message": "unknown config keys: ['antennas']",
                                  "field": "antennas"}


def test_invalid_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    assert main(["ser-sweep", "--config", str(path)]) == 2
    assert error_line(capsys)["error"] == "ConfigError"


def test_usage_errors(capsys):
    assert main(["plot"]) == 2
    assert error_line(capsys)["error"] == "UsageError"
    assert main(["solve", "--threads", "x"]) == 2
    assert error_line(capsys)["error"] == "UsageError"
    assert main(["solve", "--threads", "0"]) == 2
    assert error_line(capsys)["field"] == "threads"


def test_runtime_failure_is_reported(cfg_path, tmp_path, capsys):
    # two frames of 12-antenna PAR samples are too few for the 1% statistic
    path = tmp_path / "few.json"
    path.write_text(json.dumps({**CFG, "frames": 2, "N": 12}))
    assert main(["par-ccdf", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert error_line(capsys)["error"] == "MetricError"


def test_console_script_entry_point(cfg_path, tmp_path):
    out = subprocess.run([sys.executable, "-m", "parmimo.cli", "solve", "--config", str(cfg_path)],
                         capture_output=True, text=True)
    assert out.returncode == 2
    assert json.loads(out.stderr)["field"] == "instance"
