import json

import numpy as np
import pytest

from parmimo import experiments
from parmimo.experiments import ConfigError, ExperimentConfig, FrameJob, run_frames, summarize
from parmimo.precoders import PrecoderConfig
from parmimo.system import make_toneplan_80211n_40mhz

SMALL = {
    "N": 16, "M": 2, "T": 2, "frames": 8, "snr_db": [-4, 0, 4, 8, 12, 16],
    "precoders": [{"kind": "LS"}, {"kind": "MF"}, {"kind": "LS_CLIP", "target_par_db": 4.0},
                  {"kind": "PMP", "lam": 0.25, "K": 60}],
    "lambda_exponents": [-12, 4], "K_list": [60, 20], "target_pars_db": [4.0, 8.0],
    "N_list": [12, 16], "T_list": [1, 2],
}


def config(**over):
    return ExperimentConfig.from_dict({**SMALL, **over})


def test_defaults_match_reference_setup():
    cfg = ExperimentConfig()
    assert (cfg.N, cfg.M, cfg.W, cfg.T) == (100, 10, 128, 4)
    assert cfg.plan().n_active == 108
    assert [p.kind for p in cfg.precoder_configs()] == ["LS", "MF", "LS_CLIP", "PMP"]
    assert cfg.n_frames("par-ccdf") == 1000 and cfg.n_frames("ser-sweep") == 200


@pytest.mark.parametrize("doc,field", [
    ({"Nt": 4}, "Nt"),
    ({"N": 10, "M": 10}, "M"),
    ({"frames": 0}, "frames"),
    ({"snr_db": [0, 5, 5]}, "snr_db"),
    ({"snr_db": []}, "snr_db"),
    ({"N": "100"}, "N"),
    ({"tone_plan": "lte-20mhz"}, "tone_plan"),
    ({"tone_plan": {"W": 128, "active": [1], "extra": 1}}, "tone_plan"),
    ({"W": 64}, "tone_plan"),
    ({"precoders": [{"kind": "PMP", "lam": -1}]}, "precoders"),
    ({"precoders": [{"kind": "LS"}, {"kind": "LS"}]}, "precoders"),
    ({"precoders": [{"kind": "LS", "gain": 2}]}, "precoders"),
    ({"K_list": [0]}, "K_list"),
    ({"N_list": [5]}, "N_list"),
    ({"T": 200}, "T"),
])
def test_config_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(doc)
    assert info.value.field == field


def test_inline_tone_plan_and_instance_path(tmp_path):
    cfg = ExperimentConfig.from_dict({"W": 8, "N": 4, "M": 2, "T": 2,
                                      "tone_plan": {"W": 8, "active": [1, 2, 3]}, "instance": "x.npz"},
                                     base_dir=str(tmp_path))
    assert cfg.plan().active == (1, 2, 3)
    assert cfg.instance == str(tmp_path / "x.npz")


def test_streams_are_independent_and_repeatable():
    a = experiments.stream_rng(5, 0, 3, experiments.NOISE, 2).standard_normal(4)
    b = experiments.stream_rng(5, 0, 3, experiments.NOISE, 2).standard_normal(4)
    c = experiments.stream_rng(5, 0, 3, experiments.NOISE, 1).standard_normal(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def small_job(precoders, snr=(0.0, 10.0, 20.0)):
    return FrameJob(point=0, N=16, M=2, T=2, plan=make_toneplan_80211n_40mhz(),
                    precoders=tuple(precoders), snr_db=snr, seed=3)


def test_precoders_share_channel_payload_and_noise():
    # two identical precoders under different labels must see identical outcomes
    job = small_job([PrecoderConfig("LS", label="a"), PrecoderConfig("LS", label="b")])
    for out in run_frames(job, 4):
        assert np.array_equal(out[0].par, out[1].par)
        assert np.array_equal(out[0].errors, out[1].errors)


def test_parallel_run_matches_serial():
    job = small_job([PrecoderConfig("LS"), PrecoderConfig("PMP", K=30)])
    serial = summarize(job, run_frames(job, 4, threads=1))
    parallel = summarize(job, run_frames(job, 4, threads=2))
    for s, p in zip(serial, parallel):
        assert np.array_equal(s.par, p.par) and np.array_equal(s.ser, p.ser)


def test_early_abort_counts_frames_in_order():
    job = small_job([PrecoderConfig("MF")], snr=(-10.0, 30.0))
    outcomes = run_frames(job, 6)
    full = summarize(job, outcomes)[0]
    cut = summarize(job, outcomes, early_abort_errors=3)[0]
    # every user fails at -10 dB, so 2 frames (4 errors) reach the threshold
    assert full.ser[0] == 1.0 and cut.frames_used[0] == 2 and cut.ser[0] == 1.0
    assert cut.frames_used[1] == 6 and cut.ser[1] == full.ser[1]


def test_par_ccdf_command(tmp_path):
    summary = experiments.cmd_par_ccdf(config(), str(tmp_path))
    assert summary["LS+clip(4dB)"]["par_star_db"] == pytest.approx(4.0, abs=1e-9)
    assert summary["LS"]["obr_median"] == 0.0
    assert summary["PMP(lam=0.25,K=60)"]["obr_median_db"] < 0
    lines = (tmp_path / "par_ccdf.csv").read_text().splitlines()
    assert lines[0] == "x_value,y_value,series_label"
    assert len(lines) == 1 + 4 * 141
    doc = json.loads((tmp_path / "par_ccdf.json").read_text())
    assert doc["LS"]["obr_median_db"] is None


def test_ser_sweep_command(tmp_path):
    summary = experiments.cmd_ser_sweep(config(frames=20), str(tmp_path), trace=True)
    assert summary["LS"]["ser"][0] > summary["LS"]["ser"][-1]
    assert (tmp_path / "ser.csv").exists() and (tmp_path / "operating_points.csv").exists()
    assert (tmp_path / "trace_PMP_lam_0_25_K_60.csv").exists()


def test_tradeoff_command(tmp_path):
    doc = experiments.cmd_tradeoff(config(), str(tmp_path))
    assert [(p["lambda_exponent"], p["K"]) for p in doc["PMP"]] == [(-12.0, 60), (-12.0, 20), (4.0, 60), (4.0, 20)]
    assert [c["target_par_db"] for c in doc["LS_CLIP"]] == [4.0, 8.0]
    assert doc["PMP"][2]["par_star_db"] < doc["PMP"][0]["par_star_db"]
    rows = (tmp_path / "tradeoff_pmp.csv").read_text().splitlines()
    assert "-12.0" in rows[1] and rows[1].endswith("par_star_db|K=60")


def test_antenna_sweep_command(tmp_path):
    doc = experiments.cmd_antenna_sweep(config(frames=10), str(tmp_path))
    assert set(doc) == {"LS", "PMP(lam=0.25,K=60)"}
    assert set(doc["LS"]) == {"1", "2"} and set(doc["LS"]["1"]) == {"12", "16"}


def test_solve_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    plan = make_toneplan_80211n_40mhz()
    from parmimo.comms import make_payloads
    from parmimo.system import draw_channel

    chan = draw_channel(rng, 16, 2, 2, plan.W)
    pay = make_payloads(rng, 2, plan.n_active)
    experiments.save_instance(tmp_path / "inst.npz", pay.symbols, plan, chan)
    cfg = config(instance=str(tmp_path / "inst.npz"))
    summary = experiments.cmd_solve(cfg, str(tmp_path), trace=True)
    assert summary["iterations"] == 60
    sol = np.load(tmp_path / "solution.npz")
    assert sol["time"].shape == (16, 128)
    assert len((tmp_path / "trace.csv").read_text().splitlines()) == 61


def test_solve_requires_instance_and_pmp(tmp_path):
    with pytest.raises(ConfigError):
        experiments.cmd_solve(config(), str(tmp_path))
    with pytest.raises(ConfigError):
        experiments.cmd_solve(config(instance="x.npz", precoders=[{"kind": "LS"}]), str(tmp_path))
