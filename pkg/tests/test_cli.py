import csv
import json

import pytest

from ofdm_jcas.cli import main

TINY = {
    "waveform": {"n_subcarriers": 64, "n_symbols": 32, "n_cp": 16},
    "targets": [{"range_m": 50.0, "velocity_mps": 20.0}, {"range_m": 100.0, "velocity_mps": -30.0}],
    "detector": {"max_targets": 2},
    "sweep": {"snr_db": [0, 10], "trials": 3, "estimators": ["ls", "dft-ce"]},
    "bench": {"sizes": [64, 128], "k": 2, "repeats": 1, "n_symbols": 40},
    "spectrum": {"n_subcarriers": 32, "frames": 2, "oversample": 4},
    "calibration": {"n": 32, "m": 32, "min_cells": 4096},
}


def run(tmp_path, *args, cfg=TINY, out="out"):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    dest = tmp_path / out
    code = main([*args, "--config", str(path), "--out", str(dest)])
    return code, dest


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize(
    "command, files",
    [
        ("detect", ["detections.csv", "map.csv", "map.pgm"]),
        ("sweep-rmse", ["rmse.csv"]),
        ("mse", ["mse.csv"]),
        ("bench", ["bench.csv"]),
        ("spectrum", ["spectrum.csv"]),
        ("calibrate-pfa", ["calibration.csv"]),
        ("resolutions", ["resolutions.csv"]),
    ],
)
def test_each_subcommand_writes_outputs(tmp_path, command, files):
    code, out = run(tmp_path, command)
    assert code == 0
    for name in files + ["run.json"]:
        assert (out / name).exists(), name
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["command"] == command
    assert manifest["manifest_version"] == 1


def test_detect_finds_tiny_targets(tmp_path):
    _, out = run(tmp_path, "detect")
    rows = read_csv(out / "detections.csv")
    assert rows[0][:3] == ["id", "delay_bin", "doppler_bin"]
    assert len(rows) == 3


def test_table1_resolutions_printed(tmp_path, capsys):
    code = main(["resolutions", "--preset", "table1", "--out", str(tmp_path)])
    assert code == 0
    text = capsys.readouterr().out
    for token in ("0.305176", "0.667904", "625", "374.026", "156.25", "467.532"):
        assert token in text
    assert len(read_csv(tmp_path / "resolutions.csv")) == 7


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "detect", cfg={"waveform": {"n_symbls": 3}})
    assert code == 2
    assert "waveform.n_symbls" in capsys.readouterr().err
    assert main(["detect", "--preset", "nope", "--out", str(tmp_path)]) == 2
    assert main(["detect", "--preset", "table1", "--seed", "-1", "--out", str(tmp_path)]) == 2


def test_model_violation_exit_code(tmp_path, capsys):
    cfg = dict(TINY, targets=[{"range_m": 400.0, "velocity_mps": 0.0}])
    code, _ = run(tmp_path, "detect", cfg=cfg)
    assert code == 3
    assert "model validity" in capsys.readouterr().err


def test_rerun_from_manifest_is_identical(tmp_path):
    _, first = run(tmp_path, "sweep-rmse", out="a")
    second = tmp_path / "b"
    assert main(["sweep-rmse", "--config", str(first / "run.json"), "--out", str(second)]) == 0
    assert (first / "rmse.csv").read_bytes() == (second / "rmse.csv").read_bytes()


def test_seed_flag_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TINY))
    main(["detect", "--config", str(path), "--seed", "42", "--out", str(tmp_path / "o")])
    manifest = json.loads((tmp_path / "o" / "run.json").read_text())
    assert manifest["seed"] == 42
    assert manifest["config"]["channel"]["seed"] == 42


def test_fig4_detects_scene_within_one_bin(tmp_path):
    from ofdm_jcas import config as cfgmod
    from ofdm_jcas.waveform import resolutions

    assert main(["detect", "--preset", "fig4", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "detections.csv")[1:]
    assert len(rows) == 5
    cfg = cfgmod.resolve(cfgmod.preset("fig4"))
    dd = resolutions(cfgmod.waveform_config(cfg)).range_resolution
    truth = sorted(t["range_m"] for t in cfg["targets"])
    got = sorted(float(r[3]) for r in rows)
    assert all(abs(g - t) <= dd for g, t in zip(got, truth))


def test_no_targets_false_alarm_count(tmp_path):
    cfg = {"waveform": {"n_subcarriers": 512, "n_symbols": 256}, "channel": {"snr_db": 0.0}}
    code, out = run(tmp_path, "detect", cfg=cfg)
    assert code == 0
    extras = json.loads((out / "run.json").read_text())["extras"]
    cells, pfa = extras["cells"], 1e-2
    assert cells == 512 * 256
    half = 3 * (cells * pfa * (1 - pfa)) ** 0.5
    assert abs(extras["threshold_exceedances"] - pfa * cells) <= half
