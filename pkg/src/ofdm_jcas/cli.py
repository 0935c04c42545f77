"""
Command-line runner.

Each subcommand resolves a config (``--preset`` and/or ``--config``), runs
the corresponding experiment, writes its CSVs plus a ``run.json`` manifest
into the output directory and returns an exit code: 0 on success, 2 for
configuration errors, 3 when a target violates the channel model bounds.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import config as cfgmod
from .detection import periodogram, write_map_csv, write_pgm
from .errors import ConfigError, ModelValidityError
from .metrics import bench_estimators, calibrate_pfa, mse_sweep, rmse_sweep, symbol_spectrum
from .pipeline import run_trial
from .waveform import resolutions

COMMANDS = ("detect", "sweep-rmse", "bench", "spectrum", "mse", "calibrate-pfa", "resolutions")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def build_config(args) -> dict:
    raw: dict = {}
    if args.preset:
        raw = cfgmod.preset(args.preset)
    if args.config:
        loaded = cfgmod.load(args.config)
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        raw = _merge(raw, loaded)
    if args.seed is not None:
        raw = _merge(raw, {"channel": {"seed": args.seed}})
    if args.estimate_noise:
        raw = _merge(raw, {"detector": {"estimate_noise": True}})
    if args.out:
        raw = _merge(raw, {"output": {"dir": args.out}})
    return cfgmod.resolve(raw)


# ---------------------------------------------------------------------------
# Commands; each returns a dict of extras for the manifest
# ---------------------------------------------------------------------------


def cmd_detect(cfg: dict, out: Path) -> dict:
    sc = cfgmod.scenario(cfg)
    res = run_trial(sc, cfg["channel"]["seed"])
    rows = [
        (i, d.delay_bin, d.doppler_bin, d.range, d.velocity, 10 * np.log10(d.peak_power) if d.peak_power > 0 else -300.0)
        for i, d in enumerate(res.detections)
    ]
    write_csv(
        out / "detections.csv",
        ["id", "delay_bin", "doppler_bin", "range_m", "velocity_mps", "peak_power_db"],
        rows,
    )
    p = res.periodogram
    if p is None:
        wf = sc.waveform
        p = periodogram(res.h_est, wf.window, wf.n_prime, wf.m_prime)
    write_map_csv(out / "map.csv", p)
    write_pgm(out / "map.pgm", p)
    for r in rows:
        print(f"target {r[0]}: delay bin {r[1]}, Doppler bin {r[2]}, {r[3]:.3f} m, {r[4]:.3f} m/s, {r[5]:.2f} dB")
    extras = {"detections": len(rows), "noise_variance": res.sigma2}
    if res.mask is not None:
        extras["threshold_exceedances"] = int(np.count_nonzero(res.mask))
        extras["cells"] = int(res.mask.size)
        print(f"{extras['threshold_exceedances']} of {extras['cells']} cells above threshold")
    return extras


def cmd_sweep_rmse(cfg: dict, out: Path) -> dict:
    sw = cfg["sweep"]
    rows = rmse_sweep(cfgmod.scenario(cfg), sw["estimators"], sw["snr_db"], sw["trials"], cfg["channel"]["seed"])
    write_csv(
        out / "rmse.csv",
        ["snr_db", "estimator", "range_rmse_m", "velocity_rmse_mps", "miss_rate", "trials"],
        [(r.snr_db, r.estimator, r.range_rmse_m, r.velocity_rmse_mps, r.miss_rate, r.trials) for r in rows],
    )
    for r in rows:
        print(f"{r.snr_db:6.1f} dB {r.estimator:7s} range {r.range_rmse_m:.4g} m  velocity {r.velocity_rmse_mps:.4g} m/s  miss {r.miss_rate:.3f}")
    return {"miss_penalty": "undetected targets count the CP range limit and half the unambiguous velocity"}


def cmd_mse(cfg: dict, out: Path) -> dict:
    sw = cfg["sweep"]
    ests = [e for e in sw["estimators"]]
    rows = mse_sweep(cfgmod.scenario(cfg), ests, sw["snr_db"], sw["trials"], cfg["channel"]["seed"])
    write_csv(out / "mse.csv", ["snr_db", "estimator", "channel_mse"], [(r.snr_db, r.estimator, r.channel_mse) for r in rows])
    for r in rows:
        print(f"{r.snr_db:6.1f} dB {r.estimator:7s} MSE {10 * np.log10(r.channel_mse):.2f} dB")
    return {}


def cmd_bench(cfg: dict, out: Path) -> dict:
    b = cfg["bench"]
    rows = bench_estimators(
        b["sizes"], b["k"], b["repeats"], b["n_symbols"], float(b["bandwidth_hz"]), float(b["snr_db"]), cfg["channel"]["seed"]
    )
    write_csv(
        out / "bench.csv",
        ["n", "m", "k", "periodogram_ms", "sft_ms", "speedup", "samples_used"],
        [(r.n, r.m, r.k, r.periodogram_ms, r.sft_ms, r.speedup, r.samples_used) for r in rows],
    )
    reductions = {}
    for r in rows:
        red = 100 * (1 - r.sft_ms / r.periodogram_ms)
        reductions[str(r.n)] = red
        print(f"N={r.n:5d} M={r.m}: periodogram {r.periodogram_ms:.3f} ms, SFT {r.sft_ms:.3f} ms, speedup {r.speedup:.2f}x, time reduction {red:.2f} %")
    return {
        "time_reduction_percent": reductions,
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "machine": platform.machine(),
            "processor": platform.processor(),
            "cpu_count": os.cpu_count(),
        },
    }


def cmd_spectrum(cfg: dict, out: Path) -> dict:
    sp = cfg["spectrum"]
    seed = cfg["channel"]["seed"]
    rows, oob = [], {}
    for precoding in (False, True):
        for hpa_on in (False, True):
            res = symbol_spectrum(
                sp["n_subcarriers"], float(sp["bandwidth_hz"]), precoding, hpa_on, float(sp["q_db"]),
                sp["frames"], sp["oversample"], sp["qam_order"], seed,
            )
            rows.extend((float(f), float(p), res.variant) for f, p in zip(res.freq_hz, res.power_db))
            oob[res.variant] = res.out_of_band
            print(f"{res.variant:9s} out-of-band/in-band power {10 * np.log10(max(res.out_of_band, 1e-30)):.2f} dB")
    write_csv(out / "spectrum.csv", ["freq_hz", "power_db", "variant"], rows)
    return {"out_of_band_ratio": oob}


def cmd_calibrate_pfa(cfg: dict, out: Path) -> dict:
    c = cfg["calibration"]
    rows = calibrate_pfa(c["n"], c["m"], float(c["pfa"]), c["min_cells"], c["windows"], float(c["sigma2"]), cfg["channel"]["seed"])
    write_csv(
        out / "calibration.csv",
        ["window", "pfa", "cells", "exceedances", "rate", "lower", "upper"],
        [(r.window, r.pfa, r.cells, r.exceedances, r.rate, r.lower, r.upper) for r in rows],
    )
    for r in rows:
        print(f"{r.window:11s} rate {r.rate:.5f} over {r.cells} cells, band [{r.lower:.5f}, {r.upper:.5f}] {'ok' if r.within else 'OUT'}")
    return {"within_band": {r.window: r.within for r in rows}}


def cmd_resolutions(cfg: dict, out: Path) -> dict:
    values = resolutions(cfgmod.waveform_config(cfg)).as_dict()
    write_csv(out / "resolutions.csv", ["quantity", "value"], values.items())
    for k, v in values.items():
        print(f"{k} {v:.6g}")
    return {}


HANDLERS = {
    "detect": cmd_detect,
    "sweep-rmse": cmd_sweep_rmse,
    "bench": cmd_bench,
    "spectrum": cmd_spectrum,
    "mse": cmd_mse,
    "calibrate-pfa": cmd_calibrate_pfa,
    "resolutions": cmd_resolutions,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ofdm-jcas", description="OFDM radar simulation and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON config or a previous run.json")
        p.add_argument("--preset", metavar="NAME", help=f"one of {', '.join(cfgmod.PRESETS)}")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, help="master seed (overrides channel.seed)")
        p.add_argument("--estimate-noise", action="store_true", help="estimate noise variance from the periodogram")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = build_config(args)
        out = Path(cfg["output"]["dir"])
        out.mkdir(parents=True, exist_ok=True)
        extras = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ModelValidityError as exc:
        print(f"model validity error: {exc}", file=sys.stderr)
        return 3
    manifest = {
        "manifest_version": 1,
        "command": args.command,
        "preset": args.preset,
        "seed": cfg["channel"]["seed"],
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
        "config": cfg,
        "extras": extras,
    }
    (out / "run.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
