"""
JSON run configuration: schema, defaults, presets and conversion to the
library's dataclasses.

A config is a dict of sections.  Unknown sections or keys are rejected and
every value is type- and range-checked with a ``section.key`` message.
:func:`resolve` returns the fully populated config that gets stored in
``run.json``, so a manifest fed back as ``--config`` reruns the same thing.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path

from .channel import AMPLITUDE_MODES, RadarTarget
from .detection import bins_to_physics
from .errors import ConfigError
from .pipeline import DETECTORS, ESTIMATORS, Scenario
from .sft import SftConfig
from .waveform import QAM_ORDERS, WINDOWS, WaveformConfig

_NUM = (int, float)

# section -> key -> (accepted types, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "waveform": {
        "n_subcarriers": (int, 2048),
        "n_symbols": (int, 560),
        "subcarrier_spacing_hz": (_NUM + (type(None),), 240e3),
        "bandwidth_hz": (_NUM + (type(None),), None),
        "carrier_hz": (_NUM, 77e9),
        "n_cp": (int, None),
        "qam_order": (int, 16),
    },
    "channel": {
        "snr_db": (_NUM + (type(None),), 20.0),
        "amplitude_mode": (str, "normalized"),
        "seed": (int, 0),
    },
    "estimator": {
        "kind": (str, "ls"),
        "zcp": (dict, None),
    },
    "detector": {
        "kind": (str, "periodogram"),
        "pfa": (_NUM, 1e-2),
        "window": (str, "hamming"),
        "n_prime": (int, None),
        "m_prime": (int, None),
        "max_targets": (int, None),
        "estimate_noise": (bool, False),
        "sft": (dict, None),
    },
    "sweep": {
        "snr_db": (list, [-30, -25, -20, -15, -10, -5, 0, 5, 10, 15, 20]),
        "trials": (int, 200),
        "estimators": (list, ["ls", "dft-ce", "zcp-ls"]),
    },
    "bench": {
        "sizes": (list, [256, 512, 1024, 2048]),
        "k": (int, 5),
        "repeats": (int, 7),
        "n_symbols": (int, 200),
        "bandwidth_hz": (_NUM, 60e6),
        "snr_db": (_NUM, 20.0),
    },
    "spectrum": {
        "n_subcarriers": (int, 128),
        "bandwidth_hz": (_NUM, 20e6),
        "q_db": (_NUM, 2.0),
        "frames": (int, 100),
        "oversample": (int, 8),
        "qam_order": (int, 16),
    },
    "calibration": {
        "n": (int, 256),
        "m": (int, 256),
        "pfa": (_NUM, 1e-2),
        "min_cells": (int, 1_000_000),
        "windows": (list, ["rectangular", "hamming"]),
        "sigma2": (_NUM, 1.0),
    },
    "output": {
        "dir": (str, "out"),
    },
}

TARGET_KEYS = {"range_m": _NUM, "velocity_mps": _NUM, "rcs": _NUM, "phase": _NUM + (type(None),)}
ZCP_KEYS = {"L": (int, type(None)), "root": (int,)}
SFT_KEYS = {"i_max": (int,), "seed": (int,)}


def _check_type(where: str, value, types) -> None:
    types = types if isinstance(types, tuple) else (types,)
    # bool is an int subclass; never accept it for numeric fields
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{where}: expected {_type_names(types)}, got bool")
    if not isinstance(value, types):
        raise ConfigError(f"{where}: expected {_type_names(types)}, got {type(value).__name__}")
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")


def _type_names(types) -> str:
    return " or ".join("null" if t is type(None) else t.__name__ for t in types)


def _reject_unknown(where: str, given, allowed) -> None:
    extra = sorted(set(given) - set(allowed))
    if extra:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown key(s): {', '.join(prefix + k for k in extra)}")


def default_config() -> dict:
    cfg = {sec: {k: copy.deepcopy(v[1]) for k, v in keys.items()} for sec, keys in SCHEMA.items()}
    cfg["targets"] = []
    return cfg


def resolve(raw: dict | None) -> dict:
    """Validate ``raw`` and fill in every default; returns a new dict."""
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown("", raw, list(SCHEMA) + ["targets"])
    cfg = default_config()
    for sec, keys in SCHEMA.items():
        given = raw.get(sec, {})
        if not isinstance(given, dict):
            raise ConfigError(f"{sec}: expected an object")
        _reject_unknown(sec, given, keys)
        for key, value in given.items():
            types, default = keys[key]
            if not (value is None and default is None):
                _check_type(f"{sec}.{key}", value, types)
            cfg[sec][key] = copy.deepcopy(value)
    if "bandwidth_hz" in raw.get("waveform", {}) and "subcarrier_spacing_hz" not in raw.get("waveform", {}):
        cfg["waveform"]["subcarrier_spacing_hz"] = None
    if cfg["waveform"]["n_cp"] is None:
        cfg["waveform"]["n_cp"] = int(round(0.25 * cfg["waveform"]["n_subcarriers"]))
    cfg["targets"] = _resolve_targets(raw.get("targets", []))
    cfg["estimator"]["zcp"] = _resolve_sub("estimator.zcp", cfg["estimator"]["zcp"], ZCP_KEYS, {"L": None, "root": 1})
    cfg["detector"]["sft"] = _resolve_sub("detector.sft", cfg["detector"]["sft"], SFT_KEYS, {"i_max": 10, "seed": 0})
    _check_values(cfg)
    return cfg


def _resolve_sub(where, given, keys, defaults) -> dict:
    given = {} if given is None else given
    _reject_unknown(where, given, keys)
    out = dict(defaults)
    for k, v in given.items():
        if v is not None or type(None) not in keys[k]:
            _check_type(f"{where}.{k}", v, keys[k])
        out[k] = v
    return out


def _resolve_targets(targets) -> list[dict]:
    if not isinstance(targets, list):
        raise ConfigError("targets: expected a list")
    out = []
    for i, t in enumerate(targets):
        where = f"targets[{i}]"
        if not isinstance(t, dict):
            raise ConfigError(f"{where}: expected an object")
        _reject_unknown(where, t, TARGET_KEYS)
        if "range_m" not in t:
            raise ConfigError(f"{where}.range_m: required")
        item = {"range_m": t["range_m"], "velocity_mps": t.get("velocity_mps", 0.0), "rcs": t.get("rcs", 1.0)}
        if t.get("phase") is not None:
            item["phase"] = t["phase"]
        for k, v in item.items():
            _check_type(f"{where}.{k}", v, TARGET_KEYS[k])
        out.append(item)
    return out


def _check_values(cfg: dict) -> None:
    def need(cond, where, msg):
        if not cond:
            raise ConfigError(f"{where}: {msg}")

    wf = cfg["waveform"]
    need(wf["n_subcarriers"] >= 1, "waveform.n_subcarriers", "must be >= 1")
    need(wf["n_symbols"] >= 1, "waveform.n_symbols", "must be >= 1")
    need(0 <= wf["n_cp"] < wf["n_subcarriers"], "waveform.n_cp", "must satisfy 0 <= n_cp < n_subcarriers")
    need(wf["qam_order"] in QAM_ORDERS, "waveform.qam_order", f"must be one of {list(QAM_ORDERS)}")
    need(wf["carrier_hz"] > 0, "waveform.carrier_hz", "must be positive")
    spacing, bw = wf["subcarrier_spacing_hz"], wf["bandwidth_hz"]
    need((spacing is None) != (bw is None), "waveform", "give exactly one of subcarrier_spacing_hz and bandwidth_hz")
    need((spacing or bw) > 0, "waveform", "subcarrier spacing/bandwidth must be positive")

    ch = cfg["channel"]
    need(ch["amplitude_mode"] in AMPLITUDE_MODES, "channel.amplitude_mode", f"must be one of {list(AMPLITUDE_MODES)}")
    need(ch["seed"] >= 0, "channel.seed", "must be non-negative")

    est = cfg["estimator"]
    need(est["kind"] in ESTIMATORS, "estimator.kind", f"must be one of {list(ESTIMATORS)}")
    zl = est["zcp"]["L"]
    n = wf["n_subcarriers"]
    need(zl is None or zl == n * n, "estimator.zcp.L", f"must equal n_subcarriers**2 = {n * n}")
    need(math.gcd(est["zcp"]["root"], n * n) == 1, "estimator.zcp.root", "must be coprime to the sequence length")

    det = cfg["detector"]
    need(det["kind"] in DETECTORS, "detector.kind", f"must be one of {list(DETECTORS)}")
    need(0 < det["pfa"] <= 1, "detector.pfa", "must lie in (0, 1]")
    need(det["window"] in WINDOWS, "detector.window", f"must be one of {list(WINDOWS)}")
    for key, base in (("n_prime", n), ("m_prime", wf["n_symbols"])):
        need(det[key] is None or det[key] >= base, f"detector.{key}", f"must be >= {base}")
    need(det["max_targets"] is None or det["max_targets"] >= 1, "detector.max_targets", "must be >= 1")
    need(det["sft"]["i_max"] >= 1, "detector.sft.i_max", "must be >= 1")

    sw = cfg["sweep"]
    need(sw["trials"] >= 1, "sweep.trials", "must be >= 1")
    for i, s in enumerate(sw["snr_db"]):
        _check_type(f"sweep.snr_db[{i}]", s, _NUM)
    for i, e in enumerate(sw["estimators"]):
        need(e in ESTIMATORS, f"sweep.estimators[{i}]", f"must be one of {list(ESTIMATORS)}")

    b = cfg["bench"]
    for i, s in enumerate(b["sizes"]):
        _check_type(f"bench.sizes[{i}]", s, int)
        need(s >= 1, f"bench.sizes[{i}]", "must be >= 1")
    need(b["k"] >= 1, "bench.k", "must be >= 1")
    need(b["repeats"] >= 1, "bench.repeats", "must be >= 1")

    sp = cfg["spectrum"]
    need(sp["frames"] >= 1, "spectrum.frames", "must be >= 1")
    need(sp["oversample"] >= 1, "spectrum.oversample", "must be >= 1")
    need(sp["qam_order"] in QAM_ORDERS, "spectrum.qam_order", f"must be one of {list(QAM_ORDERS)}")

    cal = cfg["calibration"]
    need(0 < cal["pfa"] <= 1, "calibration.pfa", "must lie in (0, 1]")
    for i, w in enumerate(cal["windows"]):
        need(w in WINDOWS, f"calibration.windows[{i}]", f"must be one of {list(WINDOWS)}")


def load(path) -> dict:
    """Read a config file or a ``run.json`` manifest (its ``config`` is used)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if isinstance(data, dict) and "manifest_version" in data:
        data = data.get("config")
    return data


# ---------------------------------------------------------------------------
# Conversion
# ---------------------------------------------------------------------------


def waveform_config(cfg: dict) -> WaveformConfig:
    wf, det = cfg["waveform"], cfg["detector"]
    spacing = wf["subcarrier_spacing_hz"]
    if spacing is None:
        spacing = wf["bandwidth_hz"] / wf["n_subcarriers"]
    return WaveformConfig(
        n_subcarriers=wf["n_subcarriers"],
        n_symbols=wf["n_symbols"],
        subcarrier_spacing=float(spacing),
        carrier=float(wf["carrier_hz"]),
        n_cp=wf["n_cp"],
        qam_order=wf["qam_order"],
        n_prime=det["n_prime"],
        m_prime=det["m_prime"],
        window=det["window"],
        pfa=float(det["pfa"]),
    )


def targets(cfg: dict) -> tuple[RadarTarget, ...]:
    return tuple(
        RadarTarget(float(t["range_m"]), float(t["velocity_mps"]), float(t["rcs"]), t.get("phase"))
        for t in cfg["targets"]
    )


def scenario(cfg: dict) -> Scenario:
    det, ch = cfg["detector"], cfg["channel"]
    snr = ch["snr_db"]
    return Scenario(
        waveform=waveform_config(cfg),
        targets=targets(cfg),
        snr_db=None if snr is None else float(snr),
        amplitude_mode=ch["amplitude_mode"],
        estimator=cfg["estimator"]["kind"],
        detector=det["kind"],
        max_targets=det["max_targets"],
        zc_root=cfg["estimator"]["zcp"]["root"],
        sft=SftConfig(i_max=det["sft"]["i_max"], seed=det["sft"]["seed"]),
        estimate_noise=det["estimate_noise"],
    )


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_SCENE_RANGES = (100.0, 120.0, 135.0, 148.0, 155.0)
_SCENE_VELOCITIES = (30.0, -25.0, 5.0, 17.0, -15.0)
_DESK = {"n_subcarriers": 512, "n_symbols": 140, "n_cp": 128}
# (delay bin, Doppler bin) pairs on the reference grid, all inside the model bounds
_ONGRID_BINS = ((328, 45), (393, -37), (442, 7), (485, 25), (508, -22))


def _scene_targets():
    return [{"range_m": r, "velocity_mps": v} for r, v in zip(_SCENE_RANGES, _SCENE_VELOCITIES)]


def _ongrid_targets():
    wf = WaveformConfig()
    return [
        {"range_m": r, "velocity_mps": v}
        for r, v in (bins_to_physics(d, s, wf) for d, s in _ONGRID_BINS)
    ]


def _rmse_preset():
    return {
        "waveform": dict(_DESK),
        "targets": _scene_targets(),
        "detector": {"max_targets": 5},
        "sweep": {"trials": 200},
    }


PRESETS = {
    "table1": lambda: {},
    "fig4": lambda: {
        "targets": _scene_targets(),
        "channel": {"snr_db": 5.0, "amplitude_mode": "friis"},
        "detector": {"max_targets": 5},
    },
    "fig5": lambda: {
        "targets": _scene_targets(),
        "sweep": {"snr_db": [-10, -5, 0, 5, 10, 15, 20, 25, 30], "trials": 50, "estimators": ["ls", "dft-ce"]},
    },
    "fig6": lambda: {"bench": {"sizes": [256, 512, 1024, 2048], "k": 5, "n_symbols": 200, "bandwidth_hz": 60e6}},
    "fig7": lambda: {"spectrum": {"n_subcarriers": 128, "bandwidth_hz": 20e6, "q_db": 2.0, "frames": 100}},
    "fig8": lambda: {
        "targets": _ongrid_targets(),
        "channel": {"snr_db": 20.0},
        "detector": {"kind": "fps-sft", "max_targets": 5},
    },
    "fig9": _rmse_preset,
    "fig10": _rmse_preset,
}


def preset(name: str) -> dict:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
