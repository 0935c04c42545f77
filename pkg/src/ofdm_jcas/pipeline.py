"""
End-to-end radar processing: frame, channel, channel estimate, detector.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, RadarTarget, apply_channel, true_channel
from .detection import Detection, estimate_noise_variance, extract_peaks, periodogram, threshold, window_2d
from .errors import ConfigError
from .estimation import dft_ce, division_noise_variance, spectral_division
from .sft import DivisionSampler, SftConfig, sft_detect
from .waveform import WaveformConfig, random_frame
from .zadoff_chu import ZcParams, precode, precoder

ESTIMATORS = ("ls", "dft-ce", "zcp-ls")
DETECTORS = ("periodogram", "fps-sft")


@dataclass(frozen=True)
class Scenario:
    waveform: WaveformConfig = field(default_factory=WaveformConfig)
    targets: tuple[RadarTarget, ...] = ()
    snr_db: float | None = 20.0
    amplitude_mode: str = "normalized"
    estimator: str = "ls"
    detector: str = "periodogram"
    max_targets: int | None = None
    zc_root: int = 1
    sft: SftConfig = field(default_factory=SftConfig)
    estimate_noise: bool = False

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.detector not in DETECTORS:
            raise ConfigError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        object.__setattr__(self, "targets", tuple(self.targets))

    def with_(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    @property
    def zc_params(self) -> ZcParams:
        return ZcParams.for_subcarriers(self.waveform.n_subcarriers, self.zc_root)


@dataclass
class TrialResult:
    detections: list[Detection]
    h_est: np.ndarray | None
    h_true: np.ndarray
    sigma2: float
    realization: ChannelRealization
    periodogram: np.ndarray | None = None
    mask: np.ndarray | None = None


def transmit_grid(scenario: Scenario, data: np.ndarray) -> np.ndarray:
    """Grid actually put on the subcarriers; Zadoff-Chu precoded for ``zcp-ls``."""
    if scenario.estimator == "zcp-ls":
        zm, _ = precoder(scenario.zc_params)
        return precode(data, zm)
    return data


def estimate_channel(kind: str, y: np.ndarray, tx: np.ndarray, n_cp: int) -> np.ndarray:
    h = spectral_division(y, tx)
    return dft_ce(h, n_cp) if kind == "dft-ce" else h


def run_trial(scenario: Scenario, seed: int, keep_grid: bool = True) -> TrialResult:
    """
    One frame through the channel and the configured estimator/detector.

    The frame and the channel (phases, noise) are drawn from independent
    streams of ``seed``, so every estimator sees the same data symbols and
    the same noise for a given seed.
    """
    cfg = scenario.waveform
    frame_seed, channel_seed = np.random.SeedSequence(seed).generate_state(2)
    data = random_frame(cfg, np.random.default_rng(frame_seed))
    tx = transmit_grid(scenario, data)
    y, real = apply_channel(tx, scenario.targets, cfg, scenario.snr_db, int(channel_seed), scenario.amplitude_mode)
    h_true = true_channel(real, cfg)

    if scenario.detector == "fps-sft":
        # per-cell variance of Y/X; the SFT applies no window
        sigma2 = division_noise_variance(real.noise_variance, tx)
        if scenario.estimator == "dft-ce":
            source = estimate_channel("dft-ce", y, tx, cfg.n_cp)
        else:
            source = DivisionSampler(y, tx)
        dets = sft_detect(source, cfg, sigma2, cfg.pfa, scenario.max_targets, scenario.sft)
        h_est = estimate_channel(scenario.estimator, y, tx, cfg.n_cp) if keep_grid else None
        return TrialResult(dets, h_est, h_true, sigma2, real)

    h_est = estimate_channel(scenario.estimator, y, tx, cfg.n_cp)
    shape = h_est.shape
    p = periodogram(h_est, cfg.window, cfg.n_prime, cfg.m_prime)
    if scenario.estimate_noise:
        # DFT-CE leaves noise only in the delay rows below the CP length
        rows = p[: cfg.n_cp * cfg.n_prime // cfg.n_subcarriers] if scenario.estimator == "dft-ce" else p
        sigma2 = estimate_noise_variance(rows, cfg.window, shape)
    else:
        weights = window_2d(cfg.window, *shape)
        sigma2 = division_noise_variance(real.noise_variance, tx, weights)
    mask = threshold(p, sigma2, cfg.pfa, cfg.window, shape)
    dets = extract_peaks(p, mask, cfg, scenario.max_targets)
    if not keep_grid:
        return TrialResult(dets, None, h_true, sigma2, real)
    return TrialResult(dets, h_est, h_true, sigma2, real, p, mask)
