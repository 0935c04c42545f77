"""
Experiment metrics and Monte-Carlo sweeps.

Every sweep derives one seed per trial from ``(seed, trial)`` and reuses it
for all estimators, so estimator comparisons are paired (common random
numbers) and rerunning with the same arguments reproduces the numbers
bit for bit.
"""

from __future__ import annotations

import dataclasses
import math
import statistics
import time
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.optimize import linear_sum_assignment

from .channel import RadarTarget, apply_channel, complex_noise, true_channel
from .detection import (
    bins_to_physics,
    detection_threshold,
    periodogram,
    periodogram_detect,
    window_2d,
)
from .errors import ConfigError
from .estimation import channel_mse, division_noise_variance
from .pipeline import Scenario, estimate_channel, run_trial, transmit_grid
from .sft import SftConfig, sft_detect
from .waveform import WaveformConfig, random_frame, random_qam, resolutions
from .zadoff_chu import ZcParams, hpa, precoder


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, dtype=np.uint64)[0])


def papr(stream) -> float:
    """``10 log10(max|x|^2 / mean|x|^2)`` in dB."""
    x = np.asarray(stream)
    p = np.abs(x) ** 2
    mean = float(np.mean(p)) if p.size else 0.0
    if mean == 0:
        raise ValueError("PAPR of an all-zero stream is undefined")
    return 10 * math.log10(float(np.max(p)) / mean)


# ---------------------------------------------------------------------------
# Target matching and RMSE
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchResult:
    range_errors: np.ndarray  # one entry per truth, penalty for misses
    velocity_errors: np.ndarray
    misses: int

    @property
    def n_truth(self) -> int:
        return len(self.range_errors)


def match_detections(
    truth, detections, config: WaveformConfig, gate: float = 5.0
) -> MatchResult:
    """
    Optimal one-to-one assignment of detections to true targets.

    Distances are measured in resolution cells.  Pairs further than ``gate``
    cells apart count as misses.  A missed target contributes the
    cyclic-prefix range limit and half the unambiguous velocity as errors.
    """
    res = resolutions(config)
    miss_r, miss_v = res.max_range_cp, res.unambiguous_velocity / 2
    tr = np.array([[t.range, t.velocity] for t in truth], dtype=float).reshape(-1, 2)
    de = np.array([[d.range, d.velocity] for d in detections], dtype=float).reshape(-1, 2)
    err_r = np.full(len(tr), miss_r)
    err_v = np.full(len(tr), miss_v)
    if len(tr) and len(de):
        scale = np.array([res.range_resolution, res.velocity_resolution])
        diff = (tr[:, None, :] - de[None, :, :]) / scale
        cost = np.hypot(diff[..., 0], diff[..., 1])
        rows, cols = linear_sum_assignment(cost)
        keep = cost[rows, cols] <= gate
        rows, cols = rows[keep], cols[keep]
        err_r[rows] = np.abs(tr[rows, 0] - de[cols, 0])
        err_v[rows] = np.abs(tr[rows, 1] - de[cols, 1])
        misses = len(tr) - len(rows)
    else:
        misses = len(tr)
    return MatchResult(err_r, err_v, misses)


@dataclass(frozen=True)
class RmseRow:
    snr_db: float
    estimator: str
    range_rmse_m: float
    velocity_rmse_mps: float
    miss_rate: float
    trials: int


def rmse_sweep(
    scenario: Scenario, estimators, snr_grid, trials: int, seed: int
) -> list[RmseRow]:
    """
    Range/velocity RMSE against SNR for each estimator.

    RMSE is taken over all (target, trial) pairs with misses penalized as
    in :func:`match_detections`.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = []
    for snr in snr_grid:
        for est in estimators:
            sc = scenario.with_(estimator=est, snr_db=snr)
            er, ev, misses, total = [], [], 0, 0
            for t in range(trials):
                res = run_trial(sc, trial_seed(seed, t), keep_grid=False)
                m = match_detections(sc.targets, res.detections, sc.waveform)
                er.append(m.range_errors)
                ev.append(m.velocity_errors)
                misses += m.misses
                total += m.n_truth
            er, ev = np.concatenate(er), np.concatenate(ev)
            rows.append(
                RmseRow(
                    math.inf if snr is None else float(snr),
                    est,
                    float(np.sqrt(np.mean(er**2))) if er.size else 0.0,
                    float(np.sqrt(np.mean(ev**2))) if ev.size else 0.0,
                    misses / total if total else 0.0,
                    trials,
                )
            )
    return rows


@dataclass(frozen=True)
class MseRow:
    snr_db: float
    estimator: str
    channel_mse: float


def mse_sweep(scenario: Scenario, estimators, snr_grid, trials: int, seed: int) -> list[MseRow]:
    """Mean channel-estimate MSE per SNR point; trials share data and noise across estimators."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cfg = scenario.waveform
    rows = []
    for snr in snr_grid:
        acc = {est: 0.0 for est in estimators}
        for t in range(trials):
            s = trial_seed(seed, t)
            frame_seed, channel_seed = np.random.SeedSequence(s).generate_state(2)
            data = random_frame(cfg, np.random.default_rng(frame_seed))
            for est in estimators:
                sc = scenario.with_(estimator=est, snr_db=snr)
                tx = transmit_grid(sc, data)
                y, real = apply_channel(tx, sc.targets, cfg, snr, int(channel_seed), sc.amplitude_mode)
                acc[est] += channel_mse(estimate_channel(est, y, tx, cfg.n_cp), true_channel(real, cfg))
        snr_key = math.inf if snr is None else float(snr)
        rows.extend(MseRow(snr_key, est, acc[est] / trials) for est in estimators)
    return rows


# ---------------------------------------------------------------------------
# Spectrum of one modulated subcarrier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumResult:
    freq_hz: np.ndarray
    power_db: np.ndarray
    out_of_band: float  # linear out-of-band / in-band power ratio
    variant: str


def symbol_spectrum(
    n_subcarriers: int = 128,
    bandwidth: float = 20e6,
    precoding: bool = False,
    hpa_on: bool = False,
    q: float = 2.0,
    frames: int = 100,
    oversample: int = 8,
    qam_order: int = 16,
    seed: int = 0,
    subcarrier: int | None = None,
) -> SpectrumResult:
    """
    Averaged power spectrum of one OFDM symbol around a tagged subcarrier.

    Each frame draws a random QAM symbol on every subcarrier; optionally
    precodes it with the Zadoff-Chu matrix, synthesizes ``oversample`` times
    oversampled time samples (occupied band centered at DC), and passes
    them through the amplifier model.  ``subcarrier`` restricts the
    transmitted symbol to that single subcarrier (before precoding).
    Out-of-band power is everything outside the union of the occupied
    subcarriers' ``[-df/2, df/2)`` bands.
    """
    n, os_ = n_subcarriers, oversample
    if frames < 1 or n < 1 or os_ < 1:
        raise ValueError("frames, n_subcarriers and oversample must be >= 1")
    df = bandwidth / n
    size = n * os_
    rng = np.random.default_rng(seed)
    zm = precoder(ZcParams.for_subcarriers(n))[0] if precoding else None
    acc = np.zeros(size)
    # occupied subcarriers -n/2..n/2-1 sit on consecutive bins of a wider FFT
    bins = (np.arange(n) - n // 2) % size
    for _ in range(frames):
        sym = random_qam(rng, n, qam_order)
        if subcarrier is not None:
            keep = np.zeros(n, dtype=complex)
            keep[subcarrier] = sym[subcarrier]
            sym = keep
        if zm is not None:
            sym = zm @ sym
        grid = np.zeros(size, dtype=complex)
        grid[bins] = sym
        x = sfft.ifft(grid)
        if hpa_on:
            x = hpa(x, q)
        spec = sfft.fft(x)
        acc += spec.real**2 + spec.imag**2
    if not np.any(acc > 0):
        raise ValueError("spectrum of a zero signal is undefined")
    acc = sfft.fftshift(acc)
    freq = (np.arange(size) - size // 2) * df
    # union of the per-subcarrier bands [k df - df/2, k df + df/2)
    edge = freq + df / 2
    inband = (edge >= -bandwidth / 2) & (edge < bandwidth / 2)
    oob = float(acc[~inband].sum() / acc[inband].sum())
    db = 10 * np.log10(np.maximum(acc / acc.max(), 1e-30))
    variant = ("zcp" if precoding else "ofdm") + ("+hpa" if hpa_on else "")
    return SpectrumResult(freq, db, oob, variant)


# ---------------------------------------------------------------------------
# Timing benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    n: int
    m: int
    k: int
    periodogram_ms: float
    sft_ms: float
    speedup: float
    samples_used: int


def bench_targets(config: WaveformConfig, k: int, rng: np.random.Generator) -> list[RadarTarget]:
    """
    ``k`` on-grid targets inside the model bounds.

    Delay and Doppler bins are drawn without replacement from every third
    bin so no two targets share a 3x3 periodogram neighbourhood.
    """
    res = resolutions(config)
    max_delay = int(res.max_range_cp / res.range_resolution)
    max_dopp = int(0.1 * res.max_velocity_bound / res.velocity_resolution)
    delay_pool = np.arange(1, max_delay + 1, 3)
    dopp_pool = np.arange(-max_dopp, max_dopp + 1, 3)
    if delay_pool.size < k or dopp_pool.size < k:
        raise ConfigError("grid too small for the requested number of targets")
    delays = rng.choice(delay_pool, size=k, replace=False)
    dopps = rng.choice(dopp_pool, size=k, replace=False)
    cfg = _dense(config)
    return [RadarTarget(*bins_to_physics(int(r), int(s), cfg)) for r, s in zip(delays, dopps)]


def _dense(config: WaveformConfig) -> WaveformConfig:
    return dataclasses.replace(config, n_prime=config.n_subcarriers, m_prime=config.n_symbols)


def _paired_median_ms(fa, fb, repeats: int, min_time: float = 0.5):
    """
    Median call times of two functions timed in alternation.

    Alternating keeps slow drifts in machine load from favouring either
    side.  Runs at least ``repeats`` pairs and ``min_time`` seconds.
    """
    out_a, out_b = fa(), fb()  # warm-up
    ta, tb = [], []
    while len(ta) < repeats or sum(ta) + sum(tb) < min_time:
        t0 = time.perf_counter()
        out_a = fa()
        t1 = time.perf_counter()
        out_b = fb()
        t2 = time.perf_counter()
        ta.append(t1 - t0)
        tb.append(t2 - t1)
    return statistics.median(ta) * 1e3, out_a, statistics.median(tb) * 1e3, out_b


def bench_estimators(
    sizes,
    k: int = 5,
    repeats: int = 5,
    n_symbols: int = 200,
    bandwidth: float = 60e6,
    snr_db: float = 20.0,
    seed: int = 0,
    sft: SftConfig | None = None,
) -> list[BenchRow]:
    """
    Wall-clock comparison of periodogram and FPS-SFT detection.

    Both detectors receive the same least-squares channel grid and noise
    variance; timing covers detection only.  Raises ``RuntimeError`` when
    the two support sets differ.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = []
    for i, n in enumerate(sizes):
        cfg = WaveformConfig(n_subcarriers=n, n_symbols=n_symbols, subcarrier_spacing=bandwidth / n)
        rng = np.random.default_rng([seed, i])
        targets = bench_targets(cfg, k, rng)
        x = random_frame(cfg, rng)
        y, real = apply_channel(x, targets, cfg, snr_db, int(rng.integers(2**32)))
        h = y / x
        w = window_2d(cfg.window, n, n_symbols)
        sigma2_w = division_noise_variance(real.noise_variance, x, w)
        sigma2 = division_noise_variance(real.noise_variance, x)
        t_p, dets_p, t_s, (dets_s, spec) = _paired_median_ms(
            lambda: periodogram_detect(h, cfg, sigma2_w, k)[0],
            lambda: sft_detect(h, cfg, sigma2, cfg.pfa, k, sft, return_spectrum=True),
            repeats,
        )
        sup_p = {d.bins for d in dets_p}
        sup_s = {d.bins for d in dets_s}
        if sup_p != sup_s:
            raise RuntimeError(f"support mismatch at N={n}: periodogram {sorted(sup_p)} vs sft {sorted(sup_s)}")
        rows.append(BenchRow(n, n_symbols, k, t_p, t_s, t_p / t_s, spec.samples_used))
    return rows


# ---------------------------------------------------------------------------
# False-alarm calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationRow:
    window: str
    pfa: float
    cells: int
    exceedances: int
    rate: float
    lower: float
    upper: float

    @property
    def within(self) -> bool:
        return self.lower <= self.rate <= self.upper


def calibrate_pfa(
    n: int = 256,
    m: int = 256,
    pfa: float = 1e-2,
    min_cells: int = 1_000_000,
    windows=("rectangular", "hamming"),
    sigma2: float = 1.0,
    seed: int = 0,
) -> list[CalibrationRow]:
    """
    Per-cell threshold exceedance rate on noise-only grids.

    Unit-variance complex Gaussian grids are pushed through the periodogram
    until at least ``min_cells`` cells are tested; the band is the
    three-sigma binomial interval around ``pfa``.
    """
    frames = -(-min_cells // (n * m))
    rows = []
    for wi, window in enumerate(windows):
        rng = np.random.default_rng([seed, wi])
        eta = detection_threshold(sigma2, pfa, window, (n, m))
        hits = 0
        for _ in range(frames):
            p = periodogram(complex_noise(rng, (n, m), sigma2), window)
            hits += int(np.count_nonzero(p >= eta))
        cells = frames * n * m
        half = 3 * math.sqrt(pfa * (1 - pfa) / cells)
        rows.append(CalibrationRow(window, pfa, cells, hits, hits / cells, pfa - half, pfa + half))
    return rows
