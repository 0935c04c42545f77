"""
Multi-target delay/Doppler radar channel in the frequency domain.

Each target contributes ``g * X[k, l] * exp(-j2pi k df tau) *
exp(j2pi l Ts fD) * exp(j phi)`` to the received grid.  The intra-symbol
Doppler term and the time-scaling factor are neglected, which is only
valid inside the bounds enforced by :func:`validate_target`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ModelValidityError
from .waveform import SPEED_OF_LIGHT, WaveformConfig, resolutions

AMPLITUDE_MODES = ("normalized", "friis")

# |v| <= DOPPLER_MARGIN * c*df/(2 fc) keeps Doppler ICI ~20 dB below the signal
DOPPLER_MARGIN = 0.1


@dataclass(frozen=True)
class RadarTarget:
    range: float
    velocity: float = 0.0
    rcs: float = 1.0
    phase: float | None = None


@dataclass(frozen=True)
class ChannelRealization:
    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray
    phases: np.ndarray
    time_scales: np.ndarray
    noise_variance: float
    seed: int | None
    amplitude_mode: str = "normalized"

    @property
    def n_targets(self) -> int:
        return len(self.gains)


def validate_target(target: RadarTarget, config: WaveformConfig) -> None:
    res = resolutions(config)
    if not target.range > 0:
        raise ModelValidityError(f"target range must be positive, got {target.range} m")
    if target.range > res.max_range_cp * (1 + 1e-12):
        raise ModelValidityError(
            f"target at {target.range} m exceeds the cyclic-prefix range limit "
            f"{res.max_range_cp:.2f} m"
        )
    vmax = DOPPLER_MARGIN * res.max_velocity_bound
    if abs(target.velocity) > vmax * (1 + 1e-12):
        raise ModelValidityError(
            f"target velocity {target.velocity} m/s exceeds {vmax:.2f} m/s "
            f"({DOPPLER_MARGIN} x subcarrier-spacing Doppler bound)"
        )
    if target.rcs <= 0:
        raise ModelValidityError(f"rcs must be positive, got {target.rcs}")


def derive_params(target: RadarTarget, config: WaveformConfig) -> tuple[float, float, float]:
    """Friis attenuation, round-trip delay and Doppler shift of one target."""
    if not target.range > 0:
        raise ModelValidityError("target range must be positive")
    c, fc, d = SPEED_OF_LIGHT, config.carrier, target.range
    g = math.sqrt(c * target.rcs / ((4 * math.pi) ** 3 * d**4 * fc**2))
    tau = 2 * d / c
    f_d = 2 * target.velocity * fc / c
    return g, tau, f_d


def noise_variance_for_snr(snr_db: float | None, gains, mean_power: float) -> float:
    """
    ``sigma^2`` such that ``sum(g^2) * E|X|^2 / sigma^2`` equals the SNR.

    With no targets the reference power is taken as ``E|X|^2`` (unit gain).
    """
    if snr_db is None or math.isinf(snr_db):
        return 0.0
    gains = np.asarray(gains, dtype=float)
    ref = float(np.sum(gains**2)) if gains.size else 1.0
    return ref * mean_power / 10 ** (snr_db / 10)


def make_realization(
    targets,
    config: WaveformConfig,
    snr_db: float | None,
    seed: int | None,
    amplitude_mode: str = "normalized",
    mean_power: float = 1.0,
    rng: np.random.Generator | None = None,
) -> ChannelRealization:
    if amplitude_mode not in AMPLITUDE_MODES:
        raise ConfigError(f"amplitude_mode must be one of {AMPLITUDE_MODES}")
    rng = np.random.default_rng(seed) if rng is None else rng
    gains, delays, dopplers, phases, scales = [], [], [], [], []
    for t in targets:
        validate_target(t, config)
        g, tau, f_d = derive_params(t, config)
        gains.append(1.0 if amplitude_mode == "normalized" else g)
        delays.append(tau)
        dopplers.append(f_d)
        phases.append(rng.uniform(0, 2 * np.pi) if t.phase is None else t.phase)
        scales.append(2 * t.velocity / SPEED_OF_LIGHT)
    return ChannelRealization(
        gains=np.array(gains, dtype=float),
        delays=np.array(delays, dtype=float),
        dopplers=np.array(dopplers, dtype=float),
        phases=np.array(phases, dtype=float),
        time_scales=np.array(scales, dtype=float),
        noise_variance=noise_variance_for_snr(snr_db, gains, mean_power),
        seed=seed,
        amplitude_mode=amplitude_mode,
    )


def true_channel(realization: ChannelRealization, config: WaveformConfig) -> np.ndarray:
    """Noise-free frequency-domain channel grid, shape ``(N, M)``."""
    k = np.arange(config.n_subcarriers)
    l = np.arange(config.n_symbols)
    h = np.zeros((config.n_subcarriers, config.n_symbols), dtype=complex)
    df, ts = config.subcarrier_spacing, config.symbol_time
    # fixed target order keeps the sum bit-reproducible
    for g, tau, f_d, phi in zip(
        realization.gains, realization.delays, realization.dopplers, realization.phases
    ):
        delay_col = np.exp(-2j * np.pi * k * df * tau)
        doppler_row = np.exp(2j * np.pi * (l * ts * f_d) + 1j * phi)
        h += g * np.outer(delay_col, doppler_row)
    return h


def complex_noise(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    if variance == 0:
        return np.zeros(shape, dtype=complex)
    std = math.sqrt(variance / 2)
    return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(
    grid: np.ndarray,
    targets,
    config: WaveformConfig,
    snr_db: float | None,
    seed: int | None,
    amplitude_mode: str = "normalized",
) -> tuple[np.ndarray, ChannelRealization]:
    """
    Received grid ``Y = X * H_true + Z`` and the realization that produced it.

    Target phases are drawn first, then the noise, both from ``seed``.
    ``snr_db=None`` disables the noise.
    """
    grid = np.asarray(grid)
    if grid.shape != (config.n_subcarriers, config.n_symbols):
        raise ValueError(f"grid shape {grid.shape} does not match config")
    rng = np.random.default_rng(seed)
    mean_power = float(np.mean(np.abs(grid) ** 2))
    real = make_realization(targets, config, snr_db, seed, amplitude_mode, mean_power, rng=rng)
    y = grid * true_channel(real, config)
    y += complex_noise(rng, grid.shape, real.noise_variance)
    return y, real
