"""
Windowed 2-D periodogram, Neyman-Pearson thresholding and peak extraction.

The periodogram has shape ``(N', M')``: rows are delay bins ``0..N'-1``,
columns are Doppler bins stored fft-shifted so that column ``c`` holds
Doppler bin ``c - M'//2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError
from .waveform import SPEED_OF_LIGHT, WaveformConfig


@dataclass(frozen=True)
class Detection:
    delay_bin: int
    doppler_bin: int
    peak_power: float
    range: float
    velocity: float

    @property
    def bins(self) -> tuple[int, int]:
        return self.delay_bin, self.doppler_bin


def hamming(n: int) -> np.ndarray:
    """Periodic (DFT-even) Hamming window; a single sample gets weight 1."""
    if n == 1:
        return np.ones(1)
    return 0.54 - 0.46 * np.cos(2 * np.pi * np.arange(n) / n)


def window_1d(kind: str, n: int) -> np.ndarray:
    if kind == "rectangular":
        return np.ones(n)
    if kind == "hamming":
        return hamming(n)
    raise ConfigError(f"unknown window {kind!r}")


def window_2d(kind: str, n: int, m: int) -> np.ndarray:
    return np.outer(window_1d(kind, n), window_1d(kind, m))


def window_power_ratio(kind: str, n: int, m: int) -> float:
    """``sum |w|^2 / (N M)``; the factor the noise floor is scaled by."""
    return float(np.mean(window_1d(kind, n) ** 2) * np.mean(window_1d(kind, m) ** 2))


def periodogram(
    h: np.ndarray, window: str = "rectangular", n_prime: int | None = None, m_prime: int | None = None
) -> np.ndarray:
    """
    ``P = |sum_k sum_l h w e^{-j2pi l s/M'} e^{+j2pi k r/N'}|^2 / (N M)``.

    DFT over symbols (Doppler, zero-padded to ``M'``), then unscaled inverse
    DFT over subcarriers (delay, zero-padded to ``N'``).
    """
    h = np.asarray(h)
    n, m = h.shape
    n_prime = n if n_prime is None else n_prime
    m_prime = m if m_prime is None else m_prime
    if n_prime < n or m_prime < m:
        raise ConfigError(f"n_prime/m_prime ({n_prime}, {m_prime}) must be >= ({n}, {m})")
    hw = h * window_2d(window, n, m) if window != "rectangular" else h
    # passing n= only when padding avoids an extra copy inside pocketfft
    spec = sfft.fft(hw, n=m_prime if m_prime != m else None, axis=1)
    spec = sfft.ifft(spec, n=n_prime if n_prime != n else None, axis=0, norm="forward", overwrite_x=True)
    p = np.square(spec.real)
    p += np.square(spec.imag)
    p *= 1.0 / (n * m)
    return sfft.fftshift(p, axes=1)


def detection_threshold(sigma2: float, pfa: float, window: str = "rectangular", shape=None) -> float:
    """
    Power level exceeded by a noise-only cell with probability ``pfa``.

    Noise cells are exponential with mean ``sigma2 * sum|w|^2 / (N M)``.
    """
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    if not 0 < pfa <= 1:
        raise ValueError("pfa must lie in (0, 1]")
    ratio = 1.0 if window == "rectangular" or shape is None else window_power_ratio(window, *shape)
    return -sigma2 * math.log(pfa) * ratio


def threshold(p: np.ndarray, sigma2: float, pfa: float, window: str = "rectangular", shape=None) -> np.ndarray:
    """Boolean detection mask ``P >= eta``; ``shape`` is the un-padded ``(N, M)``."""
    return np.asarray(p) >= detection_threshold(sigma2, pfa, window, shape)


def estimate_noise_variance(p: np.ndarray, window: str = "rectangular", shape=None) -> float:
    """
    Robust ``sigma^2`` from the median of the nonzero periodogram cells.

    Exponential cells have median ``mean * ln 2``; sparse target peaks barely
    move the median.
    """
    p = np.asarray(p)
    cells = p[p > 0]
    if cells.size == 0:
        return 0.0
    mean = float(np.median(cells)) / math.log(2)
    ratio = 1.0 if window == "rectangular" or shape is None else window_power_ratio(window, *shape)
    return mean / ratio


def bins_to_physics(delay_bin, doppler_bin, config: WaveformConfig) -> tuple[float, float]:
    c = SPEED_OF_LIGHT
    rng_m = c * delay_bin / (2 * config.n_prime * config.subcarrier_spacing)
    vel = c * doppler_bin / (2 * config.carrier * config.m_prime * config.symbol_time)
    return rng_m, vel


def extract_peaks(
    p: np.ndarray, mask: np.ndarray, config: WaveformConfig, max_targets: int | None = None
) -> list[Detection]:
    """
    Greedy local-maximum extraction on a shifted periodogram.

    Candidates are masked cells that beat all 8 circular neighbours under the
    total order (power, then smaller ``(delay, column)`` index), so plateaus
    yield exactly one peak.  Candidates are taken in descending power with a
    lexicographic tie-break and each one claims its 3x3 neighbourhood.
    """
    p = np.asarray(p)
    n, m = p.shape
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return []
    val = p[rows, cols]
    own = rows * m + cols
    is_max = np.ones(rows.size, dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            rr = (rows + dr) % n
            cc = (cols + dc) % m
            nb = p[rr, cc]
            nb_idx = rr * m + cc
            is_max &= (val > nb) | ((val == nb) & (own < nb_idx))
    rows, cols, val = rows[is_max], cols[is_max], val[is_max]
    order = np.lexsort((cols, rows, -val))
    claimed: set[tuple[int, int]] = set()
    out: list[Detection] = []
    half = m // 2
    for i in order:
        r, c = int(rows[i]), int(cols[i])
        if (r, c) in claimed:
            continue
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                claimed.add(((r + dr) % n, (c + dc) % m))
        s = c - half
        rng_m, vel = bins_to_physics(r, s, config)
        out.append(Detection(r, s, float(val[i]), rng_m, vel))
        if max_targets is not None and len(out) >= max_targets:
            break
    return out


def periodogram_detect(
    h: np.ndarray,
    config: WaveformConfig,
    sigma2: float | None,
    max_targets: int | None = None,
    window: str | None = None,
) -> tuple[list[Detection], np.ndarray, np.ndarray]:
    """
    Periodogram, threshold and peak extraction in one call.

    ``sigma2`` is the per-cell noise variance of ``h``; ``None`` estimates it
    from the periodogram median.  Returns ``(detections, P, mask)``.
    """
    window = config.window if window is None else window
    shape = np.shape(h)
    p = periodogram(h, window, config.n_prime, config.m_prime)
    if sigma2 is None:
        sigma2 = estimate_noise_variance(p, window, shape)
    mask = threshold(p, sigma2, config.pfa, window, shape)
    return extract_peaks(p, mask, config, max_targets), p, mask


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def power_db(p: np.ndarray, floor_db: float = -300.0) -> np.ndarray:
    with np.errstate(divide="ignore"):
        out = 10 * np.log10(p)
    return np.maximum(out, floor_db)


def write_map_csv(path, p: np.ndarray) -> None:
    """``delay_bin,doppler_bin,power_db`` for every cell, delay-major."""
    p = np.asarray(p)
    n, m = p.shape
    dl, dp = np.meshgrid(np.arange(n), np.arange(m) - m // 2, indexing="ij")
    db = power_db(p)
    with open(path, "w", newline="") as fh:
        fh.write("delay_bin,doppler_bin,power_db\n")
        lines = [
            f"{a},{b},{c:.6f}\n" for a, b, c in zip(dl.ravel().tolist(), dp.ravel().tolist(), db.ravel().tolist())
        ]
        fh.writelines(lines)


def write_pgm(path, p: np.ndarray, dynamic_range_db: float = 60.0) -> None:
    """8-bit binary PGM, rows = delay bins, columns = shifted Doppler bins."""
    db = power_db(np.asarray(p))
    top = float(db.max())
    scaled = np.clip((db - (top - dynamic_range_db)) / dynamic_range_db, 0.0, 1.0)
    img = np.round(scaled * 255).astype(np.uint8)
    rows, cols = img.shape
    Path(path).write_bytes(f"P5\n{cols} {rows}\n255\n".encode("ascii") + img.tobytes())
