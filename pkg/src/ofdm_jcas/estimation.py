"""Least-squares (spectral division) and DFT-based channel estimation."""

from __future__ import annotations

import numpy as np


def spectral_division(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Elementwise ``Y / X``, the least-squares channel estimate."""
    y, x = np.asarray(y), np.asarray(x)
    if y.shape != x.shape:
        raise ValueError(f"shape mismatch: Y{y.shape} vs X{x.shape}")
    if np.any(x == 0):
        raise ZeroDivisionError("transmitted grid has zero entries")
    return y / x


def dft_ce(h: np.ndarray, n_cp: int) -> np.ndarray:
    """
    Keep only the first ``n_cp`` taps of each symbol's impulse response.

    Inverse DFT along the subcarrier axis (scaled by 1/N), zero taps
    ``n >= n_cp``, forward DFT back.  Without truncation the round trip is
    the identity.
    """
    h = np.asarray(h)
    n = h.shape[0]
    if not 0 <= n_cp <= n:
        raise ValueError(f"n_cp={n_cp} must lie in [0, {n}]")
    taps = np.fft.ifft(h, axis=0)
    taps[n_cp:] = 0
    return np.fft.fft(taps, axis=0)


def channel_mse(h_est: np.ndarray, h_true: np.ndarray) -> float:
    h_est, h_true = np.asarray(h_est), np.asarray(h_true)
    if h_est.shape != h_true.shape:
        raise ValueError("shape mismatch")
    return float(np.mean(np.abs(h_est - h_true) ** 2))


def division_noise_variance(sigma2: float, x: np.ndarray, weights: np.ndarray | None = None) -> float:
    """
    Per-cell noise variance of ``Z / X`` seen by a weighted linear statistic.

    For unit-modulus ``X`` this is ``sigma2``.  For other constellations each
    cell's noise is scaled by ``1/|X|^2``; the window-weighted mean of that
    factor is what a periodogram cell actually accumulates.
    """
    inv = 1.0 / np.abs(np.asarray(x)) ** 2
    if weights is None:
        return float(sigma2 * np.mean(inv))
    w2 = np.abs(weights) ** 2
    return float(sigma2 * np.sum(w2 * inv) / np.sum(w2))
