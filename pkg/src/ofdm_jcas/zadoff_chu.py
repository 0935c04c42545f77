"""
Zadoff-Chu sequences, the square Zadoff-Chu precoding matrix and a
memoryless high-power-amplifier model.

The precoder is an ``N x N`` matrix obtained by reshaping a length ``N**2``
sequence row by row, applied to every OFDM symbol (grid column) before the
inverse DFT.  For a root coprime to the length the matrix is ``sqrt(N)``
times a unitary matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ZcParams:
    length: int
    root: int = 1
    offset: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ConfigError(f"Zadoff-Chu length must be positive, got {self.length}")
        if math.gcd(self.root, self.length) != 1:
            raise ConfigError(f"root {self.root} is not coprime to length {self.length}")

    @property
    def side(self) -> int:
        d = math.isqrt(self.length)
        if d * d != self.length:
            raise ConfigError(f"length {self.length} is not a perfect square")
        return d

    @classmethod
    def for_subcarriers(cls, n_subcarriers: int, root: int = 1, offset: int = 0) -> "ZcParams":
        """Parameters whose matrix precodes an ``n_subcarriers`` OFDM symbol."""
        return cls(n_subcarriers * n_subcarriers, root, offset)


def zc_sequence(params: ZcParams) -> np.ndarray:
    L, r, q = params.length, params.root, params.offset
    k = np.arange(L, dtype=np.int64)
    # exact integer phase, reduced before the root multiply to stay in int64
    if L % 2 == 0:
        # exp(j*pi*r*(k^2 + 2qk)/L)
        num = (k * k + 2 * q * k) % (2 * L)
        num = (num * (r % (2 * L))) % (2 * L)
        return np.exp(1j * np.pi * num / L)
    num = (k * (k + 1) // 2 + q * k) % L
    num = (num * (r % L)) % L
    return np.exp(2j * np.pi * num / L)


def zc_matrix(params: ZcParams) -> np.ndarray:
    """Row-major ``D x D`` reshape of the sequence, ``D = sqrt(L)``."""
    d = params.side
    return zc_sequence(params).reshape(d, d)


@lru_cache(maxsize=8)
def _cached_pair(params: ZcParams) -> tuple[np.ndarray, np.ndarray]:
    zm = zc_matrix(params)
    inv = np.linalg.inv(zm)
    zm.setflags(write=False)
    inv.setflags(write=False)
    return zm, inv


def precoder(params: ZcParams) -> tuple[np.ndarray, np.ndarray]:
    """Cached, read-only ``(Z_m, Z_m^-1)`` pair."""
    return _cached_pair(params)


def _check_shape(grid: np.ndarray, zm: np.ndarray) -> None:
    if grid.ndim != 2:
        raise ValueError("grid must be 2-D (subcarrier x symbol)")
    if zm.shape[0] != grid.shape[0]:
        raise ConfigError(
            f"precoder side {zm.shape[0]} does not match N={grid.shape[0]}; "
            f"use a Zadoff-Chu length of N**2={grid.shape[0] ** 2}"
        )


def precode(grid: np.ndarray, zm: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid)
    _check_shape(grid, zm)
    return zm @ grid


def deprecode(grid: np.ndarray, zm_inv: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid)
    _check_shape(grid, zm_inv)
    return zm_inv @ grid


def noise_amplification(zm_inv: np.ndarray) -> float:
    """Spectral norm of the inverse precoder."""
    return float(np.linalg.norm(zm_inv, 2))


def hpa(stream, q: float = 2.0, mean_mod: float | None = None) -> np.ndarray:
    """
    AM/AM compression ``|x| / sqrt(1 + (|x| / (mean_mod * 10**(q/10)))**2)``.

    Phase is left untouched.  ``mean_mod`` defaults to the mean modulus of
    the stream being amplified.
    """
    x = np.asarray(stream, dtype=complex)
    if x.size == 0:
        return x.copy()
    if mean_mod is None:
        mean_mod = float(np.mean(np.abs(x)))
    if mean_mod <= 0:
        raise ValueError("mean modulus must be positive")
    sat = mean_mod * 10 ** (q / 10)
    return x / np.sqrt(1 + (np.abs(x) / sat) ** 2)
