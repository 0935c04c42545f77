"""
OFDM frame construction, (de)modulation and radar numerology.

Grids are plain ``numpy`` arrays of shape ``(N, M)``: rows index
subcarriers (or delay bins after a transform along axis 0), columns index
OFDM symbols (or Doppler bins).  The transform pair is the numpy default,
forward DFT unscaled and inverse DFT scaled by ``1/N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

SPEED_OF_LIGHT = 3e8  # m/s, value used throughout the reference parameter set

QAM_ORDERS = (4, 16, 64, 256)
WINDOWS = ("rectangular", "hamming")


@dataclass(frozen=True)
class WaveformConfig:
    """
    OFDM numerology together with the radar-side processing parameters.

    Attributes
    ----------
    n_subcarriers : int
        Number of subcarriers ``N``.
    n_symbols : int
        Number of OFDM symbols per frame ``M``.
    subcarrier_spacing : float
        Subcarrier spacing in Hz.
    carrier : float
        Carrier frequency in Hz.
    n_cp : int
        Cyclic prefix length in samples.  ``None`` derives it from
        ``cp_fraction``.
    qam_order : int
        Square QAM constellation size.
    n_prime, m_prime : int
        Periodogram sizes along delay and Doppler (``None`` means ``N``/``M``).
    window : str
        ``"rectangular"`` or ``"hamming"``.
    pfa : float
        Desired per-cell false-alarm probability.
    """

    n_subcarriers: int = 2048
    n_symbols: int = 560
    subcarrier_spacing: float = 240e3
    carrier: float = 77e9
    n_cp: int | None = None
    qam_order: int = 16
    n_prime: int | None = None
    m_prime: int | None = None
    window: str = "hamming"
    pfa: float = 1e-2
    cp_fraction: float = field(default=0.25, repr=False)

    def __post_init__(self):
        if self.n_cp is None:
            object.__setattr__(self, "n_cp", int(round(self.cp_fraction * self.n_subcarriers)))
        if self.n_prime is None:
            object.__setattr__(self, "n_prime", self.n_subcarriers)
        if self.m_prime is None:
            object.__setattr__(self, "m_prime", self.n_symbols)
        if self.n_subcarriers < 1 or self.n_symbols < 1:
            raise ConfigError("n_subcarriers and n_symbols must be positive")
        if not 0 <= self.n_cp < self.n_subcarriers:
            raise ConfigError(f"n_cp={self.n_cp} must satisfy 0 <= n_cp < N={self.n_subcarriers}")
        if self.qam_order not in QAM_ORDERS:
            raise ConfigError(f"qam_order must be one of {QAM_ORDERS}, got {self.qam_order}")
        if self.n_prime < self.n_subcarriers or self.m_prime < self.n_symbols:
            raise ConfigError("n_prime/m_prime must be >= N/M")
        if self.window not in WINDOWS:
            raise ConfigError(f"window must be one of {WINDOWS}, got {self.window!r}")
        if not 0 < self.pfa <= 1:
            raise ConfigError(f"pfa must lie in (0, 1], got {self.pfa}")
        if self.subcarrier_spacing <= 0 or self.carrier <= 0:
            raise ConfigError("subcarrier_spacing and carrier must be positive")

    @classmethod
    def table1(cls, **overrides) -> "WaveformConfig":
        """Reference 77 GHz parameter set (N=2048, M=560, 240 kHz, 25 % CP)."""
        return cls(**overrides)

    @property
    def useful_time(self) -> float:
        return 1.0 / self.subcarrier_spacing

    @property
    def sample_time(self) -> float:
        return self.useful_time / self.n_subcarriers

    @property
    def cp_time(self) -> float:
        return self.n_cp * self.sample_time

    @property
    def symbol_time(self) -> float:
        return self.useful_time + self.cp_time

    @property
    def samples_per_symbol(self) -> int:
        return self.n_subcarriers + self.n_cp

    @property
    def bandwidth(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.qam_order))


@dataclass(frozen=True)
class Resolutions:
    range_resolution: float
    velocity_resolution: float
    unambiguous_range: float
    unambiguous_velocity: float
    max_range_cp: float
    max_velocity_bound: float

    def as_dict(self) -> dict[str, float]:
        return {
            "range_resolution_m": self.range_resolution,
            "velocity_resolution_mps": self.velocity_resolution,
            "unambiguous_range_m": self.unambiguous_range,
            "unambiguous_velocity_mps": self.unambiguous_velocity,
            "max_range_cp_m": self.max_range_cp,
            "max_velocity_bound_mps": self.max_velocity_bound,
        }


def resolutions(config: WaveformConfig) -> Resolutions:
    """Range/velocity resolution, ambiguity limits and model-validity bounds."""
    c = SPEED_OF_LIGHT
    df, fc, ts = config.subcarrier_spacing, config.carrier, config.symbol_time
    return Resolutions(
        range_resolution=c / (2 * config.n_subcarriers * df),
        velocity_resolution=c / (2 * config.n_symbols * fc * ts),
        unambiguous_range=c / (2 * df),
        unambiguous_velocity=c / (2 * fc * ts),
        max_range_cp=c * config.cp_time / 2,
        max_velocity_bound=c * df / (2 * fc),
    )


# ---------------------------------------------------------------------------
# QAM
# ---------------------------------------------------------------------------


def _gray_to_binary(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    shift = g >> 1
    while np.any(shift):
        b ^= shift
        shift >>= 1
    return b


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return bits @ weights


def map_qam(bits, order: int) -> np.ndarray:
    """
    Gray-mapped square QAM with unit average power.

    The first half of each ``log2(order)`` bit word selects the in-phase
    level, the second half the quadrature level.  A zero bit pattern maps
    to the ``(+, +)`` corner, so for QPSK ``00 -> (1 + 1j) / sqrt(2)``.
    """
    if order not in QAM_ORDERS:
        raise ConfigError(f"qam order must be one of {QAM_ORDERS}, got {order}")
    bits = np.asarray(bits, dtype=np.int64).ravel()
    k = int(math.log2(order))
    if bits.size % k:
        raise ValueError(f"bit length {bits.size} is not divisible by log2({order})={k}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    words = bits.reshape(-1, k)
    half = k // 2
    side = 1 << half
    i_idx = _gray_to_binary(_bits_to_int(words[:, :half]))
    q_idx = _gray_to_binary(_bits_to_int(words[:, half:]))
    levels = (side - 1) - 2 * np.arange(side)
    scale = math.sqrt(2 * (order - 1) / 3)
    return (levels[i_idx] + 1j * levels[q_idx]) / scale


def random_qam(rng: np.random.Generator, count: int, order: int) -> np.ndarray:
    bits = rng.integers(0, 2, size=count * int(math.log2(order)))
    return map_qam(bits, order)


def random_pilots(rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit-modulus pseudo-random QPSK pilot row."""
    return random_qam(rng, n, 4)


def build_frame(config: WaveformConfig, payload, pilots) -> np.ndarray:
    """
    Assemble the transmitted grid ``X`` of shape ``(N, M)``.

    Column 0 holds the pilot row, columns ``1..M-1`` hold the payload.  A
    flat payload is laid out symbol by symbol.  Zero entries are rejected
    because the radar divides by every grid entry.
    """
    n, m = config.n_subcarriers, config.n_symbols
    pilots = np.asarray(pilots, dtype=complex).ravel()
    payload = np.asarray(payload, dtype=complex)
    if pilots.size != n:
        raise ValueError(f"pilot row must have {n} entries, got {pilots.size}")
    if payload.ndim == 1:
        if payload.size != n * (m - 1):
            raise ValueError(f"payload must have {n * (m - 1)} symbols, got {payload.size}")
        payload = payload.reshape(n, m - 1, order="F")
    elif payload.shape != (n, m - 1):
        raise ValueError(f"payload must have shape {(n, m - 1)}, got {payload.shape}")
    grid = np.empty((n, m), dtype=complex)
    grid[:, 0] = pilots
    grid[:, 1:] = payload
    if np.any(grid == 0):
        raise ValueError("frame contains zero-valued symbols; spectral division would be singular")
    return grid


def random_frame(config: WaveformConfig, rng: np.random.Generator) -> np.ndarray:
    """Pilot row plus seeded random QAM payload."""
    n, m = config.n_subcarriers, config.n_symbols
    pilots = random_pilots(rng, n)
    payload = random_qam(rng, n * (m - 1), config.qam_order)
    return build_frame(config, payload, pilots)


# ---------------------------------------------------------------------------
# Modulation
# ---------------------------------------------------------------------------


def ofdm_modulate(grid: np.ndarray, n_cp: int) -> np.ndarray:
    """Per-symbol inverse DFT with cyclic prefix; returns ``M * (N + n_cp)`` samples."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("grid must be 2-D (subcarrier x symbol)")
    n = grid.shape[0]
    if not 0 <= n_cp < n:
        raise ValueError(f"n_cp={n_cp} must satisfy 0 <= n_cp < N={n}")
    body = np.fft.ifft(grid, axis=0)
    framed = np.concatenate([body[n - n_cp:], body], axis=0)
    return framed.T.ravel()


def ofdm_demodulate(stream: np.ndarray, config: WaveformConfig) -> np.ndarray:
    """Strip the cyclic prefix and apply the forward DFT per symbol."""
    stream = np.asarray(stream)
    ns, m = config.samples_per_symbol, config.n_symbols
    if stream.ndim != 1 or stream.size != m * ns:
        raise ValueError(f"stream must have M*Ns={m * ns} samples, got shape {stream.shape}")
    blocks = stream.reshape(m, ns)[:, config.n_cp:]
    return np.fft.fft(blocks, axis=1).T
