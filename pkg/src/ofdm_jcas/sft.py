"""
Fourier projection-slice sparse FFT for 2-D radar channel grids.

A discrete line ``(a1 + v1 q mod N, a2 + v2 q mod M)``, ``q = 0..Q-1`` with
``Q = lcm(N, M)`` and slopes coprime to the grid sides, visits ``Q``
distinct cells.  By the projection-slice theorem the Q-point DFT of the
samples along that line is the 2-D spectrum projected onto the line: a
component at 2-D frequency ``(k, l)`` lands in slice bin
``(v1 k Q/N + v2 l Q/M) mod Q``.

Each iteration takes a reference slice and two slices shifted by one cell
along each grid axis.  The shifted slices rotate a component's bin value
by ``exp(j2pi k/N)`` and ``exp(j2pi l/M)``, which identifies ``(k, l)``
among the ``gcd(N, M)`` frequencies sharing the bin.  Bins holding several
components fail the consistency test and are left for a later iteration
with a different random slope.  Accepted components are subtracted from
every later slice.

Internally frequencies use the ``exp(+j2pi (k n1/N + l n2/M))`` convention.
The radar grid carries delay as ``exp(-j2pi r k/N)``, so the reported delay
bin is ``-k mod N`` and the Doppler bin is ``l`` wrapped to a signed value.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .detection import Detection, bins_to_physics
from .errors import ConfigError
from .waveform import WaveformConfig

# offset-slice bins are evaluated directly below this many candidates
_PARTIAL_DFT_LIMIT = 32


@dataclass(frozen=True)
class SftConfig:
    """
    Attributes
    ----------
    i_max : int
        Maximum number of iterations.
    q : int or None
        Slice length; must be a common multiple of ``N`` and ``M``.
        ``None`` uses ``lcm(N, M)``.
    detect_threshold : float or None
        Power threshold on the normalized slice bins.  ``None`` derives it
        from ``noise_variance`` and ``pfa``.
    seed : int
        Seed for slopes and offsets.
    max_components : int or None
        Stop once this many components are recovered.
    noise_variance : float
        Per-cell noise variance of the input grid.
    pfa : float
        Per-slice false-alarm budget used for the derived threshold.
    consistency_tol : float
        Relative tolerance on the cross-slice rotation test.
    """

    i_max: int = 10
    q: int | None = None
    detect_threshold: float | None = None
    seed: int = 0
    max_components: int | None = None
    noise_variance: float = 0.0
    pfa: float = 1e-2
    consistency_tol: float = 1e-3


@dataclass
class SparseSpectrum:
    shape: tuple[int, int]
    entries: list[tuple[int, int, complex]] = field(default_factory=list)
    residual_energy: float = 0.0
    iterations: int = 0
    samples_used: int = 0
    converged: bool = False

    @property
    def support(self) -> set[tuple[int, int]]:
        return {(k, l) for k, l, _ in self.entries}


class DivisionSampler:
    """Samples the least-squares channel ``Y / X`` only where asked."""

    def __init__(self, y: np.ndarray, x: np.ndarray):
        if np.shape(y) != np.shape(x):
            raise ValueError("Y and X must have the same shape")
        self.shape = tuple(np.shape(y))
        self._y = np.ascontiguousarray(y).ravel()
        self._x = np.ascontiguousarray(x).ravel()

    def take(self, idx: np.ndarray) -> np.ndarray:
        return self._y.take(idx) / self._x.take(idx)


class _ArraySampler:
    def __init__(self, h: np.ndarray):
        h = np.asarray(h)
        if h.ndim != 2:
            raise ValueError("grid must be 2-D")
        self.shape = h.shape
        self._flat = np.ascontiguousarray(h).ravel()

    def take(self, idx: np.ndarray) -> np.ndarray:
        return self._flat.take(idx)


def _as_sampler(h):
    return h if hasattr(h, "take") and not isinstance(h, np.ndarray) else _ArraySampler(h)


def slice_length(shape) -> int:
    n, m = shape
    return n * m // math.gcd(n, m)


def _check_line(shape, slope, q) -> None:
    n, m = shape
    # a zero component gives an axis-aligned line, otherwise it must be a unit
    units = [v % side == 0 or math.gcd(v, side) == 1 for v, side in zip(slope, shape)]
    if not all(units) or (slope[0] % n == 0 and slope[1] % m == 0):
        raise ConfigError(f"slope {tuple(slope)} must be coprime to the grid sides {(n, m)}")
    if q % n or q % m:
        raise ConfigError(f"slice length {q} must be a common multiple of {n} and {m}")


def line_indices(shape, offset, slope, q: int) -> np.ndarray:
    """Flat (row-major) indices of the discrete line; both coordinates are periodic."""
    return _lines(shape, (offset,), slope, q)[0]


def _lines(shape, offsets, slope, q: int) -> np.ndarray:
    """``(len(offsets), q)`` flat indices of parallel lines, one gather for all."""
    n, m = shape
    steps_n, steps_m = slope[0] * np.arange(n), slope[1] * np.arange(m)
    out = np.empty((len(offsets), q), dtype=np.intp)
    for row, (a1, a2) in zip(out, offsets):
        row.reshape(q // n, n)[:] = (a1 + steps_n) % n * m
        row.reshape(q // m, m)[:] += (a2 + steps_m) % m
    return out


def sample_slice(h, offset, slope, q: int | None = None) -> np.ndarray:
    """Samples ``h[(a1 + v1 q) mod N, (a2 + v2 q) mod M]`` for ``q = 0..Q-1``."""
    sampler = _as_sampler(h)
    q = slice_length(sampler.shape) if q is None else q
    _check_line(sampler.shape, slope, q)
    return sampler.take(line_indices(sampler.shape, offset, slope, q))


def projection_bin(k: int, l: int, slope, shape, q: int) -> int:
    n, m = shape
    return (slope[0] * k * (q // n) + slope[1] * l * (q // m)) % q


def _dft_at(slices: np.ndarray, bins: np.ndarray, q: int) -> np.ndarray:
    """
    Normalized DFT of each row of ``slices`` at a few bins.

    ``q = R P`` splits the sum into an ``R``-point DFT matrix product over
    the rows of the ``(R, P)`` reshape followed by a twiddle-weighted sum,
    ``O(K q)`` work instead of a full FFT per slice.
    """
    r = _split_factor(q)
    p = q // r
    bins = np.asarray(bins, dtype=np.int64)
    outer = np.exp(-2j * np.pi * (np.outer(bins, np.arange(r)) % r) / r)
    inner = np.exp(-2j * np.pi * (np.outer(bins, np.arange(p)) % q) / q)
    partial = outer @ slices.reshape(-1, r, p)
    return np.einsum("sij,ij->si", partial, inner) / q


def _split_factor(q: int) -> int:
    best = 1
    for d in range(1, math.isqrt(q) + 1):
        if q % d == 0:
            best = d
    return best


def _random_unit(rng: np.random.Generator, n: int) -> int:
    if n == 1:
        return 1
    while True:
        v = int(rng.integers(1, n))
        if math.gcd(v, n) == 1:
            return v


class _Decoder:
    """
    Frequency pairs ``(k, l)`` projecting onto given slice bins.

    With ``a = Q/N`` and ``b = Q/M``, bin ``f`` fixes ``l`` modulo ``a``
    through ``v2 b l = f (mod a)``, leaving ``gcd(N, M)`` choices of ``l``;
    each then determines ``k`` exactly.
    """

    def __init__(self, shape, slope, q):
        n, m = shape
        self.n, self.m, self.q = n, m, q
        self.v1, self.v2 = slope
        self.a = q // n
        self.b = q // m
        self.v1_inv = pow(self.v1, -1, n) if n > 1 else 0
        self.lb_inv = pow(self.v2 * self.b % self.a, -1, self.a) if self.a > 1 else 0
        self.l_step = np.arange(m // self.a) * self.a

    def candidates(self, f) -> tuple[np.ndarray, np.ndarray]:
        """``(ks, ls)`` of shape ``f.shape + (gcd(N, M),)``."""
        f = np.asarray(f, dtype=np.int64)[..., None]
        ls = (f * self.lb_inv) % self.a + self.l_step
        t = (f - self.v2 * ls * self.b) % self.q
        ks = (self.v1_inv * (t // self.a)) % self.n
        return ks, ls


def sft_iterate(h, config: SftConfig | None = None) -> SparseSpectrum:
    """
    Recover the sparse 2-D spectrum of ``h``.

    ``h`` is an ``(N, M)`` array or a sampler such as :class:`DivisionSampler`.
    Entries are ``(delay_bin, doppler_bin, amplitude)`` where the amplitude
    is the coefficient ``A`` of ``A exp(-j2pi r k/N) exp(j2pi s l/M)``.
    """
    config = SftConfig() if config is None else config
    sampler = _as_sampler(h)
    n, m = sampler.shape
    q = slice_length((n, m)) if config.q is None else config.q
    if q % n or q % m:
        raise ConfigError(f"slice length {q} must be a common multiple of {n} and {m}")
    rng = np.random.default_rng(config.seed)
    bin_var = config.noise_variance / q
    noise_tol = 5.0 * math.sqrt(2 * bin_var)
    found: dict[tuple[int, int], complex] = {}
    spec = SparseSpectrum(shape=(n, m))
    cap = config.max_components

    for it in range(config.i_max):
        slope = (_random_unit(rng, n), _random_unit(rng, m))
        a1, a2 = int(rng.integers(0, n)), int(rng.integers(0, m))
        offsets = ((a1, a2), ((a1 + 1) % n, a2), (a1, (a2 + 1) % m))
        # reference slice plus the two shifted ones in a single gather
        slices = sampler.take(_lines((n, m), offsets, slope, q))
        s0, shifted = slices[0], slices[1:]
        spec.samples_used += 3 * q
        spec.iterations = it + 1

        s0_hat = sfft.fft(s0, norm="forward")
        _subtract_known(s0_hat, found, slope, offsets[0], (n, m), q)
        power = np.square(s0_hat.real)
        power += np.square(s0_hat.imag)
        thr = _bin_threshold(config, bin_var, q, power)
        cand = np.flatnonzero(power >= thr)
        if cand.size == 0:
            spec.converged = True
            spec.residual_energy = float(power.sum())
            break
        cand = cand[np.argsort(-power[cand], kind="stable")]

        if cand.size <= _PARTIAL_DFT_LIMIT:
            b1, b2 = _dft_at(shifted, cand, q)
        else:
            b1, b2 = sfft.fft(shifted, norm="forward", axis=1)[:, cand]
        b1 = _subtract_known_at(b1, cand, found, slope, offsets[1], (n, m), q)
        b2 = _subtract_known_at(b2, cand, found, slope, offsets[2], (n, m), q)
        b0 = s0_hat[cand]

        # pick the pair whose rotations best align the shifted readings with b0
        ks, ls = _Decoder((n, m), slope, q).candidates(cand)
        rot1 = np.exp(2j * np.pi * ks / n)
        rot2 = np.exp(2j * np.pi * ls / m)
        score = (b0.conj()[:, None] * (b1[:, None] * rot1.conj() + b2[:, None] * rot2.conj())).real
        pick = np.argmax(score, axis=1)
        rows = np.arange(cand.size)
        k_hat, l_hat = ks[rows, pick], ls[rows, pick]
        r1, r2 = rot1[rows, pick], rot2[rows, pick]
        tol = config.consistency_tol * np.abs(b0) + noise_tol
        ok = (np.abs(b1 - b0 * r1) <= tol) & (np.abs(b2 - b0 * r2) <= tol)
        reading = (b0 + b1 * r1.conj() + b2 * r2.conj()) / 3

        leftover = int(np.count_nonzero(~ok))
        for j in np.flatnonzero(ok).tolist():
            key = (int(k_hat[j]), int(l_hat[j]))
            if cap is not None and len(found) >= cap and key not in found:
                leftover += 1
                continue
            k, l = key
            amp = reading[j] * np.exp(-2j * np.pi * ((k * a1 % n) / n + (l * a2 % m) / m))
            found[key] = found.get(key, 0) + amp
            s0_hat[cand[j]] -= reading[j]
        left = np.abs(s0_hat[cand]) ** 2
        spec.residual_energy = float(power.sum() - power[cand].sum() + left.sum())
        if cap is not None and len(found) >= cap:
            spec.converged = True
            break
        if leftover == 0 and not np.any(left >= thr):
            spec.converged = True
            break

    half = m - m // 2
    entries = []
    for (k, l), amp in found.items():
        entries.append(((-k) % n, l if l < half else l - m, complex(amp)))
    entries.sort(key=lambda e: (-abs(e[2]), e[0], e[1]))
    spec.entries = entries
    return spec


def _bin_threshold(config: SftConfig, bin_var: float, q: int, power: np.ndarray) -> float:
    if config.detect_threshold is not None:
        return config.detect_threshold
    # numerical floor for noiseless input, relative to the strongest bin
    floor = 1e-12 * float(power.max())
    if bin_var > 0:
        # per-slice false-alarm budget spread over q bins
        return max(bin_var * math.log(q / config.pfa), floor)
    return max(floor, np.finfo(float).tiny)


def _contribution(k, l, amp, offset, shape):
    n, m = shape
    return amp * np.exp(2j * np.pi * ((k * offset[0] % n) / n + (l * offset[1] % m) / m))


def _subtract_known(s_hat, found, slope, offset, shape, q) -> None:
    for (k, l), amp in found.items():
        s_hat[projection_bin(k, l, slope, shape, q)] -= _contribution(k, l, amp, offset, shape)


def _subtract_known_at(values, bins, found, slope, offset, shape, q) -> np.ndarray:
    if not found:
        return values
    values = values.copy()
    pos = {int(f): i for i, f in enumerate(bins)}
    for (k, l), amp in found.items():
        i = pos.get(projection_bin(k, l, slope, shape, q))
        if i is not None:
            values[i] -= _contribution(k, l, amp, offset, shape)
    return values


def sft_detect(
    h,
    config: WaveformConfig,
    sigma2: float,
    pfa: float,
    k: int | None,
    sft_config: SftConfig | None = None,
    return_spectrum: bool = False,
):
    """
    Detections from the sparse spectrum, thresholded like the periodogram.

    A component of amplitude ``A`` produces a rectangular-window periodogram
    peak of ``N M |A|^2``; it is kept when that reaches ``-sigma2 ln(pfa)``.
    Bins are mapped with ``N' = N`` and ``M' = M``.
    """
    sampler = _as_sampler(h)
    n, m = sampler.shape
    base = SftConfig() if sft_config is None else sft_config
    cfg = dataclasses.replace(base, noise_variance=sigma2, max_components=k, pfa=pfa)
    spec = sft_iterate(sampler, cfg)
    eta = -sigma2 * math.log(pfa) if sigma2 > 0 else 0.0
    grid_cfg = dataclasses.replace(config, n_prime=n, m_prime=m)
    dets = []
    for r, s, amp in spec.entries:
        pw = n * m * abs(amp) ** 2
        if pw >= eta:
            rng_m, vel = bins_to_physics(r, s, grid_cfg)
            dets.append(Detection(r, s, pw, rng_m, vel))
    dets.sort(key=lambda d: (-d.peak_power, d.delay_bin, d.doppler_bin))
    if k is not None:
        dets = dets[:k]
    return (dets, spec) if return_spectrum else dets
