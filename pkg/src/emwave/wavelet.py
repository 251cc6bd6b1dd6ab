"""Daubechies-4 filter bank, multilevel DWT and full-length band components.

"Db4" here is the four-coefficient Daubechies orthogonal wavelet (two
vanishing moments), the filter some libraries call ``db2``.

The transform uses the orthonormal correlation form

    a[k] = sum_n h[n] x[2k + n],      d[k] = sum_n g[n] x[2k + n]
    x[m] = sum_k h[m - 2k] a[k] + g[m - 2k] d[k]

For ``symmetric`` and ``zero`` extension every level keeps the
``floor((N + L - 1) / 2)`` coefficients (k = -1 .. floor((N-1)/2)) that
touch the N input samples, so reconstruction is exact whatever the
extension.  ``periodic`` is periodization: N/2 coefficients per level
(odd lengths repeat the last sample), an orthogonal transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InsufficientLengthError, ValidationError
from .signals import SignalSet


class Extension(str, Enum):
    SYMMETRIC = "symmetric"
    PERIODIC = "periodic"
    ZERO = "zero"


@dataclass(frozen=True)
class FilterPair:
    low_pass: np.ndarray
    high_pass: np.ndarray

    @property
    def length(self) -> int:
        return len(self.low_pass)


def db4_filter_bank() -> FilterPair:
    r3 = math.sqrt(3.0)
    h = np.array([1 + r3, 3 + r3, 3 - r3, 1 - r3]) / (4 * math.sqrt(2.0))
    n = np.arange(len(h))
    g = (-1.0) ** n * h[::-1]
    h.setflags(write=False)
    g.setflags(write=False)
    return FilterPair(h, g)


_BANK = db4_filter_bank()


@dataclass(frozen=True)
class Band:
    label: str
    f_low: float
    f_high: float

    def __str__(self) -> str:
        return f"{self.label} [{self.f_high:.3f} - {self.f_low:.3f} Hz]"


@dataclass(frozen=True)
class BandMap:
    sample_rate: float
    levels: int
    entries: tuple[Band, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.entries)

    def __getitem__(self, label: str) -> Band:
        for b in self.entries:
            if b.label == label:
                return b
        raise KeyError(label)


def band_frequencies(fs: float, levels: int) -> BandMap:
    """Dyadic bands: D_j spans [fs/2^(j+1), fs/2^j], A_L spans [0, fs/2^(L+1)]."""
    if not fs > 0:
        raise ValidationError(f"sample rate must be positive, got {fs}")
    if levels < 1:
        raise ValidationError(f"levels must be >= 1, got {levels}")
    entries = [Band(f"D{j}", fs / 2 ** (j + 1), fs / 2**j) for j in range(1, levels + 1)]
    entries.append(Band(f"A{levels}", 0.0, fs / 2 ** (levels + 1)))
    return BandMap(float(fs), levels, tuple(entries))


def band_labels(levels: int) -> tuple[str, ...]:
    return tuple(f"D{j}" for j in range(1, levels + 1)) + (f"A{levels}",)


def _extend(x: np.ndarray, mode: Extension, left: int, right: int) -> np.ndarray:
    n = len(x)
    idx = np.arange(-left, n + right)
    if mode is Extension.SYMMETRIC:
        period = 2 * n
        idx = np.mod(idx, period)
        return x[np.where(idx >= n, period - 1 - idx, idx)]
    if mode is Extension.PERIODIC:
        return x[np.mod(idx, n)]
    out = np.zeros(len(idx))
    inside = (idx >= 0) & (idx < n)
    out[inside] = x[idx[inside]]
    return out


def _next_length(n: int, mode: Extension, taps: int) -> int:
    if mode is Extension.PERIODIC:
        return (n + 1) // 2
    return (n + taps - 1) // 2


def _analysis_step(x: np.ndarray, mode: Extension, bank: FilterPair):
    taps = bank.length
    if mode is Extension.PERIODIC:
        if len(x) % 2:
            x = np.append(x, x[-1])
        ext = _extend(x, mode, 0, taps - 2)
        win = sliding_window_view(ext, taps)[::2]
    else:
        k = _next_length(len(x), mode, taps)
        ext = _extend(x, mode, taps - 2, 2 * k - len(x))
        win = sliding_window_view(ext, taps)[::2][:k]
    return win @ bank.low_pass, win @ bank.high_pass


def _synthesis_step(a, d, n: int, mode: Extension, bank: FilterPair) -> np.ndarray:
    k = len(a)
    up_a = np.zeros(2 * k)
    up_a[::2] = a
    up_d = np.zeros(2 * k)
    up_d[::2] = d
    z = np.convolve(up_a, bank.low_pass) + np.convolve(up_d, bank.high_pass)
    if mode is Extension.PERIODIC:
        period = 2 * k
        y = z[:period].copy()
        y[: len(z) - period] += z[period:]
        return y[:n]
    off = bank.length - 2
    return z[off:off + n]


@dataclass(frozen=True)
class Pyramid:
    """Raw coefficients: ``details[j-1]`` is level j, ``approximation`` is level L."""

    details: tuple[np.ndarray, ...]
    approximation: np.ndarray
    lengths: tuple[int, ...]
    extension: Extension
    sample_rate: float

    @property
    def levels(self) -> int:
        return len(self.details)


def level_lengths(n: int, levels: int, extension: str | Extension = "symmetric",
                  taps: int = 4) -> list[int]:
    """Input length of each level, raising if any would be shorter than the filter."""
    mode = Extension(extension)
    lengths = [n]
    for level in range(1, levels + 1):
        if lengths[-1] < taps:
            raise InsufficientLengthError(
                f"insufficient length for requested depth: level {level} input has "
                f"{lengths[-1]} samples, filter needs {taps} (signal length {n}, {levels} levels)"
            )
        lengths.append(_next_length(lengths[-1], mode, taps))
    return lengths


def decompose(signal, fs: float, levels: int = 5,
              extension: str | Extension = "symmetric") -> Pyramid:
    """Multilevel DWT of one channel."""
    mode = Extension(extension)
    if not fs > 0:
        raise ValidationError(f"sample rate must be positive, got {fs}")
    if levels < 1:
        raise ValidationError(f"levels must be >= 1, got {levels}")
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValidationError("decompose expects a single channel")
    lengths = level_lengths(len(x), levels, mode, _BANK.length)
    details = []
    a = x
    for _ in range(levels):
        a, d = _analysis_step(a, mode, _BANK)
        details.append(d)
    return Pyramid(tuple(details), a, tuple(lengths), mode, float(fs))


def reconstruct(pyramid: Pyramid) -> np.ndarray:
    """Inverse DWT of the whole pyramid."""
    a = pyramid.approximation
    for j in range(pyramid.levels, 0, -1):
        a = _synthesis_step(a, pyramid.details[j - 1], pyramid.lengths[j - 1],
                            pyramid.extension, _BANK)
    return a


def reconstruct_bands(pyramid: Pyramid, extension: str | Extension | None = None) -> np.ndarray:
    """Full-length band components ``[D1, ..., DL, AL]``, shape (L+1, N).

    Each component is the inverse transform with every other band zeroed,
    so the rows sum to the original signal.
    """
    mode = pyramid.extension if extension is None else Extension(extension)
    if mode is not pyramid.extension:
        raise ValidationError(
            f"extension mismatch: pyramid built with {pyramid.extension.value}, "
            f"reconstruction asked for {mode.value}"
        )
    levels = pyramid.levels
    out = np.empty((levels + 1, pyramid.lengths[0]))

    def lift(y, level):
        for j in range(level - 1, 0, -1):
            y = _synthesis_step(y, np.zeros_like(y), pyramid.lengths[j - 1], mode, _BANK)
        return y

    for j in range(1, levels + 1):
        d = pyramid.details[j - 1]
        y = _synthesis_step(np.zeros_like(d), d, pyramid.lengths[j - 1], mode, _BANK)
        out[j - 1] = lift(y, j)
    a = pyramid.approximation
    y = _synthesis_step(a, np.zeros_like(a), pyramid.lengths[levels - 1], mode, _BANK)
    out[levels] = lift(y, levels)
    return out


def support_samples(levels: int, taps: int = 4) -> int:
    """Support length of a level-``levels`` basis function, in samples."""
    return (taps - 1) * (2**levels - 1) + 1


@dataclass(frozen=True)
class DecompositionSet:
    """Band components per channel, ``components[c, b, n]`` in ``band_map`` order."""

    source: SignalSet
    components: np.ndarray
    band_map: BandMap
    extension: Extension

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        expected = (len(self.source.labels), self.band_map.levels + 1, self.source.n_samples)
        if comps.shape != expected:
            raise ValidationError(f"components shape {comps.shape}, expected {expected}")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.source.labels

    @property
    def levels(self) -> int:
        return self.band_map.levels

    @property
    def sample_rate(self) -> float:
        return self.source.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.source.times

    def band(self, label: str) -> np.ndarray:
        """(channels, samples) array of one band."""
        return self.components[:, self.band_map.labels.index(label), :]

    def component(self, channel: str, band: str) -> np.ndarray:
        return self.components[self.labels.index(channel), self.band_map.labels.index(band)]


def decompose_set(signals: SignalSet, levels: int = 5,
                  extension: str | Extension = "symmetric") -> DecompositionSet:
    mode = Extension(extension)
    bmap = band_frequencies(signals.sample_rate, levels)
    comps = np.empty((len(signals.labels), levels + 1, signals.n_samples))
    for c, (label, x) in enumerate(signals.channels):
        try:
            pyr = decompose(x, signals.sample_rate, levels, mode)
        except ValidationError as exc:
            raise type(exc)(f"channel {label}: {exc}") from exc
        comps[c] = reconstruct_bands(pyr)
    return DecompositionSet(signals, comps, bmap, mode)


def band_energy_fractions(components: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Share of total component energy carried by each band."""
    e = np.sum(np.asarray(components) ** 2, axis=-1)
    total = e.sum(axis=-1, keepdims=True)
    return np.divide(e, total, out=np.zeros_like(e), where=total > 0)
