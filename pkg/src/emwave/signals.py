"""Uniformly sampled multi-channel frequency records and rate conversion."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import signal as sps

from .errors import ValidationError

# Elliptic anti-alias prototype: order 6, 0.1 dB ripple, 60 dB stopband.
_AA_ORDER = 6
_AA_RIPPLE_DB = 0.1
_AA_STOP_DB = 60.0
_AA_CUTOFF_RATIO = 0.45


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SignalSet:
    """Frequency-deviation record, one row of ``data`` per channel (Hz)."""

    sample_rate: float
    start_time: float
    labels: tuple[str, ...]
    data: np.ndarray
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1 and len(self.labels) == 0 and data.size == 0:
            data = data.reshape(0, 0)
        if data.ndim != 2:
            raise ValidationError("signal data must be 2-D (channels x samples)")
        if not self.sample_rate > 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate}")
        labels = tuple(str(lbl) for lbl in self.labels)
        if len(labels) != data.shape[0]:
            raise ValidationError(
                f"{len(labels)} labels for {data.shape[0]} channels"
            )
        if len(set(labels)) != len(labels):
            dup = sorted({x for x in labels if labels.count(x) > 1})
            raise ValidationError(f"duplicate channel labels: {', '.join(dup)}")
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "start_time", float(self.start_time))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.n_samples) / self.sample_rate

    @property
    def channels(self) -> list[tuple[str, np.ndarray]]:
        return list(zip(self.labels, self.data))

    def channel(self, label: str) -> np.ndarray:
        try:
            return self.data[self.labels.index(label)]
        except ValueError:
            raise KeyError(label) from None

    @classmethod
    def from_channels(
        cls,
        sample_rate: float,
        channels: Sequence[tuple[str, Sequence[float]]],
        start_time: float = 0.0,
        metadata: Mapping[str, Any] | None = None,
    ) -> "SignalSet":
        lengths = {len(v) for _, v in channels}
        if len(lengths) > 1:
            raise ValidationError("all channels must have equal length")
        data = np.array([np.asarray(v, dtype=float) for _, v in channels])
        if not channels:
            data = np.zeros((0, 0))
        return cls(sample_rate, start_time, tuple(k for k, _ in channels), data, metadata or {})


def antialias_filter(fs_in: float, fs_out: float) -> np.ndarray:
    """Causal elliptic low-pass (second-order sections) cutting off at 0.45*fs_out.

    Causal so that nothing appears in a channel before it happens in the
    underlying dynamics; the DC gain is normalized to exactly one.
    """
    cutoff = _AA_CUTOFF_RATIO * fs_out
    sos = sps.ellip(_AA_ORDER, _AA_RIPPLE_DB, _AA_STOP_DB, cutoff, fs=fs_in, output="sos")
    dc = np.prod(sos[:, :3].sum(axis=1) / sos[:, 3:].sum(axis=1))
    sos = sos.copy()
    sos[0, :3] /= dc
    return sos


def decimation_ratio(fs_in: float, fs_out: float) -> int:
    if not (fs_in > 0 and fs_out > 0):
        raise ValidationError("sample rates must be positive")
    ratio = fs_in / fs_out
    q = int(round(ratio))
    if q < 1 or abs(ratio - q) > 1e-9 * max(1.0, ratio):
        raise ValidationError(
            f"non-integer decimation ratio {fs_in:g}/{fs_out:g} = {ratio:g}"
        )
    return q


def lowpass_decimate(x: np.ndarray, fs_in: float, fs_out: float) -> np.ndarray:
    """Anti-alias filter along the last axis, then keep every q-th sample.

    The filter state starts at the steady state for each row's first value,
    so a record that begins at rest (or at any constant) has no start-up
    transient.
    """
    q = decimation_ratio(fs_in, fs_out)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if q == 1 or x.shape[-1] == 0:
        return x.copy()
    sos = antialias_filter(fs_in, fs_out)
    zi = sps.sosfilt_zi(sos)[:, None, :] * x[:, 0][None, :, None]
    y, _ = sps.sosfilt(sos, x, axis=-1, zi=zi)
    return y[:, ::q]


def resample(signals: SignalSet, target_fs: float) -> SignalSet:
    """Anti-alias at ``0.45*target_fs`` then decimate by the integer ratio."""
    decimation_ratio(signals.sample_rate, target_fs)
    if signals.data.shape[0] == 0:
        q = decimation_ratio(signals.sample_rate, target_fs)
        n = len(range(0, signals.n_samples, q))
        return SignalSet(target_fs, signals.start_time, (), np.zeros((0, n)), signals.metadata)
    out = lowpass_decimate(signals.data, signals.sample_rate, target_fs)
    return SignalSet(target_fs, signals.start_time, signals.labels, out, signals.metadata)
