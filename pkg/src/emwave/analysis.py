"""Disturbance localization, coherent-group partition and ROCOF from band components."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError, WindowError
from .grid import SystemModel
from .wavelet import DecompositionSet

DEFAULT_THRESHOLD = 1e-4
DEFAULT_ENERGY_SPAN = 0.4
DEFAULT_THETA_IN = 0.8
DEFAULT_THETA_OUT = 0.5
WEAK_RATIO = 0.25
MIN_FIT_SAMPLES = 10


def window_indices(decomp: DecompositionSet, window: Sequence[float]) -> slice:
    """Sample slice covering ``[t0, t1]`` (both ends inclusive)."""
    t0, t1 = map(float, window)
    if not t1 >= t0:
        raise WindowError(f"empty window [{t0}, {t1}]")
    fs = decomp.sample_rate
    start = decomp.source.start_time
    n = decomp.source.n_samples
    end = start + (n - 1) / fs if n else start
    eps = 1e-6 / fs
    if t0 < start - eps or t1 > end + eps:
        raise WindowError(f"window [{t0}, {t1}] outside record [{start}, {end}]")
    lo = max(0, math.ceil((t0 - start) * fs - 1e-6))
    hi = min(n - 1, math.floor((t1 - start) * fs + 1e-6))
    if hi < lo:
        raise WindowError(f"window [{t0}, {t1}] contains no samples")
    return slice(lo, hi + 1)


@dataclass(frozen=True)
class EnergyProfile:
    labels: tuple[str, ...]
    energies: np.ndarray
    window: tuple[float, float]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, map(float, self.energies)))


def d1_energy(decomp: DecompositionSet, window: Sequence[float]) -> EnergyProfile:
    sl = window_indices(decomp, window)
    d1 = decomp.band("D1")[:, sl]
    return EnergyProfile(decomp.labels, np.sum(d1 * d1, axis=1), (float(window[0]), float(window[1])))


def rank_channels(profile: EnergyProfile) -> tuple[str, ...]:
    """Descending energy; equal energies fall back to label order."""
    order = sorted(range(len(profile.labels)),
                   key=lambda i: (-profile.energies[i], profile.labels[i]))
    return tuple(profile.labels[i] for i in order)


@dataclass(frozen=True)
class LocalizationReport:
    ranking: tuple[str, ...]
    energies: EnergyProfile
    arrival_times: dict[str, float | None]
    threshold: float
    window: tuple[float, float]
    no_disturbance: bool

    @property
    def arrival_order(self) -> tuple[str, ...]:
        """Detected channels by arrival time; same-sample ties by D1 energy, then label."""
        energy = self.energies.as_dict()
        hit = [(t, -energy[lbl], lbl) for lbl, t in self.arrival_times.items() if t is not None]
        return tuple(lbl for *_, lbl in sorted(hit))

    @property
    def origin(self) -> str | None:
        return self.ranking[0] if self.ranking else None


def _first_crossing(d1: np.ndarray, times: np.ndarray, threshold: float) -> list[float | None]:
    out = []
    for row in d1:
        hits = np.flatnonzero(np.abs(row) > threshold)
        out.append(float(times[hits[0]]) if hits.size else None)
    return out


def localize(decomp: DecompositionSet, event_window: Sequence[float] | None = None,
             threshold: float = DEFAULT_THRESHOLD,
             span: float = DEFAULT_ENERGY_SPAN) -> LocalizationReport:
    """Rank channels by D1 energy and time the first |D1| > threshold crossing.

    Without ``event_window`` the event is placed at the earliest crossing
    anywhere in the record and the window runs ``span`` seconds from there.
    """
    if not threshold > 0:
        raise ValidationError(f"threshold must be positive, got {threshold}")
    times = decomp.times
    d1 = decomp.band("D1")
    if event_window is None:
        first = [t for t in _first_crossing(d1, times, threshold) if t is not None]
        if first:
            t0 = min(first)
            event_window = (t0, min(t0 + span, float(times[-1])))
        elif decomp.source.n_samples:
            event_window = (float(times[0]), float(times[-1]))
        else:
            event_window = (decomp.source.start_time, decomp.source.start_time)
    window = (float(event_window[0]), float(event_window[1]))

    if decomp.source.n_samples == 0 or not decomp.labels:
        empty = EnergyProfile(decomp.labels, np.zeros(len(decomp.labels)), window)
        return LocalizationReport((), empty, {k: None for k in decomp.labels}, threshold,
                                  window, True)

    sl = window_indices(decomp, window)
    profile = d1_energy(decomp, window)
    arrivals = dict(zip(decomp.labels, _first_crossing(d1[:, sl], times[sl], threshold)))
    found = any(t is not None for t in arrivals.values())
    ranking = rank_channels(profile) if found else ()
    return LocalizationReport(ranking, profile, arrivals, threshold, window, not found)


@dataclass(frozen=True)
class CoherencyPartition:
    labels: tuple[str, ...]
    groups: tuple[tuple[str, ...], ...]
    references: tuple[str, ...]
    opposing: tuple[tuple[int, int], ...]
    weak: tuple[str, ...]
    correlation: np.ndarray
    rms: dict[str, float]
    band: str
    window: tuple[float, float]

    def group_of(self, label: str) -> int | None:
        """Group index, or None for weakly participating channels."""
        for i, g in enumerate(self.groups):
            if label in g:
                return i
        return None


def _complete_linkage(corr: np.ndarray, members: list[int], theta_in: float) -> list[list[int]]:
    clusters = [[i] for i in members]
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                link = corr[np.ix_(clusters[a], clusters[b])].min()
                if best is None or link > best[0]:
                    best = (link, a, b)
        if best[0] < theta_in:
            break
        _, a, b = best
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    return clusters


def coherency_groups(decomp: DecompositionSet, window: Sequence[float],
                     theta_in: float = DEFAULT_THETA_IN,
                     theta_out: float = DEFAULT_THETA_OUT,
                     band: str | None = None,
                     weak_ratio: float = WEAK_RATIO) -> CoherencyPartition:
    """Partition channels by zero-lag correlation of their deepest detail band.

    Channels whose band RMS is below ``weak_ratio`` times the largest RMS
    (or which are constant over the window) are set aside as weakly
    participating.  The rest are merged by complete linkage while every
    cross pair correlates at ``theta_in`` or better; two groups are marked
    opposing when their mean cross-correlation is at most ``-theta_out``.
    """
    if not 0 < theta_out <= theta_in <= 1:
        raise ValidationError(
            f"need 0 < theta_out <= theta_in <= 1, got theta_in={theta_in}, theta_out={theta_out}"
        )
    band = band or f"D{decomp.levels}"
    sl = window_indices(decomp, window)
    f_high = decomp.band_map[band].f_high
    span = (sl.stop - sl.start - 1) / decomp.sample_rate
    min_span = 2.0 / f_high
    if span < min_span:
        raise WindowError(
            f"coherency window {span:g} s is too short; {band} needs at least {min_span:g} s "
            f"(two periods of its {f_high:g} Hz upper edge)"
        )
    x = decomp.band(band)[:, sl]
    labels = decomp.labels
    n = len(labels)
    rms = np.sqrt(np.mean(x * x, axis=1)) if n else np.zeros(0)
    centered = x - x.mean(axis=1, keepdims=True)
    norm = np.sqrt(np.sum(centered * centered, axis=1))
    live = norm > 0
    corr = np.zeros((n, n))
    if n:
        safe = np.where(live, norm, 1.0)
        unit = centered / safe[:, None]
        corr = np.clip(unit @ unit.T, -1.0, 1.0)
        corr[~live, :] = 0.0
        corr[:, ~live] = 0.0
        np.fill_diagonal(corr, np.where(live, 1.0, 0.0))

    ref_rms = rms[live].max() if live.any() else 0.0
    strong = [i for i in range(n) if live[i] and rms[i] >= weak_ratio * ref_rms]
    weak = tuple(labels[i] for i in range(n) if i not in strong)

    clusters = _complete_linkage(corr, strong, theta_in)
    clusters.sort(key=lambda c: c[0])
    groups = tuple(tuple(labels[i] for i in c) for c in clusters)
    references = tuple(labels[max(c, key=lambda i: (rms[i], -i))] for c in clusters)
    opposing = []
    for a in range(len(clusters)):
        for b in range(a + 1, len(clusters)):
            if corr[np.ix_(clusters[a], clusters[b])].mean() <= -theta_out:
                opposing.append((a, b))
    corr.setflags(write=False)
    return CoherencyPartition(
        labels, groups, references, tuple(opposing), weak, corr,
        dict(zip(labels, map(float, rms))), band, (float(window[0]), float(window[1])),
    )


@dataclass(frozen=True)
class RocofEstimate:
    labels: tuple[str, ...]
    slopes: np.ndarray
    residuals: np.ndarray
    window: tuple[float, float]
    system_slope: float | None = None
    system_residual: float | None = None
    band: str = field(default="A5")

    def as_dict(self) -> dict[str, tuple[float, float]]:
        return {k: (float(s), float(r)) for k, s, r in zip(self.labels, self.slopes, self.residuals)}


def _line_fit(t: np.ndarray, y: np.ndarray):
    """OLS slope and RMS residual for each row of ``y``."""
    tc = t - t.mean()
    sxx = tc @ tc
    yc = y - y.mean(axis=-1, keepdims=True)
    slope = (yc @ tc) / sxx
    resid = yc - slope[..., None] * tc
    return slope, np.sqrt(np.mean(resid * resid, axis=-1))


def estimate_rocof(decomp: DecompositionSet, model: SystemModel | None = None,
                   fit_window: Sequence[float] | None = None) -> RocofEstimate:
    """Least-squares slope of each channel's final approximation band (Hz/s).

    With a model, the inertia-weighted (center of inertia) combination of the
    approximations is fitted as well and reported as the system value.
    """
    if fit_window is None:
        t = decomp.times
        fit_window = (float(t[0]), float(t[-1])) if t.size else (0.0, 0.0)
    sl = window_indices(decomp, fit_window)
    count = sl.stop - sl.start
    if count < MIN_FIT_SAMPLES:
        raise WindowError(f"fit window holds {count} samples, need at least {MIN_FIT_SAMPLES}")
    band = f"A{decomp.levels}"
    t = decomp.times[sl]
    approx = decomp.band(band)[:, sl]
    slopes, resid = _line_fit(t, approx)
    sys_slope = sys_resid = None
    if model is not None:
        if model.n != len(decomp.labels):
            raise ValidationError(
                f"{len(decomp.labels)} channels for {model.n} generators"
            )
        w = model.inertia_weights
        coi = (w @ approx) / w.sum()
        s, r = _line_fit(t, coi)
        sys_slope, sys_resid = float(s), float(r)
    window = (float(fit_window[0]), float(fit_window[1]))
    return RocofEstimate(decomp.labels, slopes, resid, window, sys_slope, sys_resid, band)
