"""Batch pipeline: simulate or load, decompose, analyze, write reports."""

from __future__ import annotations

import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from . import analysis
from .analysis import CoherencyPartition, EnergyProfile, LocalizationReport, RocofEstimate
from .errors import ConfigError, NumericalError, ValidationError, WindowError
from .grid import SystemModel, simulate
from .io import (
    Scenario,
    fmt_time,
    fmt_value,
    load_scenario,
    load_signals_csv,
    write_json,
    write_signals_csv,
    write_table,
)
from .signals import SignalSet
from .wavelet import DecompositionSet, Extension, decompose_set, support_samples

log = logging.getLogger(__name__)

STAGES = ("simulate", "decompose", "localize", "coherency", "rocof")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


@dataclass(frozen=True)
class PipelineConfig:
    out: Path
    scenario: Path | None = None
    signals: Path | None = None
    levels: int = 5
    extension: str = "symmetric"
    event_window: tuple[float, float] | None = None
    threshold: float = analysis.DEFAULT_THRESHOLD
    theta_in: float = analysis.DEFAULT_THETA_IN
    theta_out: float = analysis.DEFAULT_THETA_OUT
    coherency_window: tuple[float, float] | None = None
    fit_window: tuple[float, float] | None = None
    stages: tuple[str, ...] = STAGES

    def validate(self) -> None:
        if (self.scenario is None) == (self.signals is None):
            raise ConfigError("exactly one input source (scenario file or signals CSV) is required")
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        try:
            Extension(self.extension)
        except ValueError:
            raise ConfigError(f"unknown extension policy {self.extension!r}") from None
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stages: {', '.join(sorted(unknown))}")
        if "simulate" in self.stages and self.scenario is None and len(self.stages) == 1:
            raise ConfigError("simulate needs a scenario input")
        out = Path(self.out)
        if out.exists() and not out.is_dir():
            raise ConfigError(f"output path {out} is not a directory")
        parent = out if out.exists() else _existing_parent(out)
        if not os.access(parent, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")


def _existing_parent(path: Path) -> Path:
    path = path.absolute()
    while not path.exists():
        path = path.parent
    return path


class StageError(Exception):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.cause = exc


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValidationError, NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        raise StageError(name, exc) from exc


def default_window(decomp: DecompositionSet, event_time: float | None) -> tuple[float, float]:
    """Post-event span clear of the deepest band's edge effects."""
    t = decomp.times
    settle = support_samples(decomp.levels) / decomp.sample_rate
    start = float(t[0]) if event_time is None else max(float(t[0]), event_time)
    return (start + settle, float(t[-1]) - settle)


def emit_plotdata(decomp: DecompositionSet, outdir: str | Path,
                  energies: EnergyProfile | None = None,
                  summary_lines: Iterable[str] = ()) -> list[Path]:
    """One ``components/<channel>.csv`` per channel, ``energies.csv`` and ``summary.txt``."""
    outdir = Path(outdir)
    comp_dir = outdir / "components"
    comp_dir.mkdir(parents=True, exist_ok=True)
    written = []
    header = ["time", *decomp.band_map.labels]
    times = decomp.times
    for c, label in enumerate(decomp.labels):
        rows = ([fmt_time(t), *map(fmt_value, col)]
                for t, col in zip(times, decomp.components[c].T))
        path = comp_dir / f"{label}.csv"
        write_table(path, header, rows)
        written.append(path)
    if energies is None and decomp.source.n_samples:
        energies = analysis.d1_energy(decomp, (float(times[0]), float(times[-1])))
    rows = [] if energies is None else [
        [lbl, fmt_value(e)] for lbl, e in zip(energies.labels, energies.energies)
    ]
    write_table(outdir / "energies.csv", ["channel", "energy"], rows)
    written.append(outdir / "energies.csv")
    lines = list(summary_lines) or _band_summary(decomp)
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n")
    written.append(outdir / "summary.txt")
    return written


def _band_summary(decomp: DecompositionSet) -> list[str]:
    lines = [
        f"channels: {len(decomp.labels)}, sample rate {decomp.sample_rate:g} Hz, "
        f"{decomp.source.n_samples} samples",
        f"decomposition: Db4, {decomp.levels} levels, {decomp.extension.value} extension",
    ]
    for b in decomp.band_map.entries:
        lines.append(f"  {b}")
    return lines


def write_localization(path, rep: LocalizationReport) -> None:
    order = rep.ranking or rep.energies.labels
    e = rep.energies.as_dict()
    rows = []
    for lbl in order:
        t = rep.arrival_times.get(lbl)
        rows.append([lbl, fmt_value(e[lbl]), "" if t is None else fmt_time(t)])
    write_table(path, ["channel", "energy", "arrival_time"], rows)


def write_coherency(path, part: CoherencyPartition | None, band: str) -> None:
    rows = []
    if part is not None:
        for lbl in part.labels:
            g = part.group_of(lbl)
            rows.append([lbl, "weak" if g is None else str(g + 1), fmt_value(part.rms[lbl])])
    write_table(path, ["channel", "group", f"rms_{band.lower()}"], rows)


def write_rocof(path, est: RocofEstimate | None) -> None:
    rows = []
    if est is not None:
        rows = [[lbl, fmt_value(s), fmt_value(r)]
                for lbl, s, r in zip(est.labels, est.slopes, est.residuals)]
        if est.system_slope is not None:
            rows.append(["COI", fmt_value(est.system_slope), fmt_value(est.system_residual)])
    write_table(path, ["channel", "slope_hz_per_s", "residual"], rows)


def _localization_json(rep: LocalizationReport) -> dict:
    return {
        "window": list(rep.window),
        "threshold": rep.threshold,
        "no_disturbance": rep.no_disturbance,
        "ranking": list(rep.ranking),
        "energies": rep.energies.as_dict(),
        "arrival_times": dict(rep.arrival_times),
    }


def _coherency_json(part: CoherencyPartition) -> dict:
    return {
        "band": part.band,
        "window": list(part.window),
        "groups": [list(g) for g in part.groups],
        "references": list(part.references),
        "opposing": [[a + 1, b + 1] for a, b in part.opposing],
        "weak": list(part.weak),
        "rms": part.rms,
        "correlation": [[float(v) for v in row] for row in part.correlation],
    }


def _rocof_json(est: RocofEstimate) -> dict:
    return {
        "band": est.band,
        "window": list(est.window),
        "slopes": {k: s for k, (s, _) in est.as_dict().items()},
        "residuals": {k: r for k, (_, r) in est.as_dict().items()},
        "system_slope": est.system_slope,
        "system_residual": est.system_residual,
    }


def _publish(tmp: Path, out: Path) -> None:
    for src in sorted(tmp.rglob("*")):
        if src.is_file():
            dest = out / src.relative_to(tmp)
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(src, dest)


def execute(config: PipelineConfig, workdir: Path) -> list[str]:
    """Run the configured stages writing into ``workdir``; returns summary lines."""
    stages = set(config.stages)
    summary: list[str] = []
    payload: dict = {"levels": config.levels, "extension": config.extension}
    model: SystemModel | None = None
    event_time = None

    if config.scenario is not None:
        scen: Scenario = _stage("load", load_scenario, config.scenario)
        model = scen.model
        event_time = scen.event_time
        signals: SignalSet = _stage("simulate", simulate, scen.model, scen.events,
                                    scen.duration, scen.dt_internal)
        write_signals_csv(signals, workdir / "signals.csv")
        summary.append(f"input: scenario {Path(config.scenario).name}")
        lost = signals.metadata.get("loss_of_synchronism", False)
        payload["simulation"] = {
            "events": [list(e) for e in signals.metadata["events"]],
            "duration": scen.duration,
            "dt_internal": scen.dt_internal,
            "loss_of_synchronism": lost,
            "loss_of_synchronism_time": signals.metadata.get("loss_of_synchronism_time"),
        }
        if lost:
            summary.append("warning: loss of synchronism at t = "
                           f"{signals.metadata['loss_of_synchronism_time']:.3f} s")
    else:
        signals = _stage("load", load_signals_csv, config.signals)
        summary.append(f"input: signals {Path(config.signals).name}")
    summary.append(f"channels: {len(signals.labels)}, sample rate {signals.sample_rate:g} Hz, "
                   f"{signals.n_samples} samples")
    payload["sample_rate"] = signals.sample_rate
    payload["channels"] = list(signals.labels)

    if stages == {"simulate"}:
        return summary

    decomp = _stage("decompose", decompose_set, signals, config.levels, config.extension)
    payload["band_map"] = [
        {"band": b.label, "f_low": b.f_low, "f_high": b.f_high} for b in decomp.band_map.entries
    ]
    summary.append(f"decomposition: Db4, {decomp.levels} levels, {decomp.extension.value} extension")

    window = config.event_window
    if window is None and event_time is not None:
        window = (event_time, event_time + analysis.DEFAULT_ENERGY_SPAN)
    loc = _stage("localize", analysis.localize, decomp, window, config.threshold)
    if "localize" in stages:
        write_localization(workdir / "localization.csv", loc)
        payload["localization"] = _localization_json(loc)
        summary.append(f"localization window [{loc.window[0]:.3f}, {loc.window[1]:.3f}] s, "
                       f"threshold {config.threshold:g} Hz")
        if loc.no_disturbance:
            summary.append("no disturbance found")
        else:
            summary.append(f"top-ranked origin: {loc.origin}")
            summary.append("D1 energy ranking: " + ", ".join(loc.ranking))
            summary.append("arrival order: " + ", ".join(loc.arrival_order))
    if event_time is None and not loc.no_disturbance:
        event_time = loc.window[0]

    band = f"D{decomp.levels}"
    if "coherency" in stages:
        part = None
        win = config.coherency_window or default_window(decomp, event_time)
        try:
            part = _stage("coherency", analysis.coherency_groups, decomp, win,
                          config.theta_in, config.theta_out)
        except StageError as exc:
            if config.coherency_window is not None or not isinstance(exc.cause, WindowError):
                raise
            summary.append(f"coherency: skipped, record too short for the default window ({exc.cause})")
            payload["coherency"] = {"skipped": str(exc.cause)}
        write_coherency(workdir / "coherency.csv", part, band)
        if part is not None:
            payload["coherency"] = _coherency_json(part)
            summary.append(f"coherency ({band}) window [{part.window[0]:.3f}, {part.window[1]:.3f}] s")
            for i, (g, ref) in enumerate(zip(part.groups, part.references), start=1):
                summary.append(f"  group {i} (reference {ref}): {', '.join(g)}")
            for a, b in part.opposing:
                summary.append(f"  groups {a + 1} and {b + 1} oscillate in opposition")
            if part.weak:
                summary.append(f"  weakly participating: {', '.join(part.weak)}")

    if "rocof" in stages:
        est = None
        win = config.fit_window or default_window(decomp, event_time)
        try:
            est = _stage("rocof", analysis.estimate_rocof, decomp, model, win)
        except StageError as exc:
            if config.fit_window is not None or not isinstance(exc.cause, WindowError):
                raise
            summary.append(f"rocof: skipped, record too short for the default window ({exc.cause})")
            payload["rocof"] = {"skipped": str(exc.cause)}
        write_rocof(workdir / "rocof.csv", est)
        if est is not None:
            payload["rocof"] = _rocof_json(est)
            summary.append(f"rocof ({est.band} slope) window [{est.window[0]:.3f}, {est.window[1]:.3f}] s")
            if est.system_slope is not None:
                summary.append(f"  system (COI): {est.system_slope:.6g} Hz/s")
            if len(est.labels):
                summary.append(f"  channel range: {est.slopes.min():.6g} .. {est.slopes.max():.6g} Hz/s")

    if "decompose" in stages:
        emit_plotdata(decomp, workdir, loc.energies, summary)
    else:
        (workdir / "summary.txt").write_text("\n".join(summary) + "\n")
    write_json(workdir / "report.json", payload)
    return summary


def run_pipeline(config: PipelineConfig) -> int:
    """Execute ``config``; returns 0, 1 (validation error) or 2 (numerical failure).

    Output lands in a scratch directory next to ``config.out`` and is moved
    into place only after every stage succeeded.
    """
    try:
        config.validate()
    except ValidationError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(config.out)
    parent = _existing_parent(out.parent if not out.exists() else out)
    tmp = Path(tempfile.mkdtemp(prefix=".emwave-", dir=parent))
    try:
        summary = execute(config, tmp)
        out.mkdir(parents=True, exist_ok=True)
        if set(config.stages) == {"simulate"}:
            (tmp / "summary.txt").write_text("\n".join(summary) + "\n")
        _publish(tmp, out)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        numeric = isinstance(exc.cause, (NumericalError, np.linalg.LinAlgError, FloatingPointError))
        return EXIT_NUMERICAL if numeric else EXIT_VALIDATION
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    for line in summary:
        log.info(line)
    return EXIT_OK

