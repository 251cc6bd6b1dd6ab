"""CSV signal files, scenario files and report tables.

Scenario files are TOML::

    [network]
    topology = "ring"          # ring | chain | two_area
    n = 20                     # nodes, or machines per area for two_area
    line_b = 1.0               # per-unit susceptance of every (intra-area) line
    weak_tie_b = 0.1           # two_area only
    nominal_frequency = 60.0
    base_power = 100.0

    [generator]                # defaults applied to every machine
    inertia = 4.0
    damping = 0.0
    rating = 100.0
    emf = 1.0
    mech_power = 0.0

    [[override]]               # optional, any generator field
    node = 3
    inertia = 6.0

    [[event]]                  # zero or more, superposed
    node = 7
    time = 1.0
    delta_p = -0.05

    [simulation]
    duration = 20.0
    dt_internal = 0.001
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, SignalFormatError
from .grid import DisturbanceEvent, GeneratorParams, SystemModel, build_benchmark
from .signals import SignalSet

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

JITTER_LIMIT = 0.01


def fmt_time(t: float) -> str:
    return f"{t:.3f}"


def fmt_value(v: float) -> str:
    return repr(float(v))


def write_signals_csv(signals: SignalSet, path: str | Path) -> None:
    """Header ``time,<label>...``; time to the millisecond, values round-trip exact."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", *signals.labels])
        for t, row in zip(signals.times, signals.data.T):
            w.writerow([fmt_time(t), *map(fmt_value, row)])


def load_signals_csv(path: str | Path) -> SignalSet:
    """Read a ``time,...`` CSV; the sample rate comes from the median time step."""
    path = Path(path)
    if not path.is_file():
        raise SignalFormatError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise SignalFormatError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if not header or header[0].lower() != "time":
        raise SignalFormatError(f"{path}: first header column must be 'time'")
    labels = header[1:]
    dup = sorted({x for x in labels if labels.count(x) > 1})
    if dup:
        raise SignalFormatError(f"{path}: duplicate channel labels: {', '.join(dup)}")
    body = rows[1:]
    if len(body) < 2:
        raise SignalFormatError(f"{path}: need at least two samples, found {len(body)}")
    values = np.empty((len(body), len(header)))
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise SignalFormatError(
                f"{path}: row {r} has {len(row)} cells, header has {len(header)}"
            )
        for c, cell in enumerate(row):
            cell = cell.strip()
            if not cell:
                raise SignalFormatError(f"{path}: missing value at row {r}, column {header[c]!r}")
            try:
                values[r - 2, c] = float(cell)
            except ValueError:
                raise SignalFormatError(
                    f"{path}: bad value {cell!r} at row {r}, column {header[c]!r}"
                ) from None
    t = values[:, 0]
    steps = np.diff(t)
    step = float(np.median(steps))
    if not step > 0:
        raise SignalFormatError(f"{path}: time column is not increasing")
    jitter = float(np.max(np.abs(steps - step)))
    if jitter > JITTER_LIMIT * step:
        raise SignalFormatError(
            f"{path}: nonuniform sampling (step jitter {jitter:.3g} s on a {step:.6g} s step)"
        )
    fs = float(np.round(1.0 / step, 6))
    return SignalSet(fs, float(t[0]), tuple(labels), values[:, 1:].T)


@dataclass(frozen=True)
class Scenario:
    model: SystemModel
    events: tuple[DisturbanceEvent, ...]
    duration: float
    dt_internal: float

    @property
    def event_time(self) -> float | None:
        active = [e.time for e in self.events if e.delta_p != 0]
        return min(active) if active else None


_GEN_FIELDS = {f.name for f in fields(GeneratorParams)}
_NETWORK_KEYS = {"topology", "n", "line_b", "weak_tie_b", "nominal_frequency", "base_power"}


def _check_keys(section: str, table: dict, allowed: set) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(f"scenario [{section}]: unknown keys {', '.join(extra)}")


def parse_scenario(doc: dict[str, Any]) -> Scenario:
    _check_keys("top level", doc, {"network", "generator", "override", "event", "simulation"})
    net = doc.get("network")
    if not isinstance(net, dict):
        raise ConfigError("scenario needs a [network] table")
    _check_keys("network", net, _NETWORK_KEYS)
    gen = doc.get("generator", {})
    _check_keys("generator", gen, _GEN_FIELDS)
    overrides = {}
    for ov in doc.get("override", []):
        ov = dict(ov)
        if "node" not in ov:
            raise ConfigError("scenario [[override]] needs a node")
        node = int(ov.pop("node"))
        _check_keys("override", ov, _GEN_FIELDS)
        overrides[node] = ov
    sim = doc.get("simulation", {})
    _check_keys("simulation", sim, {"duration", "dt_internal"})
    try:
        model = build_benchmark(
            net.get("topology", "ring"),
            int(net["n"]),
            GeneratorParams(**gen),
            overrides,
            line_b=float(net.get("line_b", 1.0)),
            weak_tie_b=net.get("weak_tie_b"),
            nominal_frequency=float(net.get("nominal_frequency", 60.0)),
            base_power=float(net.get("base_power", 100.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"scenario [network] missing {exc}") from None
    events = []
    for ev in doc.get("event", []):
        _check_keys("event", ev, {"node", "time", "delta_p"})
        try:
            events.append(DisturbanceEvent(int(ev["node"]), float(ev["time"]), float(ev["delta_p"])))
        except KeyError as exc:
            raise ConfigError(f"scenario [[event]] missing {exc}") from None
    return Scenario(model, tuple(events), float(sim.get("duration", 20.0)),
                    float(sim.get("dt_internal", 1e-3)))


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_scenario(doc)


def write_table(path: str | Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_json(path: str | Path, payload: Any) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
