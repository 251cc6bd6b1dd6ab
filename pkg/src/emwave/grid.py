"""Multi-machine swing-equation network and its step-disturbance response.

Machines sit directly on the nodes of a lossless susceptance network
(classical model, no load buses).  Each machine obeys

    M_i * d2(delta_i)/dt2 = Pm_i - sum_j E_i E_j B_ij sin(delta_i - delta_j) - D_i * w_i / w0

with everything on the system base: ``M_i = 2 H_i S_i / (w0 Sbase)``,
``Pm`` and ``D`` scaled by ``S_i / Sbase``, ``w`` the speed deviation in
rad/s and ``w0 = 2 pi f0``.  The channel recorded for machine ``i`` is its
frequency deviation ``w_i / (2 pi)`` in Hz.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DisconnectedTopologyError,
    NoEquilibriumError,
    ValidationError,
)
from .signals import SignalSet, lowpass_decimate

OUTPUT_RATE = 10.0
STEADY_STATE_TOL = 1e-8


@dataclass(frozen=True)
class GeneratorParams:
    """Machine data on its own rating.

    ``inertia`` is H in seconds, ``damping`` is per-unit torque per per-unit
    speed, ``rating`` is S in MVA, ``emf`` is the internal voltage magnitude
    and ``mech_power`` the per-unit mechanical input (negative for a net
    load).
    """

    inertia: float = 4.0
    damping: float = 0.0
    rating: float = 100.0
    emf: float = 1.0
    mech_power: float = 0.0

    def __post_init__(self):
        if not self.inertia > 0:
            raise ValidationError(f"inertia constant must be positive, got {self.inertia}")
        if not self.damping >= 0:
            raise ValidationError(f"damping must be non-negative, got {self.damping}")
        if not self.rating > 0:
            raise ValidationError(f"rating must be positive, got {self.rating}")
        if not self.emf > 0:
            raise ValidationError(f"internal EMF must be positive, got {self.emf}")


@dataclass(frozen=True)
class DisturbanceEvent:
    """Step change of mechanical power at ``node`` from ``time`` on (system per-unit)."""

    node: int
    time: float
    delta_p: float

    def __post_init__(self):
        if not self.time >= 0:
            raise ValidationError(f"event time must be >= 0, got {self.time}")


@dataclass(frozen=True)
class SystemModel:
    generators: tuple[GeneratorParams, ...]
    lines: tuple[tuple[int, int, float], ...]
    nominal_frequency: float
    base_power: float
    initial_angles: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        gens = tuple(self.generators)
        n = len(gens)
        if n < 1:
            raise ValidationError("model needs at least one generator")
        if not self.nominal_frequency > 0 or not self.base_power > 0:
            raise ValidationError("nominal frequency and base power must be positive")
        lines = tuple((int(i), int(j), float(b)) for i, j, b in self.lines)
        for i, j, b in lines:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValidationError(f"line ({i}, {j}) does not join two distinct nodes")
            if not b > 0:
                raise ValidationError(f"line ({i}, {j}) susceptance must be positive, got {b}")
        _check_connected(n, lines)
        angles = np.array(self.initial_angles, dtype=float)
        if angles.shape != (n,):
            raise ValidationError(f"expected {n} initial angles, got shape {angles.shape}")
        angles.setflags(write=False)
        labels = tuple(self.labels) or channel_labels(n)
        if len(labels) != n or len(set(labels)) != n:
            raise ValidationError("need one unique label per generator")
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "lines", lines)
        object.__setattr__(self, "initial_angles", angles)
        object.__setattr__(self, "labels", labels)
        resid = np.max(np.abs(power_mismatch(self, angles)), initial=0.0)
        if resid >= STEADY_STATE_TOL:
            raise ValidationError(
                f"initial angles are not a steady state (residual {resid:.3g} pu)"
            )

    @property
    def n(self) -> int:
        return len(self.generators)

    @property
    def omega0(self) -> float:
        return 2 * math.pi * self.nominal_frequency

    @property
    def inertia_weights(self) -> np.ndarray:
        """H_i * S_i in MW s."""
        return np.array([g.inertia * g.rating for g in self.generators])

    @property
    def aggregate_inertia(self) -> float:
        """Sum of H_i S_i over the system base, in seconds."""
        return float(self.inertia_weights.sum() / self.base_power)

    @property
    def mech_power(self) -> np.ndarray:
        return np.array([g.mech_power * g.rating / self.base_power for g in self.generators])

    def node_distances(self, source: int) -> np.ndarray:
        """Hop count from ``source`` to every node."""
        adj = _adjacency(self.n, self.lines)
        dist = np.full(self.n, -1)
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist


def channel_labels(n: int) -> tuple[str, ...]:
    width = max(2, len(str(n - 1)))
    return tuple(f"g{i:0{width}d}" for i in range(n))


def _adjacency(n, lines):
    adj = [[] for _ in range(n)]
    for i, j, _ in lines:
        adj[i].append(j)
        adj[j].append(i)
    return adj


def _check_connected(n, lines):
    adj = _adjacency(n, lines)
    seen = {0}
    stack = [0]
    while stack:
        for v in adj[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != n:
        raise DisconnectedTopologyError(
            f"disconnected topology: {n - len(seen)} of {n} nodes unreachable from node 0"
        )


class _Network:
    """Dense incidence form of the model, for the integrator and power flow."""

    def __init__(self, generators, lines):
        n = len(generators)
        m = len(lines)
        self.incidence = np.zeros((m, n))
        emf = np.array([g.emf for g in generators])
        self.coupling = np.empty(m)
        for k, (i, j, b) in enumerate(lines):
            self.incidence[k, i] = 1.0
            self.incidence[k, j] = -1.0
            self.coupling[k] = emf[i] * emf[j] * b

    def electrical_power(self, delta):
        return self.incidence.T @ (self.coupling * np.sin(self.incidence @ delta))

    def jacobian(self, delta):
        w = self.coupling * np.cos(self.incidence @ delta)
        return self.incidence.T @ (w[:, None] * self.incidence)


def power_mismatch(model: SystemModel, delta: np.ndarray) -> np.ndarray:
    """Mechanical minus electrical power per node (system per-unit)."""
    net = _Network(model.generators, model.lines)
    return model.mech_power - net.electrical_power(np.asarray(delta, float))


def solve_steady_state(
    generators: Sequence[GeneratorParams],
    lines: Sequence[tuple[int, int, float]],
    base_power: float,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> np.ndarray:
    """Newton power flow with node 0 as angle reference.

    A lossless machine network only balances when the mechanical inputs sum
    to zero; otherwise there is no equilibrium.
    """
    n = len(generators)
    pm = np.array([g.mech_power * g.rating / base_power for g in generators])
    if abs(pm.sum()) > 1e-12 * max(1.0, np.abs(pm).sum()):
        raise NoEquilibriumError(
            f"no equilibrium: mechanical power sums to {pm.sum():.6g} pu in a lossless network"
        )
    delta = np.zeros(n)
    if not np.any(pm):
        return delta
    net = _Network(generators, lines)
    for _ in range(max_iter):
        resid = pm - net.electrical_power(delta)
        if np.max(np.abs(resid)) < tol:
            break
        jac = net.jacobian(delta)[1:, 1:]
        try:
            step = np.linalg.solve(jac, resid[1:])
        except np.linalg.LinAlgError:
            raise NoEquilibriumError("no equilibrium: singular power-flow Jacobian") from None
        delta[1:] += step
    else:
        raise NoEquilibriumError("no equilibrium: Newton power flow did not converge")
    if np.any(np.abs(net.incidence @ delta) >= math.pi / 2):
        raise NoEquilibriumError("no equilibrium: line angle exceeds pi/2 at the solution")
    return delta


def make_model(
    generators: Sequence[GeneratorParams],
    lines: Iterable[tuple[int, int, float]],
    nominal_frequency: float = 60.0,
    base_power: float = 100.0,
    labels: Sequence[str] = (),
) -> SystemModel:
    """Assemble a model and solve its operating point.

    Zero-susceptance lines are treated as open; negative ones are rejected.
    """
    kept = []
    for i, j, b in lines:
        if b < 0:
            raise ValidationError(f"line ({i}, {j}) susceptance must be positive, got {b}")
        if b > 0:
            kept.append((int(i), int(j), float(b)))
    _check_connected(len(generators), kept)
    angles = solve_steady_state(generators, kept, base_power)
    return SystemModel(tuple(generators), tuple(kept), nominal_frequency, base_power, angles,
                       tuple(labels))


class Topology(str, Enum):
    RING = "ring"
    CHAIN = "chain"
    TWO_AREA = "two_area"


def build_benchmark(
    topology: str | Topology,
    n: int,
    params: GeneratorParams | None = None,
    overrides: Mapping[int, Mapping[str, float]] | None = None,
    line_b: float = 1.0,
    weak_tie_b: float | None = None,
    nominal_frequency: float = 60.0,
    base_power: float = 100.0,
) -> SystemModel:
    """Ring, chain or two-area test network.

    For ``two_area`` ``n`` is the machine count per area; each area is fully
    meshed with ``line_b`` and a single ``weak_tie_b`` line joins the last
    machine of area 1 to the first of area 2.  ``overrides`` maps a node to
    replacement :class:`GeneratorParams` fields.
    """
    topology = Topology(topology)
    if n < 2:
        raise ValidationError(f"benchmark needs at least 2 nodes, got {n}")
    params = params or GeneratorParams()
    if topology is Topology.TWO_AREA:
        if weak_tie_b is None:
            raise ValidationError("two_area topology needs weak_tie_b")
        if not weak_tie_b < line_b:
            raise ValidationError(
                f"weak tie ({weak_tie_b}) must be weaker than intra-area lines ({line_b})"
            )
        total = 2 * n
        lines = []
        for area in range(2):
            base = area * n
            lines += [(base + i, base + j, line_b) for i in range(n) for j in range(i + 1, n)]
        lines.append((n - 1, n, weak_tie_b))
    else:
        total = n
        lines = [(i, i + 1, line_b) for i in range(n - 1)]
        if topology is Topology.RING and n > 2:
            lines.append((n - 1, 0, line_b))
    overrides = overrides or {}
    for node in overrides:
        if not 0 <= node < total:
            raise ValidationError(f"override for unknown node {node}")
    gens = [replace(params, **dict(overrides.get(i, {}))) for i in range(total)]
    return make_model(gens, lines, nominal_frequency, base_power)


@dataclass(frozen=True)
class Trajectory:
    """Internal-rate integration output: angles (rad) and speed deviations (rad/s)."""

    times: np.ndarray
    delta: np.ndarray
    omega: np.ndarray
    loss_of_synchronism: bool
    loss_of_synchronism_time: float | None


def _as_events(events) -> tuple[DisturbanceEvent, ...]:
    if events is None:
        return ()
    if isinstance(events, DisturbanceEvent):
        return (events,)
    return tuple(events)


def integrate(
    model: SystemModel,
    events=None,
    duration: float = 10.0,
    dt: float = 1e-3,
    omega_init: np.ndarray | None = None,
) -> Trajectory:
    """Fixed-step RK4 from the model's operating point.

    Each event's power step takes effect from the first grid instant at or
    after its time and is held constant within every step.
    """
    events = _as_events(events)
    if not 0 < dt <= 0.01:
        raise ValidationError(f"dt_internal must be in (0, 0.01] s, got {dt}")
    if not duration > 0:
        raise ValidationError("duration must be positive")
    for ev in events:
        if not 0 <= ev.node < model.n:
            raise ValidationError(f"event node {ev.node} not in model (0..{model.n - 1})")
        if ev.time >= duration:
            raise ValidationError(f"duration {duration} must exceed event time {ev.time}")

    n_steps = int(round(duration / dt))
    net = _Network(model.generators, model.lines)
    inc, coup = net.incidence, net.coupling
    w0 = model.omega0
    m = 2 * model.inertia_weights / (w0 * model.base_power)
    damp = np.array([g.damping * g.rating for g in model.generators]) / (model.base_power * w0)
    pm_base = model.mech_power

    switch = sorted((int(math.ceil(ev.time / dt - 1e-9)), ev.node, ev.delta_p) for ev in events)

    delta = model.initial_angles.copy()
    omega = np.zeros(model.n) if omega_init is None else np.array(omega_init, dtype=float)
    out_d = np.empty((n_steps + 1, model.n))
    out_w = np.empty((n_steps + 1, model.n))
    out_d[0], out_w[0] = delta, omega
    pm = pm_base.copy()
    lost_at = None
    half = 0.5 * dt
    k = 0

    def accel(d, w):
        return (pm - inc.T @ (coup * np.sin(inc @ d)) - damp * w) / m

    for step in range(n_steps):
        while k < len(switch) and switch[k][0] <= step:
            pm[switch[k][1]] += switch[k][2]
            k += 1
        a1 = accel(delta, omega)
        w2 = omega + half * a1
        a2 = accel(delta + half * omega, w2)
        w3 = omega + half * a2
        a3 = accel(delta + half * w2, w3)
        w4 = omega + dt * a3
        a4 = accel(delta + dt * w3, w4)
        delta = delta + dt / 6 * (omega + 2 * w2 + 2 * w3 + w4)
        omega = omega + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        out_d[step + 1], out_w[step + 1] = delta, omega
        if lost_at is None and inc.size and np.max(np.abs(inc @ delta)) > math.pi / 2:
            lost_at = (step + 1) * dt

    times = np.arange(n_steps + 1) * dt
    return Trajectory(times, out_d, out_w, lost_at is not None, lost_at)


def system_energy(model: SystemModel, delta: np.ndarray, omega: np.ndarray,
                  mech_power: np.ndarray | None = None) -> np.ndarray:
    """Kinetic plus line potential energy minus mechanical work (pu * s).

    Conserved exactly by the undamped dynamics with constant mechanical
    power; works on single states or on (time, node) arrays.
    """
    net = _Network(model.generators, model.lines)
    m = 2 * model.inertia_weights / (model.omega0 * model.base_power)
    pm = model.mech_power if mech_power is None else mech_power
    delta = np.atleast_2d(delta)
    omega = np.atleast_2d(omega)
    kinetic = 0.5 * (omega**2) @ m
    potential = (1 - np.cos(delta @ net.incidence.T)) @ net.coupling
    return kinetic + potential - delta @ pm


def simulate(
    model: SystemModel,
    event=None,
    duration: float = 20.0,
    dt_internal: float = 1e-3,
) -> SignalSet:
    """Integrate a disturbance and return 10 Hz frequency-deviation channels.

    ``event`` may be a single :class:`DisturbanceEvent`, a sequence of them
    (superposed) or ``None``.  Loss of synchronism (a line angle beyond pi/2)
    is reported in ``metadata`` rather than raised.
    """
    events = _as_events(event)
    if not 0 < dt_internal <= 0.01:
        raise ValidationError(f"dt_internal must be in (0, 0.01] s, got {dt_internal}")
    fs_internal = 1.0 / dt_internal
    q = int(round(fs_internal / OUTPUT_RATE))
    if abs(q * dt_internal * OUTPUT_RATE - 1.0) > 1e-9:
        raise ValidationError(
            f"dt_internal {dt_internal} must divide the {1 / OUTPUT_RATE:g} s output period"
        )
    traj = integrate(model, events, duration, dt_internal)
    freq = traj.omega.T / (2 * math.pi)
    out = lowpass_decimate(freq, q * OUTPUT_RATE, OUTPUT_RATE)
    meta = {
        "loss_of_synchronism": traj.loss_of_synchronism,
        "loss_of_synchronism_time": traj.loss_of_synchronism_time,
        "events": [(ev.node, ev.time, ev.delta_p) for ev in events],
        "dt_internal": dt_internal,
    }
    return SignalSet(OUTPUT_RATE, 0.0, model.labels, out, meta)


def coi_frequency(model: SystemModel, signals: SignalSet, label: str = "COI") -> SignalSet:
    """Inertia-weighted mean of the machine channels."""
    if len(signals.labels) != model.n:
        raise ValidationError(
            f"{len(signals.labels)} channels for {model.n} generators"
        )
    w = model.inertia_weights
    coi = (w @ signals.data) / w.sum()
    return SignalSet(signals.sample_rate, signals.start_time, (label,), coi[None, :],
                     signals.metadata)
