"""Fixed-step simulation loop.

Each step runs in a fixed order: scenario events, command delivery, bus
solution, node lag and SOC update, controller (every control period), trace
record. The order is part of the contract; it is what makes runs repeatable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bus import BusCollapse, solve_bus
from .comms import Alarm, Channel, ChannelConfig, LockNotice, ShiftCommand, Telemetry
from .controller import Dispatch, FlexibleController, TripEvent
from .node import CURRENT_SOURCE, LOCKED, NodeState, RejectedCommand, apply_shift, step_node
from .scenario import EventSpec, ScenarioSpec, validate_scenario

SHED = "shed"
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class TraceRow:
    t: float
    bus_u: float
    p_out: dict[str, float]
    mode: dict[str, str]
    soc_pct: dict[str, float]
    shift: dict[str, float]
    tripped: bool
    dispatch_count: int


@dataclass
class Trace:
    """Column store of the per-step record; node columns follow roster order."""

    node_ids: tuple[str, ...]
    t: np.ndarray
    bus_u: np.ndarray
    p_out: np.ndarray  # (steps, nodes)
    soc_pct: np.ndarray  # NaN for non-storage nodes
    shift: np.ndarray
    mode: list[tuple[str, ...]]
    tripped: np.ndarray
    dispatch_count: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def column(self, node: str, what: str = "p_out") -> np.ndarray:
        return getattr(self, what)[:, self.node_ids.index(node)]

    def row(self, i: int) -> TraceRow:
        ids = self.node_ids
        return TraceRow(
            t=float(self.t[i]),
            bus_u=float(self.bus_u[i]),
            p_out=dict(zip(ids, self.p_out[i].tolist())),
            mode=dict(zip(ids, self.mode[i])),
            soc_pct=dict(zip(ids, self.soc_pct[i].tolist())),
            shift=dict(zip(ids, self.shift[i].tolist())),
            tripped=bool(self.tripped[i]),
            dispatch_count=int(self.dispatch_count[i]),
        )

    def rows(self):
        for i in range(len(self)):
            yield self.row(i)


@dataclass(frozen=True)
class DispatchRecord:
    t: float
    node: str
    delta_p: float


@dataclass
class Summary:
    scenario: str
    final_bus_u: float
    steady_p: dict[str, float]
    final_p_cs: float
    trips: list[TripEvent]
    dispatches: list[DispatchRecord]
    total_deficit: float
    collapsed: bool = False
    collapse_t: float | None = None
    alarms: list[str] = field(default_factory=list)
    rejected: list[str] = field(default_factory=list)
    decisions: list[Dispatch] = field(default_factory=list)


class InvalidScenario(ValueError):
    def __init__(self, violations):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


def apply_event(node: NodeState, event: EventSpec) -> NodeState | None:
    """Apply one scenario event; returns None when the node is shed."""
    a = event.action
    if a == "set_power":
        return replace(node, p_set=float(event.value), mode=CURRENT_SOURCE)
    if a == "set_mode":
        if event.value == LOCKED:
            return replace(node, locked=True)
        return replace(node, mode=event.value, locked=False)
    if a == "lock":
        return replace(node, locked=True)
    if a == "unlock":
        return replace(node, locked=False)
    if a == SHED:
        return None
    raise ValueError(f"unknown action {a!r}")


def _p_cs(nodes) -> float:
    return sum(n.p_set for n in nodes if n.mode == CURRENT_SOURCE and not n.locked)


def run(spec: ScenarioSpec, channel: ChannelConfig | None = None) -> tuple[Trace, Summary]:
    """Simulate ``spec`` from t = 0 to t_end inclusive.

    ``channel`` configures both controller links; by default 10 ms latency,
    no loss, seeded from the scenario. A bus collapse ends the run early and
    is reported in the summary rather than raised.
    """
    violations = validate_scenario(spec)
    if violations:
        raise InvalidScenario(violations)
    cfg = channel or ChannelConfig(seed=spec.seed)
    uplink = Channel(cfg)
    downlink = Channel(replace(cfg, seed=cfg.seed + 1))
    ctl = FlexibleController(spec.bus, spec.controller, spec.nodes)

    ids = tuple(n.id for n in spec.nodes)
    col = {nid: i for i, nid in enumerate(ids)}
    nodes: dict[str, NodeState] = {n.id: NodeState.from_spec(n) for n in spec.nodes}
    shed: dict[str, NodeState] = {}
    latest: dict[str, Telemetry] = {}
    rejected: list[str] = []

    dt = spec.dt
    n_steps = int(round(spec.t_end / dt))
    events = list(spec.events)
    ev_i = 0
    cp = spec.controller.control_period
    ctrl_k = 0

    rows_t, rows_u, rows_p, rows_soc, rows_shift = [], [], [], [], []
    rows_mode, rows_trip, rows_disp = [], [], []
    collapse_t = None
    p_cs = 0.0

    # start at rest on the initial operating point; a collapse here is
    # reported by the first loop iteration
    try:
        sol = solve_bus(list(nodes.values()), _p_cs(nodes.values()))
    except BusCollapse:
        sol = None
    if sol is not None:
        for nid, n in nodes.items():
            if n.locked:
                p0 = 0.0
            elif n.mode == CURRENT_SOURCE:
                p0 = n.p_set
            else:
                p0 = sol.node_powers[nid]
            nodes[nid] = replace(n, p_out=p0, p_target=p0)

    for step in range(n_steps + 1):
        t = step * dt

        # 1. scenario events
        while ev_i < len(events) and events[ev_i].t <= t:
            e = events[ev_i]
            ev_i += 1
            if e.target not in nodes:
                continue
            new = apply_event(nodes[e.target], e)
            if new is None:
                shed[e.target] = replace(nodes.pop(e.target), p_out=0.0)
                latest.pop(e.target, None)
            else:
                if new.locked and not nodes[e.target].locked:
                    uplink.post(t, LockNotice(e.target))
                nodes[e.target] = new

        # 2. command delivery
        for msg in downlink.poll_due(t + _TIME_EPS):
            if isinstance(msg, ShiftCommand):
                if msg.node not in nodes:
                    rejected.append(f"t={t:.6f}s {msg.node}: node shed")
                    continue
                try:
                    nodes[msg.node] = apply_shift(nodes[msg.node], msg.delta_p)
                except RejectedCommand as exc:
                    rejected.append(f"t={t:.6f}s {exc}")

        # 3. bus solution
        active = list(nodes.values())
        p_cs = _p_cs(active)
        try:
            sol = solve_bus(active, p_cs)
        except BusCollapse as exc:
            collapse_t = t
            ctl.alarms.append(_alarm(t, f"bus collapse: {exc}"))
            break

        # 4. node dynamics
        powers = sol.node_powers
        for nid, n in nodes.items():
            nodes[nid] = step_node(n, powers.get(nid, 0.0), dt)

        # 5. controller
        if t >= ctrl_k * cp - _TIME_EPS:
            ctrl_k += 1
            for nid, n in nodes.items():
                uplink.post(t, Telemetry(nid, sol.u, n.p_target, n.mode, n.soc_pct, n.locked))
            for msg in uplink.poll_due(t + _TIME_EPS):
                if isinstance(msg, Telemetry) and msg.node in nodes:
                    latest[msg.node] = msg
                ctl.receive(msg)
            cmds = ctl.control_cycle(t, sol.u, list(latest.values()))
            for c in cmds or ():
                downlink.post(t, c)

        # 6. record
        p_row = [0.0] * len(ids)
        soc_row = [math.nan] * len(ids)
        shift_row = [0.0] * len(ids)
        mode_row = [SHED] * len(ids)
        for nid, n in nodes.items():
            i = col[nid]
            p_row[i] = n.p_out
            if n.soc_pct is not None:
                soc_row[i] = n.soc_pct
            shift_row[i] = n.curve.shift
            mode_row[i] = n.effective_mode
        for nid, n in shed.items():
            i = col[nid]
            if n.soc_pct is not None:
                soc_row[i] = n.soc_pct
            shift_row[i] = n.curve.shift
        rows_t.append(t)
        rows_u.append(sol.u)
        rows_p.append(p_row)
        rows_soc.append(soc_row)
        rows_shift.append(shift_row)
        rows_mode.append(tuple(mode_row))
        rows_trip.append(ctl.tripped)
        rows_disp.append(ctl.dispatch_count)

    shape = (len(rows_t), len(ids))
    trace = Trace(
        node_ids=ids,
        t=np.asarray(rows_t, dtype=float),
        bus_u=np.asarray(rows_u, dtype=float),
        p_out=np.asarray(rows_p, dtype=float).reshape(shape),
        soc_pct=np.asarray(rows_soc, dtype=float).reshape(shape),
        shift=np.asarray(rows_shift, dtype=float).reshape(shape),
        mode=rows_mode,
        tripped=np.asarray(rows_trip, dtype=bool),
        dispatch_count=np.asarray(rows_disp, dtype=int),
    )
    return trace, _summarize(spec, trace, ctl, p_cs, collapse_t, rejected)


def _alarm(t, text):
    return Alarm(f"t={t:.6f}s {text}")


def _summarize(spec, trace, ctl, p_cs, collapse_t, rejected) -> Summary:
    n = len(trace)
    if n:
        tail = max(1, int(math.ceil(0.1 * n)))
        means = trace.p_out[-tail:].mean(axis=0)
        steady = {nid: float(means[i]) for i, nid in enumerate(trace.node_ids)}
        final_u = float(trace.bus_u[-1])
    else:
        steady = {nid: math.nan for nid in trace.node_ids}
        final_u = math.nan
    dispatches = [
        DispatchRecord(d.trip.t, node, p) for d in ctl.dispatches for node, p in d.plan.entries
    ]
    return Summary(
        scenario=spec.name,
        final_bus_u=final_u,
        steady_p=steady,
        final_p_cs=p_cs,
        trips=list(ctl.trips),
        dispatches=dispatches,
        total_deficit=ctl.total_deficit,
        collapsed=collapse_t is not None,
        collapse_t=collapse_t,
        alarms=[a.text for a in ctl.alarms],
        rejected=rejected,
        decisions=list(ctl.dispatches),
    )
