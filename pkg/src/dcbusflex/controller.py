"""Event-triggered bus voltage controller.

On a confirmed voltage excursion the controller estimates the missing power
from the system droop curve, scores every droop node by its competition
coefficient (weight x power reserve x energy reserve) and hands the
correction to the best-ranked nodes as droop-curve shifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .bus import BusCollapse, SystemDroop, aggregate_droop
from .comms import Alarm, LockNotice, ShiftCommand, Telemetry
from .node import CURRENT_SOURCE, LOCKED, VOLTAGE_SOURCE, DroopCurve, NodeState
from .scenario import BusSpec, ControllerSpec, NodeSpec

TIE_RTOL = 1e-9


@dataclass(frozen=True)
class TripEvent:
    t: float
    u: float
    delta_u: float


@dataclass(frozen=True)
class CompetitionEntry:
    node: str
    delta: float
    beta: float
    gamma: float
    coeff: float
    headroom: float
    locked: bool = False


@dataclass(frozen=True)
class AllocationPlan:
    requested: float
    entries: tuple[tuple[str, float], ...]
    deficit: float

    def allocated(self, node: str) -> float:
        for name, p in self.entries:
            if name == node:
                return p
        return 0.0


@dataclass(frozen=True)
class Dispatch:
    """Everything the controller decided at one confirmed trip."""

    trip: TripEvent
    system: SystemDroop
    requested: float
    ranking: tuple[CompetitionEntry, ...]
    plan: AllocationPlan


def check_trip(u: float, u_nominal: float, du_set: float) -> float | None:
    """Voltage deviation ``u - u_nominal`` if it leaves the dead band, else None."""
    du = u - u_nominal
    if abs(du) > du_set:
        return du
    return None


def estimate_unbalance(delta_u: float, sys: SystemDroop) -> float:
    """Extra injection (kW) needed to bring the bus back by ``delta_u``."""
    return -delta_u / sys.k_sys


def at_limit(node: NodeState) -> bool:
    """True when the reported operating point sits on the node's power rating."""
    return abs(node.p_target) >= node.spec.p_rated * (1.0 - 1e-9)


def power_at_nominal(node: NodeState, u: float, u_nominal: float) -> float:
    """Output the node settles at once the bus is back at ``u_nominal``.

    A node on its droop line slides along it; a node pinned at its rating
    has left the line, so its curve is evaluated directly.
    """
    if at_limit(node):
        return (node.curve.no_load_voltage - u_nominal) / node.curve.k
    return node.p_target + (u - u_nominal) / node.curve.k


def estimate_unbalance_limited(delta_u: float, sys: SystemDroop,
                               views: Sequence[NodeState], u_nominal: float) -> float:
    """Missing power when some droop nodes may be pinned at their rating.

    Nodes still on their droop line contribute ``-delta_u / k``; a pinned
    node contributes the gap between its rating and its on-curve output at
    nominal voltage. With no node pinned this reduces to
    :func:`estimate_unbalance`.
    """
    active = [v for v in views if v.is_droop]
    pinned = [v for v in active if at_limit(v)]
    if not pinned:
        return estimate_unbalance(delta_u, sys)
    u = u_nominal + delta_u
    g_free = sum(1.0 / v.curve.k for v in active if not at_limit(v))
    return -delta_u * g_free + sum(v.p_target - power_at_nominal(v, u, u_nominal)
                                   for v in pinned)


def power_reserve(p_rated: float, p: float) -> float:
    return abs(p_rated - p) / p_rated


def energy_reserve(node: NodeState, direction: float, mode: str = "paper_literal") -> float:
    """Normalized energy reserve in [0, 1].

    Non-storage ports are always 1. In ``paper_literal`` mode a storage port
    scores its SOC fraction whatever the request direction; ``direction_aware``
    scores free capacity instead when the request is an absorption.
    """
    if node.soc_pct is None or not node.spec.is_storage:
        return 1.0
    soc = node.soc_pct / 100.0
    if mode == "direction_aware" and direction < 0:
        return 1.0 - soc
    return soc


def competition_coefficient(delta: float, beta: float, gamma: float, locked: bool) -> float:
    if locked:
        return 0.0
    return delta * beta * gamma


def headroom(p_rated: float, p: float, direction: float) -> float:
    """Power a node can still add in the requested direction."""
    room = p_rated - p if direction >= 0 else p_rated + p
    return max(room, 0.0)


def _tie_groups(entries: list[CompetitionEntry]) -> list[list[CompetitionEntry]]:
    ordered = sorted(entries, key=lambda e: (-e.coeff, e.node))
    groups: list[list[CompetitionEntry]] = []
    for e in ordered:
        if groups and math.isclose(e.coeff, groups[-1][0].coeff, rel_tol=TIE_RTOL, abs_tol=0.0):
            groups[-1].append(e)
        else:
            groups.append([e])
    return groups


def _split_equally(amount: float, group: list[CompetitionEntry]) -> dict[str, float]:
    # water filling: members that run out of headroom pass the rest on
    out: dict[str, float] = {}
    left = amount
    members = sorted(group, key=lambda e: (e.headroom, e.node))
    while members and left > 0:
        share = left / len(members)
        e = members[0]
        if e.headroom <= share:
            out[e.node] = e.headroom
            left -= e.headroom
            members.pop(0)
        else:
            for m in members:
                out[m.node] = share
            left = 0.0
            members = []
    return out


def rank_and_allocate(requested: float, entries: Iterable[CompetitionEntry]) -> AllocationPlan:
    """Greedy fill of ``requested`` (kW, signed) in descending coefficient order.

    Locked entries never receive power; unlocked entries with a zero score
    still rank, behind every positive score. Entries whose
    coefficients agree to a relative 1e-9 split their share equally.
    Whatever exceeds the combined headroom is returned as ``deficit``.
    """
    if requested == 0:
        return AllocationPlan(0.0, (), 0.0)
    sign = 1.0 if requested > 0 else -1.0
    remaining = abs(requested)
    live = [e for e in entries if not e.locked]
    allocations: list[tuple[str, float]] = []
    for group in _tie_groups(live):
        if remaining <= 0:
            break
        cap = sum(e.headroom for e in group)
        if cap <= remaining:
            shares = {e.node: e.headroom for e in group}
            remaining -= cap
        else:
            shares = _split_equally(remaining, group)
            remaining = 0.0
        for e in sorted(group, key=lambda e: e.node):
            p = shares.get(e.node, 0.0)
            if p > 0:
                allocations.append((e.node, sign * p))
    allocated = sum(p for _, p in allocations)
    return AllocationPlan(requested, tuple(allocations), requested - allocated)


def rank(entries: Iterable[CompetitionEntry]) -> list[CompetitionEntry]:
    """Entries in allocation priority order."""
    return [e for g in _tie_groups(list(entries)) for e in g]


@dataclass
class FlexibleController:
    """Sequential controller state machine, driven once per control period."""

    bus: BusSpec
    settings: ControllerSpec
    roster: Sequence[NodeSpec]
    counter: int = 0
    last_dispatch_t: float | None = None
    tripped: bool = False
    trips: list[TripEvent] = field(default_factory=list)
    dispatches: list[Dispatch] = field(default_factory=list)
    alarms: list[Alarm] = field(default_factory=list)
    commanded_shift: dict[str, float] = field(default_factory=dict)
    lock_notices: set[str] = field(default_factory=set)

    def __post_init__(self):
        self._specs = {n.id: n for n in self.roster}

    @property
    def dispatch_count(self) -> int:
        return len(self.dispatches)

    @property
    def total_deficit(self) -> float:
        return sum(abs(d.plan.deficit) for d in self.dispatches)

    def receive(self, msg) -> None:
        """Field-bus messages in arrival order; a later unlocked report clears a lock notice."""
        if isinstance(msg, LockNotice):
            self.lock_notices.add(msg.node)
        elif isinstance(msg, Telemetry) and not msg.locked:
            self.lock_notices.discard(msg.node)

    def _view(self, t: Telemetry) -> NodeState:
        spec = self._specs[t.node]
        locked = t.locked or t.mode == LOCKED or t.node in self.lock_notices
        mode = t.mode if t.mode in (VOLTAGE_SOURCE, CURRENT_SOURCE) else VOLTAGE_SOURCE
        return NodeState(
            spec=spec,
            mode=mode,
            curve=DroopCurve(spec.u_ref, spec.k, self.commanded_shift.get(t.node, 0.0)),
            p_out=t.p,
            p_target=t.p,
            soc_pct=t.soc_pct,
            locked=locked,
        )

    def competition(self, views: Sequence[NodeState], direction: float,
                    u: float) -> list[CompetitionEntry]:
        """Score every voltage-source node seen in telemetry.

        Headroom is measured from the power each node will carry once the
        bus is back at nominal voltage (see :func:`power_at_nominal`), so a
        shift of x kW ends up as exactly x kW of extra output after
        restoration.
        """
        out = []
        u_n = self.bus.u_nominal
        for v in views:
            if v.mode != VOLTAGE_SOURCE:
                continue
            beta = power_reserve(v.spec.p_rated, v.p_target)
            gamma = energy_reserve(v, direction, self.settings.gamma_mode)
            p_restored = power_at_nominal(v, u, u_n)
            out.append(CompetitionEntry(
                node=v.id,
                delta=v.spec.weight,
                beta=beta,
                gamma=gamma,
                coeff=competition_coefficient(v.spec.weight, beta, gamma, v.locked),
                headroom=0.0 if v.locked else headroom(v.spec.p_rated, p_restored, direction),
                locked=v.locked,
            ))
        return out

    def control_cycle(self, now: float, measured_u: float,
                      telemetry: Iterable[Telemetry]) -> list[ShiftCommand] | None:
        du = check_trip(measured_u, self.bus.u_nominal, self.bus.du_set)
        self.tripped = du is not None
        if du is None:
            self.counter = 0
            return None
        self.counter += 1
        if self.counter < self.settings.debounce_samples:
            return None
        if (self.last_dispatch_t is not None
                and now - self.last_dispatch_t < self.settings.inhibit_window - 1e-9):
            return None

        self.counter = 0
        trip = TripEvent(now, measured_u, du)
        self.trips.append(trip)
        views = [self._view(t) for t in telemetry if t.node in self._specs]
        try:
            system = aggregate_droop(views)
        except BusCollapse as exc:
            self.alarms.append(Alarm(f"t={now:.6f}s bus collapse: {exc}"))
            return None

        requested = estimate_unbalance_limited(du, system, views, self.bus.u_nominal)
        entries = self.competition(views, requested, measured_u)
        plan = rank_and_allocate(requested, entries)
        self.dispatches.append(Dispatch(trip, system, requested, tuple(rank(entries)), plan))
        self.last_dispatch_t = now
        if abs(plan.deficit) > 1e-9:
            self.alarms.append(Alarm(f"t={now:.6f}s unallocated {plan.deficit:+.6f} kW"))
        commands = []
        for node, p in plan.entries:
            self.commanded_shift[node] = self.commanded_shift.get(node, 0.0) + p
            commands.append(ShiftCommand(node, p))
        return commands
