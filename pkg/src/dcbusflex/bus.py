"""Quasi-static DC bus solution.

Every droop node behaves as a virtual conductance ``1/k`` behind its no-load
voltage, so the bus voltage follows from one linear power balance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .node import NodeState


_BALANCE_TOL = 1e-9


class BusCollapse(RuntimeError):
    """No voltage-source node is left to define the bus voltage."""


@dataclass(frozen=True)
class SystemDroop:
    k_sys: float
    u_ref_sys: float
    members: tuple[str, ...]


@dataclass(frozen=True)
class BusSolution:
    u: float
    node_powers: dict[str, float]
    p_cs: float
    residual: float
    saturated: tuple[str, ...] = field(default=())


def _eligible(nodes: Sequence[NodeState]) -> list[NodeState]:
    return [n for n in nodes if n.is_droop]


def aggregate_droop(nodes: Sequence[NodeState]) -> SystemDroop:
    """Parallel combination of the droop curves of all active voltage-source nodes."""
    members = _eligible(nodes)
    if not members:
        raise BusCollapse("no voltage-source node in the parallel set")
    g = sum(1.0 / n.curve.k for n in members)
    k_sys = 1.0 / g
    u_ref_sys = k_sys * sum(n.curve.no_load_voltage / n.curve.k for n in members)
    return SystemDroop(k_sys, u_ref_sys, tuple(n.id for n in members))


def _balance_voltage(free: list[NodeState], p_fixed: float) -> float:
    num = sum(n.curve.u_ref / n.curve.k + n.curve.shift for n in free) + p_fixed
    den = sum(1.0 / n.curve.k for n in free)
    return num / den


def _on_curve(n: NodeState, u: float) -> float:
    return (n.curve.no_load_voltage - u) / n.curve.k


def _limited(n: NodeState, u: float) -> float:
    lim = n.spec.p_rated
    return min(max(_on_curve(n, u), -lim), lim)


def solve_bus(nodes: Sequence[NodeState], p_cs: float) -> BusSolution:
    """Solve the bus voltage balancing droop nodes against ``p_cs`` (kW).

    A droop node whose on-curve power would exceed its rating is pinned at
    the limit and leaves the parallel set. The net injection is piecewise
    linear and nonincreasing in the bus voltage, with a kink wherever a node
    reaches a limit; the segment containing the balance point fixes which
    nodes are pinned, and the closed form over the remaining nodes gives
    the voltage.
    """
    eligible = _eligible(nodes)
    if not eligible:
        raise BusCollapse("no voltage-source node in the parallel set")

    def net(u):
        return p_cs + sum(_limited(n, u) for n in eligible)

    # below kink_lo the node delivers +p_rated, above kink_hi it absorbs p_rated
    kinks = []
    for n in eligible:
        u0, span = n.curve.no_load_voltage, n.curve.k * n.spec.p_rated
        kinks.append((u0 - span, u0 + span))
    points = sorted({b for pair in kinks for b in pair})
    values = [net(b) for b in points]
    if values[0] < -_BALANCE_TOL or values[-1] > _BALANCE_TOL:
        raise BusCollapse("load exceeds the combined rating of the voltage-source nodes")

    # first segment whose right end has run out of surplus
    j = next(i for i in range(len(points) - 1) if values[i + 1] <= 0 or i == len(points) - 2)
    a, b = points[j], points[j + 1]
    pinned: dict[str, float] = {}
    free = []
    for n, (lo, hi) in zip(eligible, kinks):
        if lo <= a and b <= hi:
            free.append(n)
        else:
            pinned[n.id] = n.spec.p_rated if b <= lo else -n.spec.p_rated
    if not free:
        raise BusCollapse("every voltage-source node is at its power limit")
    u = _balance_voltage(free, p_cs + sum(pinned.values()))

    powers = {n.id: pinned.get(n.id, _on_curve(n, u)) for n in eligible}
    residual = sum(powers.values()) + p_cs
    return BusSolution(u, powers, p_cs, residual, tuple(pinned))
