"""Behavioral model of one converter port on the DC bus.

The inner voltage/current loops are replaced by a first-order lag of the
output power toward the operating point the bus solution assigns to the node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .scenario import NodeSpec

VOLTAGE_SOURCE = "voltage_source"
CURRENT_SOURCE = "current_source"
LOCKED = "locked"


class RejectedCommand(RuntimeError):
    """A curve-shift command was sent to a node that cannot accept it."""


@dataclass(frozen=True)
class DroopCurve:
    u_ref: float
    k: float
    shift: float = 0.0

    @property
    def no_load_voltage(self) -> float:
        """Voltage at zero output power, including the accumulated shift."""
        return self.u_ref + self.k * self.shift


def droop_voltage(curve: DroopCurve, p_out: float) -> float:
    """Port voltage reference for output power ``p_out`` (kW) on ``curve``."""
    return curve.u_ref - curve.k * (p_out - curve.shift)


@dataclass(frozen=True)
class NodeState:
    spec: NodeSpec
    mode: str
    curve: DroopCurve
    p_out: float = 0.0
    p_target: float = 0.0
    soc_pct: float | None = None
    locked: bool = False
    p_set: float = 0.0

    @classmethod
    def from_spec(cls, spec: NodeSpec) -> NodeState:
        locked = spec.initial_mode == LOCKED
        # a node that starts locked returns to droop operation on unlock
        mode = VOLTAGE_SOURCE if locked else spec.initial_mode
        return cls(
            spec=spec,
            mode=mode,
            curve=DroopCurve(spec.u_ref, spec.k),
            soc_pct=spec.soc_pct if spec.is_storage else None,
            locked=locked,
            p_set=spec.p_set,
        )

    @property
    def id(self) -> str:
        return self.spec.id

    @property
    def effective_mode(self) -> str:
        return LOCKED if self.locked else self.mode

    @property
    def is_droop(self) -> bool:
        """True when the node takes part in bus voltage support."""
        return self.mode == VOLTAGE_SOURCE and not self.locked

    @property
    def stored_energy(self) -> float | None:
        if self.soc_pct is None:
            return None
        return self.soc_pct * self.spec.capacity / 100.0


def apply_shift(node: NodeState, delta_p: float) -> NodeState:
    """Add ``delta_p`` (kW) to the node's cumulative droop-curve shift."""
    if node.locked:
        raise RejectedCommand(f"node {node.id} is locked")
    if node.mode != VOLTAGE_SOURCE:
        raise RejectedCommand(f"node {node.id} is not in voltage_source mode")
    if not math.isfinite(delta_p):
        raise RejectedCommand(f"non-finite shift for node {node.id}")
    if delta_p == 0:
        return node
    return replace(node, curve=replace(node.curve, shift=node.curve.shift + delta_p))


def step_node(node: NodeState, p_equilibrium: float, dt: float) -> NodeState:
    """Advance one node by ``dt`` seconds.

    ``p_equilibrium`` is only used in droop operation; current-source nodes
    track their setpoint and locked nodes decay to zero.
    """
    spec = node.spec
    if node.locked:
        target = 0.0
    elif node.mode == CURRENT_SOURCE:
        target = node.p_set
    else:
        target = p_equilibrium
    alpha = 1.0 - math.exp(-dt / spec.tau)
    p = node.p_out + alpha * (target - node.p_out)
    p = min(max(p, -spec.p_rated), spec.p_rated)
    soc = node.soc_pct
    if soc is not None:
        soc -= 100.0 * p * dt / (3600.0 * spec.capacity)
        soc = min(max(soc, 0.0), 100.0)
    return replace(node, p_out=p, p_target=target, soc_pct=soc)
