"""Scenario description, validation, JSON I/O and the three built-in test cases.

Sign convention used throughout the package: power is injection-positive into
the DC bus. EV charging and export to the AC grid are negative setpoints.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

KINDS = ("grid_converter", "battery", "ev_charger")
STORAGE_KINDS = ("battery", "ev_charger")
MODES = ("voltage_source", "current_source", "locked")
ACTIONS = ("set_power", "set_mode", "lock", "unlock", "shed")
GAMMA_MODES = ("paper_literal", "direction_aware")


class ScenarioError(ValueError):
    """Scenario input cannot be turned into a ScenarioSpec."""


class ScenarioFormatError(ScenarioError):
    """Malformed JSON or a structurally wrong document (missing or mistyped keys)."""


class UnknownKeyError(ScenarioError):
    """The document contains keys that are not part of the scenario format."""

    def __init__(self, keys: list[str]):
        self.keys = keys
        super().__init__("unknown key(s): " + ", ".join(keys))


class InvalidCaseError(ValueError):
    pass


@dataclass(frozen=True)
class BusSpec:
    u_nominal: float = 750.0
    du_set: float = 2.0


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: str
    initial_mode: str
    u_ref: float
    k: float
    p_rated: float
    p_set: float = 0.0
    weight: float = 1.0
    soc_pct: float | None = None
    capacity: float | None = None
    tau: float = 0.02

    @property
    def is_storage(self) -> bool:
        return self.kind in STORAGE_KINDS


@dataclass(frozen=True)
class ControllerSpec:
    control_period: float = 0.01
    debounce_samples: int = 3
    inhibit_window: float = 0.2
    gamma_mode: str = "paper_literal"


@dataclass(frozen=True)
class EventSpec:
    """A timed action on one node.

    ``value`` carries the argument of ``set_power`` (kW) and ``set_mode``
    (mode name); it is None for the other actions.
    """

    t: float
    target: str
    action: str
    value: float | str | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    nodes: tuple[NodeSpec, ...]
    bus: BusSpec = field(default_factory=BusSpec)
    controller: ControllerSpec = field(default_factory=ControllerSpec)
    events: tuple[EventSpec, ...] = ()
    t_end: float = 5.0
    dt: float = 0.001
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        # stable sort keeps same-time events in file order
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: e.t)))

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def _finite(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_scenario(spec: ScenarioSpec) -> list[Violation]:
    """Return every invariant violation in ``spec``; an empty list means valid.

    Locators use the JSON key names, with nodes addressed by id, e.g.
    ``nodes[dcdc1].k_v_per_kw``.
    """
    out: list[Violation] = []

    def bad(path: str, msg: str) -> None:
        out.append(Violation(path, msg))

    if not (_finite(spec.t_end) and spec.t_end > 0):
        bad("t_end_s", "must be > 0")
    if not (_finite(spec.dt) and spec.dt > 0):
        bad("dt_s", "must be > 0")
    if not isinstance(spec.seed, int) or isinstance(spec.seed, bool) or spec.seed < 0:
        bad("seed", "must be an unsigned integer")

    b = spec.bus
    if not (_finite(b.u_nominal) and b.u_nominal > 0):
        bad("bus.u_nominal_v", "must be > 0")
    if not (_finite(b.du_set) and b.du_set > 0):
        bad("bus.du_set_v", "must be > 0")

    c = spec.controller
    if not (_finite(c.control_period) and c.control_period > 0):
        bad("controller.control_period_s", "must be > 0")
    elif _finite(spec.dt) and spec.dt > c.control_period:
        bad("dt_s", f"must not exceed control_period_s ({c.control_period})")
    if not isinstance(c.debounce_samples, int) or c.debounce_samples < 1:
        bad("controller.debounce_samples", "must be an integer >= 1")
    if not (_finite(c.inhibit_window) and c.inhibit_window >= 0):
        bad("controller.inhibit_window_s", "must be >= 0")
    if c.gamma_mode not in GAMMA_MODES:
        bad("controller.gamma_mode", f"must be one of {', '.join(GAMMA_MODES)}")

    if not spec.nodes:
        bad("nodes", "at least one node is required")
    seen: set[str] = set()
    for i, n in enumerate(spec.nodes):
        loc = f"nodes[{n.id}]" if n.id else f"nodes[{i}]"
        if not n.id:
            bad(loc + ".id", "must be a non-empty string")
        elif n.id in seen:
            bad(loc + ".id", f"duplicate node id {n.id!r}")
        seen.add(n.id)
        if n.kind not in KINDS:
            bad(loc + ".kind", f"must be one of {', '.join(KINDS)}")
        if n.initial_mode not in MODES:
            bad(loc + ".initial_mode", f"must be one of {', '.join(MODES)}")
        if not _finite(n.u_ref):
            bad(loc + ".u_ref_v", "must be finite")
        if not (_finite(n.k) and n.k > 0):
            bad(loc + ".k_v_per_kw", "droop coefficient must be > 0")
        if not (_finite(n.p_rated) and n.p_rated > 0):
            bad(loc + ".p_rated_kw", "must be > 0")
        elif not _finite(n.p_set) or abs(n.p_set) > n.p_rated:
            bad(loc + ".p_set_kw", f"|p_set| must not exceed p_rated ({n.p_rated})")
        if not (_finite(n.weight) and 0.0 <= n.weight <= 1.0):
            bad(loc + ".weight", "must lie in [0, 1]")
        if not (_finite(n.tau) and n.tau > 0):
            bad(loc + ".tau_s", "must be > 0")
        if n.kind in STORAGE_KINDS:
            if n.soc_pct is None or not (_finite(n.soc_pct) and 0.0 <= n.soc_pct <= 100.0):
                bad(loc + ".soc_pct", "storage node needs soc_pct in [0, 100]")
            if n.capacity is None or not (_finite(n.capacity) and n.capacity > 0):
                bad(loc + ".capacity_kwh", "storage node needs capacity > 0")
        elif n.soc_pct is not None and not (_finite(n.soc_pct) and 0.0 <= n.soc_pct <= 100.0):
            bad(loc + ".soc_pct", "must lie in [0, 100]")

    nodes = {n.id: n for n in spec.nodes}
    for i, e in enumerate(spec.events):
        loc = f"events[{i}]"
        if not (_finite(e.t) and e.t >= 0):
            bad(loc + ".t_s", "must be >= 0")
        if e.target not in nodes:
            bad(loc + ".target", f"unknown node {e.target!r}")
        if e.action not in ACTIONS:
            bad(loc + ".action", f"must be one of {', '.join(ACTIONS)}")
        elif e.action == "set_power":
            if not _finite(e.value):
                bad(loc + ".p_kw", "set_power needs a finite power")
            elif e.target in nodes and abs(e.value) > nodes[e.target].p_rated:
                bad(loc + ".p_kw", f"exceeds p_rated of {e.target}")
        elif e.action == "set_mode" and e.value not in MODES:
            bad(loc + ".mode", f"must be one of {', '.join(MODES)}")
    return out


# -- built-in cases ---------------------------------------------------------

EVENT_T = 0.5

CASE_TITLES = {
    1: "EV charging under grid connection",
    2: "Charge adjustment process in off-grid state",
    3: "Support AC load in off-grid state",
}

CASE_EXPECTATIONS = {
    1: "AC/DC supplies the 15 kW shortfall (15 kW steady), BATTERY 0 kW steady, bus in [748, 752] V",
    2: "BATTERY raises output by 15 kW (15 kW steady), bus back in [748, 752] V",
    3: "BATTERY and EV share the 15 kW export, 7.5 kW each, bus in [748, 752] V",
}


def _table_roster(acdc_mode: str, battery_mode: str, ev_mode: str) -> tuple[NodeSpec, ...]:
    return (
        NodeSpec("acdc", "grid_converter", acdc_mode, u_ref=750.0, k=1.0, p_rated=60.0),
        NodeSpec("dcdc1", "battery", battery_mode, u_ref=750.0, k=4.0, p_rated=15.0,
                 soc_pct=50.0, capacity=50.0),
        NodeSpec("dcdc2", "ev_charger", ev_mode, u_ref=750.0, k=4.0, p_rated=15.0,
                 soc_pct=50.0, capacity=50.0),
    )


def builtin_case(n: int) -> ScenarioSpec:
    """Return built-in test case ``n`` (1, 2 or 3) on the three-port test bus."""
    if n == 1:
        nodes = _table_roster("voltage_source", "voltage_source", "current_source")
        events = (EventSpec(EVENT_T, "dcdc2", "set_power", -15.0),)
    elif n == 2:
        nodes = _table_roster("current_source", "voltage_source", "current_source")
        events = (EventSpec(EVENT_T, "dcdc2", "set_power", -15.0),)
    elif n == 3:
        nodes = _table_roster("current_source", "voltage_source", "voltage_source")
        events = (EventSpec(EVENT_T, "acdc", "set_power", -15.0),)
    else:
        raise InvalidCaseError(f"no built-in case {n!r}; choose 1, 2 or 3")
    return ScenarioSpec(name=f"case{n}", nodes=nodes, events=events)


# -- JSON format --------------------------------------------------------------

# dataclass field -> JSON key
_BUS_KEYS = {"u_nominal": "u_nominal_v", "du_set": "du_set_v"}
_CONTROLLER_KEYS = {
    "control_period": "control_period_s",
    "debounce_samples": "debounce_samples",
    "inhibit_window": "inhibit_window_s",
    "gamma_mode": "gamma_mode",
}
_NODE_KEYS = {
    "id": "id",
    "kind": "kind",
    "initial_mode": "initial_mode",
    "u_ref": "u_ref_v",
    "k": "k_v_per_kw",
    "p_rated": "p_rated_kw",
    "p_set": "p_set_kw",
    "weight": "weight",
    "soc_pct": "soc_pct",
    "capacity": "capacity_kwh",
    "tau": "tau_s",
}
_NODE_REQUIRED = ("id", "kind", "initial_mode", "u_ref_v", "k_v_per_kw", "p_rated_kw")
_SCENARIO_KEYS = ("name", "t_end_s", "dt_s", "bus", "controller", "nodes", "events", "seed")
_EVENT_VALUE_KEY = {"set_power": "p_kw", "set_mode": "mode"}


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    def block(obj, keys):
        d = {}
        for attr, key in keys.items():
            v = getattr(obj, attr)
            if v is not None:
                d[key] = v
        return d

    events = []
    for e in spec.events:
        d = {"t_s": e.t, "target": e.target, "action": e.action}
        if e.action in _EVENT_VALUE_KEY:
            d[_EVENT_VALUE_KEY[e.action]] = e.value
        events.append(d)
    return {
        "name": spec.name,
        "t_end_s": spec.t_end,
        "dt_s": spec.dt,
        "seed": spec.seed,
        "bus": block(spec.bus, _BUS_KEYS),
        "controller": block(spec.controller, _CONTROLLER_KEYS),
        "nodes": [block(n, _NODE_KEYS) for n in spec.nodes],
        "events": events,
    }


def dumps_scenario(spec: ScenarioSpec) -> str:
    return json.dumps(scenario_to_dict(spec), indent=2) + "\n"


def _expect_obj(x, where: str) -> dict:
    if not isinstance(x, dict):
        raise ScenarioFormatError(f"{where}: expected an object")
    return x


def _unknown(d: dict, allowed, where: str) -> list[str]:
    prefix = f"{where}." if where else ""
    return [prefix + k for k in d if k not in allowed]


def _number(d: dict, key: str, where: str):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioFormatError(f"{where}.{key}: expected a number")
    return float(v)


def _block(d: dict, keys: dict, where: str, required=(), ints=(), strings=()) -> dict:
    kwargs = {}
    for attr, key in keys.items():
        if key not in d:
            if key in required:
                raise ScenarioFormatError(f"{where}: missing key {key!r}")
            continue
        v = d[key]
        if key in strings:
            if not isinstance(v, str):
                raise ScenarioFormatError(f"{where}.{key}: expected a string")
            kwargs[attr] = v
        elif key in ints:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ScenarioFormatError(f"{where}.{key}: expected an integer")
            kwargs[attr] = v
        elif v is None:
            kwargs[attr] = None
        else:
            kwargs[attr] = _number(d, key, where)
    return kwargs


def scenario_from_dict(doc: Any) -> ScenarioSpec:
    """Build a ScenarioSpec from a parsed JSON document.

    Raises UnknownKeyError for keys outside the format (all of them are
    collected first) and ScenarioFormatError for structural problems.
    Value ranges are not checked here; see validate_scenario.
    """
    doc = _expect_obj(doc, "scenario")
    unknown = _unknown(doc, _SCENARIO_KEYS, "")
    bus_d = _expect_obj(doc.get("bus", {}), "bus")
    ctl_d = _expect_obj(doc.get("controller", {}), "controller")
    unknown += _unknown(bus_d, _BUS_KEYS.values(), "bus")
    unknown += _unknown(ctl_d, _CONTROLLER_KEYS.values(), "controller")
    if "nodes" not in doc:
        raise ScenarioFormatError("scenario: missing key 'nodes'")
    if not isinstance(doc["nodes"], list):
        raise ScenarioFormatError("nodes: expected a list")
    events_d = doc.get("events", [])
    if not isinstance(events_d, list):
        raise ScenarioFormatError("events: expected a list")
    for i, nd in enumerate(doc["nodes"]):
        unknown += _unknown(_expect_obj(nd, f"nodes[{i}]"), _NODE_KEYS.values(), f"nodes[{i}]")
    for i, ed in enumerate(events_d):
        ed = _expect_obj(ed, f"events[{i}]")
        allowed = ("t_s", "target", "action") + tuple(_EVENT_VALUE_KEY.values())
        unknown += _unknown(ed, allowed, f"events[{i}]")
    if unknown:
        raise UnknownKeyError(unknown)

    nodes = []
    for i, nd in enumerate(doc["nodes"]):
        kw = _block(nd, _NODE_KEYS, f"nodes[{i}]", required=_NODE_REQUIRED,
                    strings=("id", "kind", "initial_mode"))
        nodes.append(NodeSpec(**kw))

    events = []
    for i, ed in enumerate(events_d):
        where = f"events[{i}]"
        for key in ("t_s", "target", "action"):
            if key not in ed:
                raise ScenarioFormatError(f"{where}: missing key {key!r}")
        if not isinstance(ed["target"], str) or not isinstance(ed["action"], str):
            raise ScenarioFormatError(f"{where}: target and action must be strings")
        value = None
        vkey = _EVENT_VALUE_KEY.get(ed["action"])
        if vkey is not None:
            if vkey not in ed:
                raise ScenarioFormatError(f"{where}: action {ed['action']!r} needs {vkey!r}")
            value = _number(ed, vkey, where) if vkey == "p_kw" else ed[vkey]
        events.append(EventSpec(_number(ed, "t_s", where), ed["target"], ed["action"], value))

    top = {}
    if "name" in doc:
        if not isinstance(doc["name"], str):
            raise ScenarioFormatError("name: expected a string")
        top["name"] = doc["name"]
    else:
        top["name"] = "scenario"
    if "t_end_s" in doc:
        top["t_end"] = _number(doc, "t_end_s", "scenario")
    if "dt_s" in doc:
        top["dt"] = _number(doc, "dt_s", "scenario")
    if "seed" in doc:
        if isinstance(doc["seed"], bool) or not isinstance(doc["seed"], int):
            raise ScenarioFormatError("seed: expected an integer")
        top["seed"] = doc["seed"]
    return ScenarioSpec(
        nodes=tuple(nodes),
        events=tuple(events),
        bus=BusSpec(**_block(bus_d, _BUS_KEYS, "bus")),
        controller=ControllerSpec(**_block(ctl_d, _CONTROLLER_KEYS, "controller",
                                           ints=("debounce_samples",),
                                           strings=("gamma_mode",))),
        **top,
    )


def loads_scenario(text: str) -> ScenarioSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"invalid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def load_scenario(path: str | Path) -> ScenarioSpec:
    return loads_scenario(Path(path).read_text(encoding="utf-8"))


def save_scenario(spec: ScenarioSpec, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(spec), encoding="utf-8", newline="\n")
