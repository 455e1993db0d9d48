"""Discrete-time simulator of a DC bus under multi-node droop with
competition-coefficient curve-shift dispatch."""

from .bus import BusCollapse, BusSolution, SystemDroop, aggregate_droop, solve_bus
from .comms import (Alarm, Channel, ChannelConfig, Envelope, LockNotice, ShiftCommand,
                    Telemetry)
from .controller import (AllocationPlan, CompetitionEntry, FlexibleController, TripEvent,
                         check_trip, competition_coefficient, energy_reserve,
                         estimate_unbalance, estimate_unbalance_limited, power_reserve,
                         rank_and_allocate)
from .engine import Summary, Trace, TraceRow, apply_event, run
from .node import DroopCurve, NodeState, RejectedCommand, apply_shift, droop_voltage, step_node
from .scenario import (BusSpec, ControllerSpec, EventSpec, NodeSpec, ScenarioSpec,
                       builtin_case, load_scenario, save_scenario, validate_scenario)

__version__ = "0.1.0"
