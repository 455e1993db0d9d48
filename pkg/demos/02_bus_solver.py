"""
Solving the bus voltage
=======================

Paralleled droop nodes act like conductances 1/k. The solver returns the
bus voltage and each node's share, and pins nodes that hit their rating.
"""

from dcbusflex import NodeSpec, NodeState, aggregate_droop, solve_bus

roster = [
    NodeSpec("acdc", "grid_converter", "voltage_source", u_ref=750.0, k=1.0, p_rated=60.0),
    NodeSpec("dcdc1", "battery", "voltage_source", u_ref=750.0, k=4.0, p_rated=15.0,
             soc_pct=50.0, capacity=50.0),
]
nodes = [NodeState.from_spec(s) for s in roster]

system = aggregate_droop(nodes)
print(f"system droop {system.k_sys:.3f} V/kW over {system.members}")

# A 15 kW load on the bus (current-source power is negative when drawn).
sol = solve_bus(nodes, -15.0)
print(f"bus voltage {sol.u:.3f} V")
for nid, p in sol.node_powers.items():
    print(f"  {nid:6s} {p:6.3f} kW")

# A node that hits its rating is pinned there and the others take the rest.
small = NodeSpec("small", "grid_converter", "voltage_source", u_ref=750.0, k=1.0, p_rated=5.0)
big = NodeSpec("big", "grid_converter", "voltage_source", u_ref=750.0, k=4.0, p_rated=100.0)
sol = solve_bus([NodeState.from_spec(small), NodeState.from_spec(big)], -20.0)
print(f"20 kW on small+big: {sol.u:.3f} V, pinned {sol.saturated}, powers {sol.node_powers}")
