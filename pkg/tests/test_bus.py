from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcbusflex.bus import BusCollapse, aggregate_droop, solve_bus
from dcbusflex.node import DroopCurve, NodeState, droop_voltage
from dcbusflex.scenario import NodeSpec

from oracles import bisect_bus_voltage, bus_residual


def droop_node(nid, k, u_ref=750.0, shift=0.0, p_rated=1e6, mode="voltage_source", locked=False):
    spec = NodeSpec(nid, "grid_converter", mode, u_ref=u_ref, k=k, p_rated=p_rated)
    return NodeState(spec, mode, DroopCurve(u_ref, k, shift), locked=locked)


class TestAggregate:
    @pytest.mark.parametrize("ks, expected", [([1, 4], 0.8), ([4], 4.0), ([4, 4], 2.0)])
    def test_parallel_combination(self, ks, expected):
        sys = aggregate_droop([droop_node(f"n{i}", k) for i, k in enumerate(ks)])
        assert sys.k_sys == pytest.approx(expected, rel=1e-12)
        assert sys.u_ref_sys == pytest.approx(750.0)

    def test_excludes_current_source_and_locked(self):
        nodes = [droop_node("a", 1), droop_node("b", 4, mode="current_source"),
                 droop_node("c", 2, locked=True)]
        sys = aggregate_droop(nodes)
        assert sys.members == ("a",) and sys.k_sys == 1.0

    def test_shift_raises_no_load_voltage(self):
        sys = aggregate_droop([droop_node("a", 1, shift=15), droop_node("b", 4)])
        # k_sys * (765/1 + 750/4)
        assert sys.u_ref_sys == pytest.approx(0.8 * (765 + 187.5))

    def test_collapse(self):
        with pytest.raises(BusCollapse):
            aggregate_droop([droop_node("a", 1, locked=True)])
        with pytest.raises(BusCollapse):
            aggregate_droop([])

    @given(st.lists(st.floats(0.1, 10), min_size=1, max_size=8))
    def test_k_sys_bounds(self, ks):
        sys = aggregate_droop([droop_node(f"n{i}", k) for i, k in enumerate(ks)])
        assert 0 < sys.k_sys <= min(ks) * (1 + 1e-12)


class TestSolve:
    def test_case1_pre_dispatch(self):
        sol = solve_bus([droop_node("acdc", 1), droop_node("dcdc1", 4)], -15.0)
        assert sol.u == pytest.approx(738.0, abs=1e-9)
        assert sol.node_powers["acdc"] == pytest.approx(12.0, abs=1e-9)
        assert sol.node_powers["dcdc1"] == pytest.approx(3.0, abs=1e-9)

    def test_no_load(self):
        sol = solve_bus([droop_node("a", 1), droop_node("b", 4)], 0.0)
        assert sol.u == 750.0
        assert sol.node_powers == {"a": 0.0, "b": 0.0}

    def test_case2_pre_dispatch(self):
        sol = solve_bus([droop_node("dcdc1", 4, p_rated=15)], -15.0)
        assert sol.u == pytest.approx(690.0, abs=1e-9)
        assert sol.node_powers["dcdc1"] == pytest.approx(15.0, abs=1e-9)
        assert sol.saturated == ()

    def test_case3_pre_dispatch(self):
        sol = solve_bus([droop_node("dcdc1", 4, p_rated=15), droop_node("dcdc2", 4, p_rated=15)],
                        -15.0)
        assert sol.u == pytest.approx(720.0, abs=1e-9)
        assert sol.node_powers == pytest.approx({"dcdc1": 7.5, "dcdc2": 7.5})

    def test_saturated_node_pinned_at_limit(self):
        nodes = [droop_node("small", 1, p_rated=5), droop_node("big", 4, p_rated=100)]
        sol = solve_bus(nodes, -20.0)
        assert sol.saturated == ("small",)
        assert sol.node_powers["small"] == 5.0
        assert sol.node_powers["big"] == pytest.approx(15.0)
        assert sol.u == pytest.approx(750 - 4 * 15)

    def test_all_saturated_collapses(self):
        with pytest.raises(BusCollapse):
            solve_bus([droop_node("a", 1, p_rated=5)], -20.0)

    def test_current_source_nodes_ignored(self):
        nodes = [droop_node("a", 1), droop_node("cs", 1, mode="current_source")]
        assert solve_bus(nodes, -3.0).node_powers.keys() == {"a"}


@st.composite
def rosters(draw):
    n = draw(st.integers(1, 8))
    nodes = [droop_node(f"n{i}", k=draw(st.floats(0.1, 10)), u_ref=draw(st.floats(700, 800)),
                        shift=draw(st.floats(-20, 20)), p_rated=draw(st.floats(5, 200)))
             for i in range(n)]
    return nodes, draw(st.floats(-100, 100))


@settings(max_examples=300)
@given(rosters())
def test_balance_and_on_curve(case):
    nodes, p_cs = case
    try:
        sol = solve_bus(nodes, p_cs)
    except BusCollapse:
        return
    assert abs(sol.residual) < 1e-9
    assert abs(sum(sol.node_powers.values()) + p_cs) < 1e-9
    for n in nodes:
        p = sol.node_powers[n.id]
        assert abs(p) <= n.spec.p_rated * (1 + 1e-12)
        if n.id not in sol.saturated:
            assert abs(droop_voltage(n.curve, p) - sol.u) < 1e-9


@settings(max_examples=300)
@given(rosters())
def test_matches_bisection_with_limits(case):
    nodes, p_cs = case
    params = [(n.curve.u_ref, n.curve.k, n.curve.shift, n.spec.p_rated) for n in nodes]
    capacity = sum(n.spec.p_rated for n in nodes)
    if capacity < abs(p_cs):
        with pytest.raises(BusCollapse):
            solve_bus(nodes, p_cs)
        return
    u = bisect_bus_voltage(params, p_cs, 0.0, 2000.0)
    try:
        sol = solve_bus(nodes, p_cs)
    except BusCollapse:
        # only legitimate when the balance holds on a whole interval
        assert bus_residual(u - 1e-3, params, p_cs) == pytest.approx(0, abs=1e-9)
        assert bus_residual(u + 1e-3, params, p_cs) == pytest.approx(0, abs=1e-9)
        return
    assert sol.u == pytest.approx(u, abs=1e-6)


@given(rosters(), st.floats(0.1, 50))
def test_monotone_in_current_source_power(case, dp):
    nodes, p_cs = case
    nodes = [replace(n, spec=replace(n.spec, p_rated=1e6)) for n in nodes]
    assert solve_bus(nodes, p_cs + dp).u > solve_bus(nodes, p_cs).u


@given(rosters(), st.floats(0.1, 10))
def test_adding_node_at_bus_voltage_is_neutral(case, k):
    nodes, p_cs = case
    nodes = [replace(n, spec=replace(n.spec, p_rated=1e6)) for n in nodes]
    u = solve_bus(nodes, p_cs).u
    extended = nodes + [droop_node("extra", k, u_ref=u)]
    assert solve_bus(extended, p_cs).u == pytest.approx(u, abs=1e-9)


@given(st.lists(st.floats(0.1, 10), min_size=1, max_size=6), st.floats(-100, 100),
       st.data())
def test_restoration_identity(ks, step, data):
    nodes = [droop_node(f"n{i}", k) for i, k in enumerate(ks)]
    weights = data.draw(st.lists(st.floats(0.001, 1), min_size=len(ks), max_size=len(ks)))
    total = sum(weights)
    shifted = [replace(n, curve=replace(n.curve, shift=-step * w / total))
               for n, w in zip(nodes, weights)]
    assert solve_bus(shifted, step).u == pytest.approx(750.0, abs=1e-9)
