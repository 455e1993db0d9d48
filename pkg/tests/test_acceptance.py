"""End-to-end acceptance checks.

Each test registers a numbered label through the ``criterion`` fixture; the
terminal summary prints one PASS/FAIL line per label.
"""

import time

import numpy as np
import pytest

from dcbusflex import (BusCollapse, EventSpec, NodeSpec, ScenarioSpec, builtin_case,
                       rank_and_allocate, run, solve_bus)
from dcbusflex.controller import CompetitionEntry
from dcbusflex.output import trace_to_csv

from oracles import bisect_bus_voltage, brute_force_allocation, bus_residual
from test_bus import droop_node

BAND = (748.0, 752.0)
TOL = 0.1


def _in_band(u):
    return BAND[0] <= u <= BAND[1]


def test_1_case1_grid_converter_takes_the_shortfall(criterion):
    criterion("1 case 1: grid converter picks up 15 kW, battery returns to 0")
    start = time.perf_counter()
    _, s = run(builtin_case(1))
    elapsed = time.perf_counter() - start
    assert _in_band(s.final_bus_u)
    assert s.steady_p["acdc"] == pytest.approx(15.0, abs=TOL)
    assert s.steady_p["dcdc1"] == pytest.approx(0.0, abs=TOL)
    first, second = s.decisions[0].ranking[:2]
    assert first.node == "acdc" and first.coeff > second.coeff
    assert first.coeff == pytest.approx(0.8, abs=1e-3)
    assert second.coeff == pytest.approx(0.4, abs=1e-3)
    assert elapsed < 1.0


def test_2_case2_battery_alone(criterion):
    criterion("2 case 2: battery restores the bus with one 15 kW dispatch")
    _, s = run(builtin_case(2))
    assert s.steady_p["dcdc1"] == pytest.approx(15.0, abs=TOL)
    assert _in_band(s.final_bus_u)
    assert len(s.dispatches) == 1
    assert s.dispatches[0].node == "dcdc1"
    assert s.dispatches[0].delta_p == pytest.approx(15.0, abs=TOL)


def test_3_case3_equal_share(criterion):
    criterion("3 case 3: two equal storage ports share 7.5 kW each")
    _, s = run(builtin_case(3))
    assert s.steady_p["dcdc1"] == pytest.approx(7.5, abs=TOL)
    assert s.steady_p["dcdc2"] == pytest.approx(7.5, abs=TOL)
    assert _in_band(s.final_bus_u)
    shifts = {d.node: d.delta_p for d in s.dispatches}
    assert set(shifts) == {"dcdc1", "dcdc2"}
    assert abs(shifts["dcdc1"] - shifts["dcdc2"]) < 1e-6


@pytest.mark.parametrize("n, expected", [(1, 738.0), (2, 690.0), (3, 720.0)])
def test_4_pre_dispatch_sag(n, expected, criterion):
    criterion(f"4 pre-dispatch sag, case {n}: {expected:g} V")
    trace, s = run(builtin_case(n))
    t_dispatch = s.dispatches[0].t
    i = int(np.searchsorted(trace.t, t_dispatch - 1e-9)) - 1
    assert trace.t[i] < t_dispatch
    assert trace.bus_u[i] == pytest.approx(expected, abs=0.5)


def test_5_bus_solver_against_bisection(criterion):
    criterion("5 bus solver matches bisection on 1000 random rosters")
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 1000:
        n = int(rng.integers(1, 9))
        ks = rng.uniform(0.1, 10.0, n)
        u_refs = rng.uniform(740.0, 760.0, n)
        shifts = rng.uniform(-10.0, 10.0, n)
        ratings = rng.uniform(20.0, 200.0, n)
        p_cs = float(rng.uniform(-100.0, 100.0))
        if ratings.sum() <= abs(p_cs):
            continue
        nodes = [droop_node(f"n{i}", ks[i], u_refs[i], shifts[i], ratings[i]) for i in range(n)]
        params = list(zip(u_refs, ks, shifts, ratings))
        sol = solve_bus(nodes, p_cs)
        u_ref = bisect_bus_voltage(params, p_cs, 0.0, 2000.0)
        assert sol.u == pytest.approx(u_ref, abs=1e-6)
        assert abs(sol.residual) < 1e-9
        assert abs(bus_residual(sol.u, params, p_cs)) < 1e-9
        checked += 1


def _allocation_instance(rng):
    n = int(rng.integers(0, 5))
    heads = rng.integers(0, 11, n)
    coeffs = rng.choice([0.0, 0.2, 0.5, 0.9], n)
    locked = rng.random(n) < 0.25
    req_units = int(rng.integers(-50, 51))
    entries = [CompetitionEntry(f"n{i}", 1.0, 1.0, float(coeffs[i]),
                                0.0 if locked[i] else float(coeffs[i]),
                                0.5 * float(heads[i]), bool(locked[i])) for i in range(n)]
    return req_units, heads.tolist(), coeffs.tolist(), locked.tolist(), entries


def test_6_allocation_properties(criterion):
    criterion("6 allocation properties hold on 500 random instances")
    rng = np.random.default_rng(6)
    violations = []
    for case in range(500):
        req_units, heads, coeffs, locked, entries = _allocation_instance(rng)
        requested = 0.5 * req_units
        plan = rank_and_allocate(requested, entries)
        alloc = dict(plan.entries)
        total = sum(alloc.values())
        if abs(total + plan.deficit - requested) > 1e-9:
            violations.append((case, "conservation"))
        for e in entries:
            p = alloc.get(e.node, 0.0)
            if abs(p) > e.headroom + 1e-12:
                violations.append((case, "headroom", e.node))
            if e.locked and p != 0.0:
                violations.append((case, "lock", e.node))
            if p and np.sign(p) != np.sign(requested):
                violations.append((case, "direction", e.node))
        c = float(rng.uniform(0.01, 1.0))
        scaled = [CompetitionEntry(e.node, e.delta, e.beta, e.gamma * c, e.coeff * c,
                                   e.headroom, e.locked) for e in entries]
        if rank_and_allocate(requested, scaled) != plan:
            violations.append((case, "gamma scaling"))
        best = brute_force_allocation(abs(req_units), heads, coeffs, locked)
        for level, units in best.items():
            got = sum(abs(alloc.get(e.node, 0.0)) for e in entries
                      if e.coeff == level and not e.locked)
            if abs(got - 0.5 * units) > 1e-9:
                violations.append((case, "brute force", level))
    assert violations == []


def _restoration_scenario(rng, idx):
    n = int(rng.integers(1, 5))
    nodes = []
    for j in range(n):
        storage = bool(rng.integers(0, 2))
        nodes.append(NodeSpec(
            f"n{j}", "battery" if storage else "grid_converter", "voltage_source",
            u_ref=750.0, k=float(rng.uniform(0.5, 8.0)), p_rated=float(rng.uniform(10.0, 60.0)),
            weight=float(rng.uniform(0.2, 1.0)),
            soc_pct=float(rng.uniform(20.0, 80.0)) if storage else None,
            capacity=float(rng.uniform(20.0, 100.0)) if storage else None))
    conductance = sum(1.0 / nd.k for nd in nodes)
    rating = sum(nd.p_rated for nd in nodes)
    # large enough to leave the band, small enough for the combined headroom
    lo, hi = 3.0 * conductance, 0.6 * rating
    magnitude = float(rng.uniform(lo, max(lo, hi)))
    sign = 1.0 if rng.integers(0, 2) else -1.0
    load = NodeSpec("load", "grid_converter", "current_source", u_ref=750.0, k=1.0,
                    p_rated=200.0)
    spec = ScenarioSpec(f"restore{idx}", tuple(nodes) + (load,),
                        events=(EventSpec(0.1, "load", "set_power", sign * magnitude),),
                        t_end=1.0, seed=idx)
    return spec, magnitude, rating


def test_7_restoration_to_nominal(criterion):
    criterion("7 bus returns to nominal on 200 random disturbances within headroom")
    rng = np.random.default_rng(7)
    failures = []
    for idx in range(200):
        spec, magnitude, rating = _restoration_scenario(rng, idx)
        assert magnitude <= rating
        _, s = run(spec)
        if s.collapsed or not s.dispatches or abs(s.final_bus_u - 750.0) > 1e-6:
            failures.append((idx, s.final_bus_u, len(s.dispatches)))
    assert failures == []


@pytest.mark.parametrize("n", [1, 2, 3])
def test_8_byte_identical_traces(n, criterion):
    criterion(f"8 deterministic CSV trace, case {n}")
    first = trace_to_csv(run(builtin_case(n))[0]).encode()
    second = trace_to_csv(run(builtin_case(n))[0]).encode()
    assert first == second


def test_collapse_is_not_silently_skipped():
    # guard for the oracle loop above: an overloaded roster must refuse to solve
    with pytest.raises(BusCollapse):
        solve_bus([droop_node("a", 1.0, p_rated=5.0)], -50.0)
