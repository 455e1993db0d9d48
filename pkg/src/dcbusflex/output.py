"""Trace CSV, summary JSON and the plain-text run report."""

from __future__ import annotations

import json
import math
from pathlib import Path

from .engine import Summary, Trace
from .node import CURRENT_SOURCE, LOCKED, VOLTAGE_SOURCE

MODE_CODES = {VOLTAGE_SOURCE: "VS", CURRENT_SOURCE: "CS", LOCKED: "LK", "shed": "LK"}


def _f(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def trace_header(trace: Trace) -> list[str]:
    cols = ["t_s", "bus_v"]
    for nid in trace.node_ids:
        cols += [f"{nid}_p_kw", f"{nid}_mode", f"{nid}_soc_pct", f"{nid}_shift_kw"]
    return cols + ["tripped", "dispatch_count"]


def trace_to_csv(trace: Trace) -> str:
    lines = [",".join(trace_header(trace))]
    n_nodes = len(trace.node_ids)
    for i in range(len(trace)):
        cells = [_f(trace.t[i]), _f(trace.bus_u[i])]
        p, soc, shift, mode = trace.p_out[i], trace.soc_pct[i], trace.shift[i], trace.mode[i]
        for j in range(n_nodes):
            cells += [
                _f(p[j]),
                MODE_CODES[mode[j]],
                "" if math.isnan(soc[j]) else _f(soc[j]),
                _f(shift[j]),
            ]
        cells += ["1" if trace.tripped[i] else "0", str(int(trace.dispatch_count[i]))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: Trace, path: str | Path) -> None:
    Path(path).write_text(trace_to_csv(trace), encoding="utf-8", newline="\n")


def write_gnuplot_columns(trace: Trace, path: str | Path) -> None:
    """Whitespace-separated numeric columns with a '#' header line."""
    head = ["t_s", "bus_v"] + [f"{nid}_p_kw" for nid in trace.node_ids]
    lines = ["# " + " ".join(head)]
    for i in range(len(trace)):
        vals = [trace.t[i], trace.bus_u[i], *trace.p_out[i]]
        lines.append(" ".join(_f(v) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _num(x: float | None):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return float(x)


def summary_to_dict(s: Summary) -> dict:
    return {
        "scenario": s.scenario,
        "collapsed": s.collapsed,
        "collapse_t_s": _num(s.collapse_t),
        "final_bus_v": _num(s.final_bus_u),
        "final_p_cs_kw": _num(s.final_p_cs),
        "steady_p_kw": {k: _num(v) for k, v in s.steady_p.items()},
        "trips": [{"t_s": e.t, "u_v": e.u, "delta_u_v": e.delta_u} for e in s.trips],
        "dispatches": [{"t_s": d.t, "node": d.node, "delta_p_kw": d.delta_p} for d in s.dispatches],
        "total_deficit_kw": s.total_deficit,
        "alarms": list(s.alarms),
        "rejected_commands": list(s.rejected),
    }


def write_summary_json(s: Summary, path: str | Path) -> None:
    text = json.dumps(summary_to_dict(s), indent=2, sort_keys=False) + "\n"
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def format_report(s: Summary, max_events: int = 8) -> str:
    out = [f"scenario {s.scenario}"]
    if s.collapsed:
        out.append(f"  BUS COLLAPSE at t = {s.collapse_t:.6f} s")
    if math.isfinite(s.final_bus_u):
        out.append(f"  final bus voltage   {s.final_bus_u:.3f} V")
    out.append("  steady-state power (mean of last 10% of run):")
    for nid, p in s.steady_p.items():
        out.append(f"    {nid:<12} {p:+9.3f} kW")
    out.append(f"  trips               {len(s.trips)}")
    for e in s.trips[:max_events]:
        out.append(f"    t = {e.t:.3f} s  u = {e.u:.3f} V  dU = {e.delta_u:+.3f} V")
    if len(s.trips) > max_events:
        out.append(f"    ... {len(s.trips) - max_events} more")
    out.append(f"  dispatches          {len(s.dispatches)}")
    for d in s.dispatches[:max_events]:
        out.append(f"    t = {d.t:.3f} s  {d.node:<12} shift {d.delta_p:+.3f} kW")
    if len(s.dispatches) > max_events:
        out.append(f"    ... {len(s.dispatches) - max_events} more")
    if s.total_deficit:
        out.append(f"  unallocated power   {s.total_deficit:.3f} kW")
    if s.rejected:
        out.append(f"  rejected commands   {len(s.rejected)}")
    return "\n".join(out)
