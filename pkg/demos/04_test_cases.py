"""
The three built-in test cases
=============================

Each case steps a 15 kW disturbance onto the three-port bus at t = 0.5 s and
lets the controller restore the voltage. With matplotlib installed the
bus voltage and node powers are saved to ``case<n>.png``.
"""

from dcbusflex import builtin_case, run
from dcbusflex.output import format_report

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

for n in (1, 2, 3):
    trace, summary = run(builtin_case(n))
    print(format_report(summary))
    print()
    if plt is None:
        continue
    fig, (ax_u, ax_p) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    ax_u.plot(trace.t, trace.bus_u)
    ax_u.axhspan(748, 752, alpha=0.15)
    ax_u.set_ylabel("bus voltage (V)")
    for nid in trace.node_ids:
        ax_p.plot(trace.t, trace.column(nid), label=nid)
    ax_p.set_ylabel("power (kW)")
    ax_p.set_xlabel("time (s)")
    ax_p.legend()
    fig.suptitle(f"case {n}")
    fig.savefig(f"case{n}.png", dpi=120)
    plt.close(fig)
