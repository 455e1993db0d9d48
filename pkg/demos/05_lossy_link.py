"""
Commands over a lossy field bus
===============================

Shift commands travel with a fixed latency and can be dropped. A lost
command leaves the bus outside its band, so the controller trips again after
its inhibit window and sends a fresh correction.
"""

from dcbusflex import ChannelConfig, builtin_case, run

spec = builtin_case(1)
for seed in range(6):
    link = ChannelConfig(latency=0.01, drop_probability=0.5, seed=seed)
    trace, s = run(spec, channel=link)
    times = [round(d.t, 3) for d in s.dispatches]
    print(f"seed {seed}: {len(s.trips)} trips, dispatches at {times}, "
          f"final bus {s.final_bus_u:.3f} V")

# The same seed always loses the same messages.
a = run(spec, channel=ChannelConfig(0.01, 0.5, seed=2))[1]
b = run(spec, channel=ChannelConfig(0.01, 0.5, seed=2))[1]
print("reproducible:", a.trips == b.trips)
