"""
Droop curves and curve shifts
=============================

A droop converter lowers its port voltage as it delivers more power.
Shifting the curve sideways lets the same converter deliver more power at
the same voltage.
"""

import numpy as np

from dcbusflex import DroopCurve, droop_voltage

battery = DroopCurve(u_ref=750.0, k=4.0)
p = np.linspace(-15, 15, 7)
print("power (kW) ->", p)
print("voltage (V) ->", np.array([droop_voltage(battery, x) for x in p]))

# Shift the curve by +15 kW: at 15 kW the converter now sits at 750 V.
shifted = DroopCurve(750.0, 4.0, shift=15.0)
print("shifted curve at 15 kW:", droop_voltage(shifted, 15.0), "V")
print("no-load voltage of the shifted curve:", shifted.no_load_voltage, "V")
