"""
Ranking nodes and allocating a correction
=========================================

Each candidate node gets a score (weight x power reserve x energy reserve).
The correction goes to the best-scored node first; equal scores share it.
"""

from dcbusflex import CompetitionEntry, rank_and_allocate
from dcbusflex.controller import competition_coefficient, power_reserve

# The grid converter carries 12 of 60 kW, the battery 3 of 15 kW at 50 % SOC.
acdc_beta = power_reserve(60.0, 12.0)
bat_beta = power_reserve(15.0, 3.0)
entries = [
    CompetitionEntry("acdc", 1.0, acdc_beta, 1.0,
                     competition_coefficient(1.0, acdc_beta, 1.0, False), headroom=60.0),
    CompetitionEntry("dcdc1", 1.0, bat_beta, 0.5,
                     competition_coefficient(1.0, bat_beta, 0.5, False), headroom=15.0),
]
for e in entries:
    print(f"{e.node:6s} beta={e.beta:.2f} gamma={e.gamma:.2f} score={e.coeff:.2f}")

plan = rank_and_allocate(15.0, entries)
print("plan:", plan.entries, "deficit:", plan.deficit)

# Two identical storage ports split a request evenly.
twins = [CompetitionEntry(n, 1.0, 1.0, 0.5, 0.5, headroom=15.0) for n in ("dcdc1", "dcdc2")]
print("twins:", rank_and_allocate(15.0, twins).entries)

# A request larger than the total headroom leaves a deficit.
print("overload:", rank_and_allocate(40.0, twins))
