"""Which vehicle density suits the vehicular cloud, and which suits traffic?

Flow V*L peaks at the critical density; the short-deadline violation
bound is smallest where V**2 * L peaks, which sits at a lower density.
Between the two the cloud and the road pull in opposite directions.
"""

import numpy as np

from evcc import LinearSpeed, SystemConfig, compare_densities, efficiency_curve, m27_model
from evcc.traffic import tradeoff_summary

for model in (LinearSpeed(100.0, 140.0), m27_model()):
    cmp = compare_densities(model)
    print(f"{model.name:>7}: flow optimum {cmp.l_star:.3f}, cloud optimum {cmp.l_dagger:.3f} veh/km")

template = SystemConfig(density=1.0, road_length=10.0, n_tasks=50, deadline=5.0, n_rsus=10, mu=0.0)
points = efficiency_curve(LinearSpeed(100.0, 140.0), template, task_gen_rate=10.0, grid=np.arange(1.0, 140.0))
summary = tradeoff_summary(points)
print(f"\ncloud efficiency peaks at {summary.peak_density:g} veh/km; both efficiencies rise up to {summary.win_win_end:g}")
for p in points[9::20]:
    print(f"  L={p.L:5.0f}  V={p.V:6.2f} km/h  flow={p.eta_te:7.1f} veh/h  executed={p.eta_ce:.4f} tasks/s")
