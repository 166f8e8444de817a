"""Monte Carlo of the continuous-time system against the closed-form bound.

Road of 10 km, 50 tasks, 10 RSUs, linear speed model (100 km/h, jam at
140 veh/km). For each deadline we print the simulated violation ratio of
BETA and round-robin next to the exact and Rayleigh bounds.
"""

from evcc import BoundInputs, LinearSpeed, SystemConfig, rayleigh_bound, run_monte_carlo, violation_bound
from evcc.traffic import config_at_density

speed = LinearSpeed(100.0, 140.0)
template = SystemConfig(density=60.0, road_length=10.0, n_tasks=50, deadline=80.0, n_rsus=10, mu=0.0, seed=7)
base = config_at_density(template, speed, 60.0)
print(f"meeting rate mu = {base.mu:.6g} /s, alpha = {base.alpha:g} vehicles per task\n")

print(f"{'D':>5} {'BETA':>8} {'RR':>8} {'exact':>8} {'rayleigh':>9}")
for deadline in (20.0, 40.0, 80.0, 120.0, 160.0):
    cfg = base.replace(deadline=deadline)
    beta = run_monte_carlo(cfg, "beta", 1000).violation_ratio_mean
    rr = run_monte_carlo(cfg, "round-robin", 1000).violation_ratio_mean
    inputs = BoundInputs.from_config(cfg)
    print(f"{deadline:5.0f} {beta:8.4f} {rr:8.4f} {violation_bound(inputs):8.4f} {rayleigh_bound(inputs):9.4f}")

# a single task with a single pass per vehicle is exactly the bound's model
one = base.replace(n_tasks=1, density=1.2)
mc = run_monte_carlo(one, "round-robin", 100_000, backend="single-pass")
print(f"\nsingle task, alpha=12: simulated {mc.violation_ratio_mean:.4f} vs exp(-alpha F(D)) "
      f"{violation_bound(BoundInputs.from_config(one)):.4f}")
