"""Solve the slotted replication chain exactly and compare with the balanced rule.

Two tasks, twenty vehicles, five RSUs, twenty one-second slots. The DP
gives the optimal expected number of finished tasks; a BETA simulation
of the same chain should land within a few standard errors of it.
"""

from evcc import DiscreteChainParams, SystemConfig, beta_assign, run_monte_carlo, value_iteration

chain = DiscreteChainParams.from_rates(vehicles=20, mu=0.0002, n_rsus=5, delta=1.0, horizon=20)
print(f"meeting prob per slot s = {chain.s:.4f}, per-replica completion prob = {chain.unit_completion_prob:.4f}")

table = value_iteration(2, chain)
print(f"reachable states: {sum(len(s) for s in table.stages)}")
print(f"optimal violation ratio: {table.violation_ratio:.6f}")

# where does the optimal policy send a vehicle? always to the least-replicated task
disagree = [x for x in table.decision_states() if beta_assign(x.status) not in table.optimal_actions(x)]
print(f"decision states where BETA is not optimal: {len(disagree)}")

for x in list(table.decision_states())[:8]:
    print("  ", table.describe(x))

cfg = SystemConfig(density=0.0, road_length=1.0, n_tasks=2, deadline=20.0, n_rsus=5, mu=0.0, seed=1)
stats = run_monte_carlo(cfg, "beta", 10_000, chain=chain)
print(f"BETA simulation: {stats.violation_ratio_mean:.6f} +- {stats.stderr:.6f}")
