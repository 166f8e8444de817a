"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``.
"""

import filecmp
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from scipy import integrate

from evcc.bounds import (
    BoundInputs,
    HypoexpParams,
    asymptotic_high_rsu,
    asymptotic_high_rsu_short_deadline,
    mean_delay,
    poisson_mixture_series,
    poisson_mixture_survival,
    rayleigh_exponent,
    service_cdf,
    violation_bound,
)
from evcc.experiments import EXPERIMENT_IDS, ExperimentSpec, run_experiment
from evcc.mdp import DiscreteChainParams, value_iteration
from evcc.model import FINISHED, SystemConfig
from evcc.simulate import run_monte_carlo
from evcc.traffic import (
    CustomSpeed,
    LinearSpeed,
    PolynomialSpeed,
    compare_densities,
    config_at_density,
    critical_density,
    efficiency_curve,
    evcc_optimal_density,
    m27_model,
    maximize_on_domain,
    tradeoff_summary,
)

LIN = LinearSpeed(100.0, 140.0)
REPORT_LINES = []  # printed in the terminal summary by conftest.py


def _report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    REPORT_LINES.append(line)
    assert ok, line


def check_1():
    start = time.perf_counter()
    chain = DiscreteChainParams.from_rates(vehicles=20, mu=0.0002, n_rsus=5, delta=1.0, horizon=20)
    table = value_iteration(2, chain)
    cfg = SystemConfig(density=0.0, road_length=1.0, n_tasks=2, deadline=20.0, n_rsus=5, mu=0.0, seed=1)
    mc = run_monte_carlo(cfg, "beta", 10_000, chain=chain)
    elapsed = time.perf_counter() - start
    dp = 1.0 - table.optimal_value / 2
    gap = abs(dp - mc.violation_ratio_mean)
    ok = gap <= 3 * mc.stderr and elapsed < 60
    return ok, (f"DP {dp:.6f} vs BETA MC {mc.violation_ratio_mean:.6f} +- {mc.stderr:.6f}; "
                f"gap {gap:.2e} <= 3se {3 * mc.stderr:.2e}; {elapsed:.1f}s")


def check_2():
    chain = DiscreteChainParams.from_rates(vehicles=20, mu=0.0002, n_rsus=5, delta=1.0, horizon=20)
    table = value_iteration(2, chain)
    total = hits = 0
    for x in table.decision_states():
        active = [i for i, r in enumerate(x.status) if r != FINISHED]
        low = min(x.status[i] for i in active)
        total += 1
        hits += x.status[table.action(x)] == low
    return hits == total and total > 0, f"{hits}/{total} decision states act on a min-replica task"


def _grid_configs():
    for L in (30.0, 60.0, 90.0, 120.0):
        cells = ([dict(deadline=D) for D in (20.0, 60.0, 100.0, 160.0)]
                 + [dict(n_rsus=B) for B in (2, 5, 20)]
                 + [dict(n_tasks=N) for N in (10, 30, 100)])
        for change in cells:
            base = dict(density=L, road_length=10.0, n_tasks=50, deadline=80.0, n_rsus=10, mu=0.0, seed=3)
            base.update(change)
            yield config_at_density(SystemConfig(**base), LIN, L)


def check_3():
    worst, cells, fails = -math.inf, 0, 0
    for cfg in _grid_configs():
        mc = run_monte_carlo(cfg, "beta", 1000)
        excess = mc.violation_ratio_mean - violation_bound(BoundInputs.from_config(cfg)) - 3 * mc.stderr
        worst = max(worst, excess)
        fails += excess > 0
        cells += 1
    return fails == 0 and cells >= 40, f"{cells} cells, {fails} above bound + 3se; max(mc - bound - 3se) = {worst:.4f}"


SINGLE_TASK_CONFIGS = [
    # (lambda*S, B, mu, D); alpha = lambda*S with one task
    (12.0, 10, 0.0015873, 80.0),
    (3.0, 2, 0.002, 200.0),
    (30.0, 5, 0.0005, 60.0),
    (8.0, 20, 0.001, 30.0),
    (1.0, 1, 0.01, 100.0),
]


def check_4():
    worst = 0.0
    parts = []
    for k, (mean_vehicles, rsus, mu, deadline) in enumerate(SINGLE_TASK_CONFIGS):
        cfg = SystemConfig(density=mean_vehicles / 10.0, road_length=10.0, n_tasks=1, deadline=deadline,
                           n_rsus=rsus, mu=mu, seed=100 + k)
        mc = run_monte_carlo(cfg, "round-robin", 100_000, backend="single-pass").violation_ratio_mean
        exact = violation_bound(BoundInputs.from_config(cfg))
        worst = max(worst, abs(mc - exact))
        parts.append(f"{mc:.4f}/{exact:.4f}")
    return worst <= 0.02, f"max |MC - exp(-aF(D))| = {worst:.4f}; MC/bound " + ", ".join(parts)


def _rayleigh_exponent_error(rsus, mu, frac, alpha=7.0):
    deadline = frac / (rsus * mu)
    inputs = BoundInputs(alpha, HypoexpParams.from_rates(mu, rsus), deadline)
    exact = alpha * service_cdf(deadline, inputs.params)
    return abs(rayleigh_exponent(inputs) - exact) / exact


def check_5():
    # relative to the exact exponent, over every B (lambda1 = lambda2 / B <= lambda2)
    worst, worst_b = 0.0, None
    for rsus in range(1, 21):
        for mu in (1e-4, 1e-3, 1e-2):
            for frac in (0.01, 0.05, 0.1):
                err = _rayleigh_exponent_error(rsus, mu, frac)
                if err > worst:
                    worst, worst_b = err, rsus
    failing_b = [b for b in range(1, 21) if _rayleigh_exponent_error(b, 1e-3, 0.1) > 0.05]
    # mean delay: alpha large enough that the bulk of the delay sits at lambda2 * t <= 0.1
    delay_err = 0.0
    for rsus in (2, 5, 10, 20):
        params = HypoexpParams.from_rates(1e-3, rsus)
        alpha = 200.0 * rsus
        floor = math.exp(-alpha)
        f = lambda t: (math.exp(-alpha * service_cdf(t, params)) - floor) / (1.0 - floor)
        scale = mean_delay(BoundInputs(alpha, params, 1.0))
        oracle = integrate.quad(f, 0, 20 * scale, limit=200)[0] + integrate.quad(f, 20 * scale, np.inf)[0]
        assert params.lambda2 * scale <= 0.1
        delay_err = max(delay_err, abs(scale - oracle) / oracle)
    ok = worst <= 0.05 and delay_err <= 0.10
    return ok, (f"max exponent rel err {worst:.4f} (B={worst_b}, lambda2*D=0.1; above 5% for B in {failing_b}); "
                f"mean-delay rel err {delay_err:.4f}")


def check_6():
    worst = 0.0
    for alpha in np.linspace(0.0, 20.0, 41):
        for f in np.linspace(0.0, 1.0, 21):
            worst = max(worst, abs(poisson_mixture_series(alpha, f) - poisson_mixture_survival(alpha, f)))
    return worst <= 1e-9, f"max |series - closed form| = {worst:.2e} over 41 x 21 grid"


def _random_concave(rng):
    lmax = float(rng.uniform(50, 200))
    k = int(rng.integers(2, 8))
    knots = np.concatenate(([0.0], np.sort(rng.uniform(0, lmax, k - 1)), [lmax]))
    slopes = -np.sort(rng.exponential(1.0, k))
    v = np.concatenate(([0.0], np.cumsum(slopes * np.diff(knots))))
    return CustomSpeed(tuple(knots), tuple(v - v[-1] + rng.uniform(0, 5)))


def _random_polynomial(rng):
    terms = tuple((float(rng.uniform(0.05, 5)), float(rng.uniform(0.3, 3))) for _ in range(rng.integers(1, 4)))
    return PolynomialSpeed(float(rng.uniform(20, 150)), terms)


def check_7():
    l_dag = evcc_optimal_density(LIN, method="numeric")
    l_star = critical_density(LIN, method="numeric")
    linear_ok = abs(l_dag - 140 / 3) <= 0.14 and abs(l_star - 70) <= 0.14
    rng = np.random.default_rng(2024)
    models = [m27_model()] + [_random_concave(rng) for _ in range(100)] + [_random_polynomial(rng) for _ in range(100)]
    ordered = sum(compare_densities(m).ordering_holds for m in models)
    closed_err = 0.0
    for c, a in [(116.4 / 149.797**1.964, 1.964), (0.01, 2.0), (0.5, 0.7), (2.0, 1.0)]:
        model = PolynomialSpeed(116.4 if a == 1.964 else 90.0, ((c, a),))
        (ls, ld), = model.monomial_optima()
        cmp = compare_densities(model)
        closed_err = max(closed_err, abs(cmp.l_star / ls - 1), abs(cmp.l_dagger / ld - 1))
    ok = linear_ok and ordered == len(models) and closed_err <= 1e-6
    return ok, (f"linear L-dagger {l_dag:.4f}, L* {l_star:.4f}; ordering {ordered}/{len(models)}; "
                f"monomial closed-form rel err {closed_err:.1e}")


def check_8():
    # exponent gap is about 1/(B*mu*D): checked at the default 80 s deadline, wider grid reported
    def gap(L, deadline):
        mu = LIN(L) / 10.0 / 3600.0
        limit = asymptotic_high_rsu(L, 10.0, 50, mu, deadline)
        exact = violation_bound(BoundInputs(L * 10.0 / 50, HypoexpParams.from_rates(mu, 10**4), deadline))
        return abs(math.log(exact) / math.log(limit) - 1)

    densities = (30.0, 60.0, 90.0, 120.0)
    worst = max(gap(L, 80.0) for L in densities)
    wide = max(gap(L, D) for L in densities for D in (20.0, 40.0, 80.0, 160.0))
    short = np.vectorize(lambda L: -math.log(asymptotic_high_rsu_short_deadline(L, 100.0, 140.0, 50, 10.0)))
    argmax = maximize_on_domain(short, 140.0)
    ok = worst <= 0.01 and abs(argmax - 70.0) <= 0.14 and abs(argmax - 140 / 3) > 1.0
    return ok, (f"B=1e4 exponent rel err {worst:.2e} at D=80 ({wide:.2e} over D in 20..160); "
                f"short-deadline high-RSU optimum {argmax:.4f} (L*=70)")


def check_9():
    # deadline short enough that lambda2 * D <= 0.1 near the optimum
    template = SystemConfig(density=1.0, road_length=10.0, n_tasks=50, deadline=5.0, n_rsus=10, mu=0.0)
    grid = np.arange(1.0, 140.0)
    points = efficiency_curve(LIN, template, 10.0, grid)
    summary = tradeoff_summary(points)
    step = grid[1] - grid[0]
    target = evcc_optimal_density(LIN)
    ok = abs(summary.peak_density - target) <= step and summary.win_win_end == summary.peak_density
    return ok, (f"eta_CE peaks at {summary.peak_density:g} (L-dagger {target:.3f}, step {step:g}); "
                f"win-win ends at {summary.win_win_end:g}")


def check_10():
    same = []
    with tempfile.TemporaryDirectory() as tmp:
        for exp_id in EXPERIMENT_IDS:
            overrides = {"horizon": 10} if exp_id in ("policy-structure", "mdp-vs-beta") else {}
            paths = []
            for k in range(2):
                path = str(Path(tmp) / f"{exp_id}-{k}.out")
                run_experiment(ExperimentSpec(exp_id, dict(overrides), iterations=50, output=path, seed=11))
                paths.append(path)
            same.append(filecmp.cmp(*paths, shallow=False))
    return all(same), f"{sum(same)}/{len(same)} experiments byte-identical on re-run"


def test_criterion_1_beta_matches_dp():
    _report(1, *check_1())


def test_criterion_2_policy_structure():
    _report(2, *check_2())


def test_criterion_3_bound_dominance():
    _report(3, *check_3())


def test_criterion_4_single_task_tightness():
    _report(4, *check_4())


def test_criterion_5_rayleigh_regime():
    _report(5, *check_5())


def test_criterion_6_series_identity():
    _report(6, *check_6())


def test_criterion_7_density_optima():
    _report(7, *check_7())


def test_criterion_8_asymptotics():
    _report(8, *check_8())


def test_criterion_9_tradeoff_curve():
    _report(9, *check_9())


def test_criterion_10_determinism():
    _report(10, *check_10())


if __name__ == "__main__":
    failed = 0
    for n in range(1, 11):
        ok, detail = globals()[f"check_{n}"]()
        print(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        failed += not ok
    sys.exit(1 if failed else 0)
