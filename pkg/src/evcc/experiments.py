"""Named parameter sweeps, written as CSV (curves) or JSON (policy tables)."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bounds import BoundInputs, rayleigh_bound, violation_bound
from .mdp import DiscreteChainParams, value_iteration
from .model import FINISHED, SystemConfig, validate_config
from .policy import PolicyKind
from .simulate import run_monte_carlo
from .traffic import (
    LinearSpeed,
    config_at_density,
    efficiency_curve,
    evcc_optimal_density,
    critical_density,
    m27_model,
    tradeoff_summary,
)

EXPERIMENT_IDS = (
    "policy-structure",
    "mdp-vs-beta",
    "sweep-deadline",
    "sweep-rsus",
    "sweep-tasks",
    "sweep-density",
    "m27-density",
    "efficiency-tradeoff",
    "custom",
)

SWEEP_DEFAULTS = dict(density=60.0, road_length=10.0, n_tasks=50, deadline=80.0, n_rsus=10)
SPEED_DEFAULTS = dict(vmax=100.0, lmax=140.0)
CHAIN_DEFAULTS = dict(n_tasks=2, vehicles=20, n_rsus=5, horizon=20, mu_delta=0.0002)
PANEL_DENSITIES = (30.0, 60.0, 90.0, 120.0)

CONFIG_COLUMNS = ("density", "road_length", "n_tasks", "deadline", "n_rsus", "mu")
RUN_COLUMNS = ("seed", "iterations", "policy", "speed_model")
STAT_COLUMNS = ("mc_mean", "mc_stderr", "bound_exact", "bound_rayleigh")

_COLUMN_TYPES = {
    "density": "number", "road_length": "number", "n_tasks": "integer", "deadline": "number",
    "n_rsus": "integer", "mu": "number", "seed": "integer", "iterations": "integer",
    "policy": "string", "speed_model": "string", "mc_mean": "number", "mc_stderr": "number",
    "bound_exact": "number", "bound_rayleigh": "number", "vehicles": "integer", "horizon": "integer",
    "s": "number", "unit_completion_prob": "number", "dp_violation": "number",
    "within_3se": "boolean", "speed": "number", "eta_te": "number", "eta_ce": "number",
    "violation": "number", "task_gen_rate": "number", "region": "string", "task_interval": "number",
    "r": "array", "d": "integer", "budget": "integer", "action": ["integer", "null"],
    "optimal_actions": "array", "argmin": "array", "in_argmin": "boolean", "J": "number",
}

COLUMNS = {
    "sweep-deadline": CONFIG_COLUMNS + RUN_COLUMNS + STAT_COLUMNS,
    "sweep-rsus": CONFIG_COLUMNS + RUN_COLUMNS + STAT_COLUMNS,
    "sweep-tasks": CONFIG_COLUMNS + RUN_COLUMNS + STAT_COLUMNS,
    "sweep-density": CONFIG_COLUMNS + RUN_COLUMNS + STAT_COLUMNS,
    "m27-density": CONFIG_COLUMNS + RUN_COLUMNS + STAT_COLUMNS,
    "custom": CONFIG_COLUMNS + RUN_COLUMNS + STAT_COLUMNS,
    "mdp-vs-beta": ("n_tasks", "vehicles", "n_rsus", "horizon", "s", "unit_completion_prob", "seed",
                    "iterations", "dp_violation", "mc_mean", "mc_stderr", "within_3se"),
    "efficiency-tradeoff": ("density", "road_length", "n_tasks", "deadline", "n_rsus", "mu",
                            "task_interval", "speed_model", "speed", "eta_te", "violation",
                            "eta_ce", "task_gen_rate", "region"),
    "policy-structure": ("r", "d", "budget", "action", "optimal_actions", "argmin", "in_argmin", "J"),
}

_EXTRA_KEYS = {"vmax", "lmax", "vehicles", "horizon", "mu_delta", "workers"}


class ExperimentError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    id: str
    overrides: dict = field(default_factory=dict)
    iterations: int = 1000
    output: Optional[str] = None
    seed: int = 0
    policy: str = "beta"
    speed_model: object = None  # None -> linear model from vmax/lmax (m27 for m27-density)

    def __post_init__(self):
        if self.id not in EXPERIMENT_IDS:
            raise ExperimentError(f"unknown experiment id {self.id!r}")
        if self.iterations < 1:
            raise ExperimentError("iterations must be >= 1")
        if self.policy not in {k.value for k in PolicyKind}:
            raise ExperimentError(f"unknown policy {self.policy!r}")
        allowed = {f for f in SystemConfig.__dataclass_fields__} | _EXTRA_KEYS
        unknown = sorted(set(self.overrides) - allowed)
        if unknown:
            raise ExperimentError(f"unknown override key {unknown[0]!r}")


@dataclass
class ExperimentResult:
    id: str
    rows: list
    summary: str
    document: Optional[dict] = None  # JSON experiments

    def render(self) -> str:
        if self.document is not None:
            return json.dumps(self.document, indent=1, sort_keys=True) + "\n"
        return rows_to_csv(self.id, self.rows)


def rows_to_csv(exp_id: str, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = COLUMNS[exp_id]
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def emit_schema(exp_id: str) -> dict:
    """JSON schema of one result row of ``exp_id``."""
    if exp_id not in EXPERIMENT_IDS:
        raise ExperimentError(f"unknown experiment id {exp_id!r}")
    cols = COLUMNS[exp_id]
    props = {c: {"type": _COLUMN_TYPES[c]} for c in cols}
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": f"{exp_id} result row",
        "type": "object",
        "properties": props,
        "required": list(cols),
        "additionalProperties": False,
    }


def _split(overrides: dict):
    cfg_keys = {k: v for k, v in overrides.items() if k in SystemConfig.__dataclass_fields__}
    extra = {k: v for k, v in overrides.items() if k in _EXTRA_KEYS}
    return cfg_keys, extra


def _speed_model(spec: ExperimentSpec, extra: dict):
    if spec.speed_model is not None:
        return spec.speed_model
    if spec.id == "m27-density":
        return m27_model()
    return LinearSpeed(float(extra.get("vmax", SPEED_DEFAULTS["vmax"])), float(extra.get("lmax", SPEED_DEFAULTS["lmax"])))


def _template(spec: ExperimentSpec, cfg_keys: dict) -> SystemConfig:
    base = dict(SWEEP_DEFAULTS, mu=0.0, seed=spec.seed)
    base.update(cfg_keys)
    return validate_config(SystemConfig(**base))


def _cell(cfg: SystemConfig, spec: ExperimentSpec, model_name: str, workers: int) -> dict:
    row = {c: getattr(cfg, c) for c in CONFIG_COLUMNS}
    stats = run_monte_carlo(cfg, spec.policy, spec.iterations, workers=workers)
    if cfg.alpha > 0 and cfg.mu > 0:
        inputs = BoundInputs.from_config(cfg)
        exact, ray = violation_bound(inputs), rayleigh_bound(inputs)
    else:
        exact = ray = 1.0
    row.update(seed=cfg.seed, iterations=spec.iterations, policy=spec.policy, speed_model=model_name,
               mc_mean=stats.violation_ratio_mean, mc_stderr=stats.stderr,
               bound_exact=exact, bound_rayleigh=ray)
    return row


def _sweep(spec, template, model, cells, workers):
    rows = []
    for changes in cells:
        cfg = template.replace(**{k: v for k, v in changes.items() if k != "density"})
        L = changes.get("density", cfg.density)
        if "mu" in spec.overrides:
            cfg = cfg.replace(density=float(L))
        else:
            cfg = config_at_density(cfg, model, L)
        rows.append(_cell(cfg, spec, model.name, workers))
    return rows


def _curve_summary(exp_id, rows, key):
    best = min(rows, key=lambda r: r["mc_mean"])
    return f"{exp_id}: {len(rows)} rows; lowest mc_mean {best['mc_mean']:.4f} at {key}={best[key]}"


def _policy_structure(spec, extra):
    n, _, chain = _chain(spec, extra)
    table = value_iteration(n, chain)
    records, misses = [], 0
    for x in table.decision_states():
        active = [i for i, r in enumerate(x.status) if r != FINISHED]
        low = min(x.status[i] for i in active)
        argmin = [i for i in active if x.status[i] == low]
        opt = table.optimal_actions(x)
        ok = set(argmin) <= opt and (opt == set(active) or opt <= set(argmin))
        misses += not ok
        records.append({
            "r": ["F" if r == FINISHED else r for r in x.status], "d": x.d, "budget": x.budget,
            "action": table.action(x), "optimal_actions": sorted(opt), "argmin": argmin,
            "in_argmin": table.action(x) in argmin, "J": table.J[x],
        })
    doc = {
        "experiment": "policy-structure",
        "params": {"n_tasks": n, "vehicles": chain.vehicles, "s": chain.s,
                   "unit_completion_prob": chain.unit_completion_prob, "horizon": chain.horizon},
        "optimal_value": table.optimal_value,
        "violation_ratio": table.violation_ratio,
        "decision_states": len(records),
        "structure_violations": misses,
        "states": records,
    }
    summary = (f"policy-structure: {len(records)} decision states, {misses} where the optimal set "
               f"misses or exceeds the min-replica tasks; DP violation ratio {table.violation_ratio:.6f}")
    return ExperimentResult(spec.id, records, summary, doc)


def _chain(spec, extra, mu_delta=None, horizon=None):
    d = dict(CHAIN_DEFAULTS)
    d.update({k: v for k, v in extra.items() if k in CHAIN_DEFAULTS})
    d.update({k: v for k, v in spec.overrides.items() if k in ("n_tasks", "n_rsus")})
    chain = DiscreteChainParams.from_rates(int(d["vehicles"]), float(mu_delta or d["mu_delta"]),
                                           int(d["n_rsus"]), 1.0, int(horizon or d["horizon"]))
    return int(d["n_tasks"]), int(d["n_rsus"]), chain


def _mdp_vs_beta(spec, extra, workers):
    rows = []
    base_md = float(extra.get("mu_delta", CHAIN_DEFAULTS["mu_delta"]))
    top = int(extra.get("horizon", CHAIN_DEFAULTS["horizon"]))
    horizons = sorted({max(1, top * k // 4) for k in (1, 2, 3, 4)})
    for md in (base_md / 2, base_md):
        for h in horizons:
            n, rsus, chain = _chain(spec, extra, md, h)
            table = value_iteration(n, chain)
            cfg = SystemConfig(density=0.0, road_length=1.0, n_tasks=n, deadline=float(h), n_rsus=1,
                               mu=0.0, seed=spec.seed)
            stats = run_monte_carlo(cfg, "beta", spec.iterations, chain=chain, workers=workers)
            gap = abs(table.violation_ratio - stats.violation_ratio_mean)
            rows.append({"n_tasks": n, "vehicles": chain.vehicles, "n_rsus": rsus,
                         "horizon": h, "s": chain.s, "unit_completion_prob": chain.unit_completion_prob,
                         "seed": spec.seed, "iterations": spec.iterations,
                         "dp_violation": table.violation_ratio, "mc_mean": stats.violation_ratio_mean,
                         "mc_stderr": stats.stderr, "within_3se": bool(gap <= 3 * stats.stderr)})
    ok = sum(r["within_3se"] for r in rows)
    return ExperimentResult(spec.id, rows, f"mdp-vs-beta: {ok}/{len(rows)} rows agree within 3 standard errors")


def _efficiency(spec, template, model, extra):
    t_int = template.task_interval or template.deadline
    rate = template.n_tasks / t_int
    grid = np.arange(1.0, float(np.floor(model.lmax)) + (0.0 if float(model.lmax).is_integer() else 1.0))
    points = efficiency_curve(model, template, rate, grid)
    summary = tradeoff_summary(points)
    rows = []
    for p in points:
        cfg = config_at_density(template, model, p.L)
        region = "win-win" if p.L <= summary.win_win_end else "tradeoff"
        rows.append({"density": p.L, "road_length": cfg.road_length, "n_tasks": cfg.n_tasks,
                     "deadline": cfg.deadline, "n_rsus": cfg.n_rsus, "mu": cfg.mu, "task_interval": t_int,
                     "speed_model": model.name, "speed": p.V, "eta_te": p.eta_te, "violation": p.violation,
                     "eta_ce": p.eta_ce, "task_gen_rate": rate, "region": region})
    text = (f"efficiency-tradeoff: eVCC efficiency peaks at L={summary.peak_density:g} veh/km "
            f"(short-deadline optimum {evcc_optimal_density(model):.3f}, flow optimum "
            f"{critical_density(model):.3f}); win-win region ends at L={summary.win_win_end:g}")
    return ExperimentResult(spec.id, rows, text)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run ``spec`` and, if ``spec.output`` is set, write the result file there."""
    cfg_keys, extra = _split(spec.overrides)
    workers = int(extra.get("workers", 1))
    if spec.id in ("policy-structure", "mdp-vs-beta"):
        result = _policy_structure(spec, extra) if spec.id == "policy-structure" else _mdp_vs_beta(spec, extra, workers)
    else:
        if spec.policy == PolicyKind.MDP_TABLE.value:
            raise ExperimentError("the mdp policy is only available in mdp-vs-beta")
        model = _speed_model(spec, extra)
        template = _template(spec, cfg_keys)
        if spec.id == "efficiency-tradeoff":
            result = _efficiency(spec, template, model, extra)
        else:
            result = _named_sweep(spec, template, model, cfg_keys, workers)
    if spec.output:
        with open(spec.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.render())
    return result


def _named_sweep(spec, template, model, cfg_keys, workers):
    panels = [{"density": L} for L in PANEL_DENSITIES] if "density" not in cfg_keys else [{"density": template.density}]
    if spec.id == "sweep-deadline":
        cells = [dict(p, deadline=float(D)) for p in panels for D in range(10, 161, 10)]
        key = "deadline"
    elif spec.id == "sweep-rsus":
        cells = [dict(p, n_rsus=B) for p in panels for B in range(1, 21)]
        key = "n_rsus"
    elif spec.id == "sweep-tasks":
        cells = [dict(p, n_tasks=N) for p in panels for N in range(10, 101, 10)]
        key = "n_tasks"
    elif spec.id in ("sweep-density", "m27-density"):
        top = 130 if spec.id == "sweep-density" else 140
        cells = [{"density": float(L)} for L in range(10, top + 1, 10) if L < model.lmax]
        key = "density"
    else:
        cells = [{"density": template.density}]
        key = "density"
    rows = _sweep(spec, template, model, cells, workers)
    return ExperimentResult(spec.id, rows, _curve_summary(spec.id, rows, key))
