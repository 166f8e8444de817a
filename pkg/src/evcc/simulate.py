"""Monte Carlo episodes of the replication system.

Two backends share the policy layer:

* continuous time: meetings with the task-RSU form a Poisson process of rate
  M*mu (plus a guaranteed meeting at t=0 when M >= 1), every offload spawns a
  replica whose output is collected after an Exp(B*mu) lag, and at most M
  offloads happen per episode;
* sampled time: the slot chain of :mod:`evcc.mdp`, reproduced draw by draw.

Every episode ``i`` draws from ``episode_rng(seed, i)`` so results do not
depend on how episodes are spread over workers.
"""

from __future__ import annotations

import csv
import heapq
import math
from typing import Iterator, Optional

import numpy as np

from .mdp import DiscreteChainParams, MdpState
from .model import (
    FINISHED,
    EpisodeOutcome,
    SimStats,
    SystemConfig,
    episode_rng,
    sample_vehicle_count,
)
from .policy import Policy, PolicyKind, as_policy, beta_assign, round_robin_assign

_CHUNK = 64


def _exponential_stream(rng: np.random.Generator, scale: float) -> Iterator[float]:
    # fixed-size chunks keep draw k identical whatever the horizon
    while True:
        yield from rng.exponential(scale, _CHUNK).tolist()


def meeting_times(rng: np.random.Generator, rate: float, deadline: float) -> Iterator[float]:
    """0, then the points of a rate-``rate`` Poisson process on (0, deadline]."""
    yield 0.0
    if rate <= 0:
        return
    t = 0.0
    for gap in _exponential_stream(rng, 1.0 / rate):
        t += gap
        if t > deadline:
            return
        yield t


def simulate_episode_continuous(cfg: SystemConfig, policy, rng: np.random.Generator) -> EpisodeOutcome:
    policy = as_policy(policy)
    if policy.kind is PolicyKind.MDP_TABLE:
        raise ValueError("the mdp policy only runs on the sampled-time backend")
    n = cfg.n_tasks
    vehicle_rng, meeting_rng, lag_rng = rng.spawn(3)
    m = sample_vehicle_count(cfg.density, cfg.road_length, vehicle_rng)
    completion = [math.inf] * n
    offloads = [0] * n
    if m >= 1:
        lag_rate = cfg.n_rsus * cfg.mu
        lags = _exponential_stream(lag_rng, 1.0 / lag_rate) if lag_rate > 0 else None
        heap = [(0, i) for i in range(n)]  # (replicas, task), valid until the task finishes
        total = 0
        for k, t in enumerate(meeting_times(meeting_rng, m * cfg.mu, cfg.deadline)):
            if total == m:
                break
            if policy.kind is PolicyKind.BETA:
                while heap and completion[heap[0][1]] <= t:
                    heapq.heappop(heap)
                if not heap:
                    break
                count, task = heap[0]
                heapq.heapreplace(heap, (count + 1, task))
            else:
                task = round_robin_assign(k, n)
            total += 1
            offloads[task] += 1
            if lags is not None:
                completion[task] = min(completion[task], t + next(lags))
    omega = tuple(c <= cfg.deadline for c in completion)
    times = tuple(None if math.isinf(c) else c for c in completion)
    return EpisodeOutcome(omega, m, times, tuple(offloads))


def simulate_episode_single_pass(cfg: SystemConfig, rng: np.random.Generator) -> EpisodeOutcome:
    """Round-robin dealing where each vehicle meets the task-RSU at most once.

    Vehicle ``m`` meets the task-RSU after Exp(mu) and returns the output
    Exp(B*mu) later; the k-th vehicle to meet gets task ``k mod N``. With one
    task this is exactly a Poisson number of servers with hypoexponential
    service times.
    """
    vehicle_rng, meeting_rng, lag_rng = rng.spawn(3)
    n = cfg.n_tasks
    m = sample_vehicle_count(cfg.density, cfg.road_length, vehicle_rng)
    completion = np.full(n, np.inf)
    offloads = np.zeros(n, dtype=int)
    if m >= 1 and cfg.mu > 0:
        meet = np.sort(meeting_rng.exponential(1.0 / cfg.mu, m))
        meet = meet[meet <= cfg.deadline]
        done = meet + lag_rng.exponential(1.0 / (cfg.n_rsus * cfg.mu), meet.size)
        tasks = np.arange(meet.size) % n
        np.minimum.at(completion, tasks, done)
        offloads = np.bincount(tasks, minlength=n)
    omega = tuple(bool(c <= cfg.deadline) for c in completion)
    times = tuple(None if np.isinf(c) else float(c) for c in completion)
    return EpisodeOutcome(omega, m, times, tuple(int(o) for o in offloads))


def simulate_episode_discrete(n_tasks: int, params: DiscreteChainParams, policy, rng: np.random.Generator) -> EpisodeOutcome:
    """One episode of the sampled-time chain; completion times are in slots."""
    policy = as_policy(policy)
    status = [0] * n_tasks
    finished_at = [None] * n_tasks
    offloads = [0] * n_tasks
    used = 0
    meetings = 0
    u = params.unit_completion_prob
    horizon = params.horizon
    for d in range(horizon):
        meeting = rng.random() < params.meeting_prob(d)
        budget = min(params.vehicles - used, horizon - d)
        if meeting and budget > 0:
            if policy.kind is PolicyKind.BETA:
                task = beta_assign(status)
            elif policy.kind is PolicyKind.ROUND_ROBIN:
                task = round_robin_assign(meetings, n_tasks)
            else:
                task = policy.table.action(MdpState(tuple(status), d, budget))
            meetings += 1
            if task is not None:
                used += 1
                offloads[task] += 1
                if status[task] != FINISHED:
                    status[task] += 1
        draws = rng.random(n_tasks)
        for i in range(n_tasks):
            if status[i] != FINISHED and draws[i] < status[i] * u:
                status[i] = FINISHED
                finished_at[i] = d + 1
    omega = tuple(t is not None for t in finished_at)
    return EpisodeOutcome(omega, params.vehicles, tuple(finished_at), tuple(offloads))


def _run_range(cfg, policy, chain, backend, seed, start, stop):
    out = []
    for i in range(start, stop):
        rng = episode_rng(seed, i)
        if chain is not None:
            out.append(simulate_episode_discrete(cfg.n_tasks, chain, policy, rng))
        elif backend == "single-pass":
            out.append(simulate_episode_single_pass(cfg, rng))
        else:
            out.append(simulate_episode_continuous(cfg, policy, rng))
    return out


def run_episodes(
    cfg: SystemConfig,
    policy,
    iterations: int,
    *,
    chain: Optional[DiscreteChainParams] = None,
    backend: str = "continuous",
    workers: int = 1,
) -> list:
    """Simulate ``iterations`` episodes and return their outcomes in order."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if backend not in ("continuous", "single-pass"):
        raise ValueError(f"unknown backend {backend!r}")
    policy = as_policy(policy)
    if chain is not None:
        chain.check(cfg.n_tasks, small_slot=False)
    if workers <= 1:
        return _run_range(cfg, policy, chain, backend, cfg.seed, 0, iterations)
    from joblib import Parallel, delayed

    bounds = np.linspace(0, iterations, workers + 1).astype(int)
    parts = Parallel(n_jobs=workers)(
        delayed(_run_range)(cfg, policy, chain, backend, cfg.seed, a, b)
        for a, b in zip(bounds[:-1], bounds[1:])
    )
    return [o for part in parts for o in part]


def run_monte_carlo(
    cfg: SystemConfig,
    policy="beta",
    iterations: int = 1000,
    *,
    chain: Optional[DiscreteChainParams] = None,
    backend: str = "continuous",
    workers: int = 1,
    episodes_csv=None,
) -> SimStats:
    """Mean and standard error of the per-episode violation ratio.

    Passing ``chain`` switches to the sampled-time backend (``cfg`` then only
    supplies the task count and the seed).
    """
    outcomes = run_episodes(cfg, policy, iterations, chain=chain, backend=backend, workers=workers)
    if episodes_csv is not None:
        write_episodes_csv(outcomes, episodes_csv)
    return SimStats.from_ratios([o.violation_ratio for o in outcomes])


def write_episodes_csv(outcomes, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "task", "offloads", "completed", "completion_time"])
        for e, o in enumerate(outcomes):
            for n, done in enumerate(o.omega):
                t = o.completion_times[n]
                w.writerow([e, n, o.offloads[n], int(done), "" if t is None else repr(t)])
