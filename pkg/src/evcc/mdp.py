"""Finite-horizon dynamic programming over the sampled-time replication chain.

One DP stage is one slot of length delta. Within slot ``d``:

1. a vehicle meets the task-RSU with probability ``s`` (with certainty at
   slot 0 when there is at least one vehicle);
2. on a meeting the policy offloads one unfinished task, adding a replica;
3. every unfinished task ``i`` independently completes with probability
   ``r_i * unit_completion_prob`` where ``r_i`` counts the replica added in
   step 2.

The reward is the number of finished tasks after ``horizon`` slots.

A state also carries the remaining offload allowance (at most ``vehicles``
offloads per episode), clamped to the number of decision slots left so
that it only splits states when the cap can still bind.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .model import FINISHED, format_status

SMALL_SLOT_LIMIT = 0.05
STATE_SPACE_CAP = 10**8


class StateSpaceTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscreteChainParams:
    s: float  # per-slot task-RSU meeting probability
    unit_completion_prob: float  # per-replica per-slot completion probability
    horizon: int  # deadline in slots
    vehicles: int  # M, also the cap on offloads per episode

    @classmethod
    def from_rates(cls, vehicles: int, mu: float, n_rsus: int, delta: float, horizon: int):
        """s = M*mu*delta and unit_completion_prob = B*mu*delta."""
        return cls(vehicles * mu * delta, n_rsus * mu * delta, horizon, vehicles)

    def check(self, n_tasks: int, small_slot: bool = True) -> "DiscreteChainParams":
        if not 0 <= self.s < 1:
            raise ValueError(f"s must lie in [0, 1), got {self.s}")
        if self.unit_completion_prob < 0:
            raise ValueError("unit_completion_prob must be >= 0")
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise ValueError("horizon must be a non-negative integer")
        if int(self.vehicles) != self.vehicles or self.vehicles < 0:
            raise ValueError("vehicles must be a non-negative integer")
        if self.vehicles * self.unit_completion_prob >= 1:
            raise ValueError("vehicles * unit_completion_prob must be < 1")
        load = n_tasks * self.vehicles * self.unit_completion_prob + self.s
        if small_slot and load > SMALL_SLOT_LIMIT:
            raise ValueError(
                f"slot too coarse: N*M*unit_completion_prob + s = {load:.4g} > {SMALL_SLOT_LIMIT}; "
                "shrink delta (halve it until the DP value stops moving)"
            )
        return self

    def meeting_prob(self, d: int) -> float:
        if d == 0:
            return 1.0 if self.vehicles >= 1 else 0.0
        return self.s


class MdpState(NamedTuple):
    status: tuple
    d: int
    budget: int


def initial_state(n_tasks: int, params: DiscreteChainParams) -> MdpState:
    return MdpState((0,) * n_tasks, 0, min(params.vehicles, params.horizon))


def terminal_reward(state) -> int:
    status = state.status if isinstance(state, MdpState) else state
    return sum(1 for r in status if r == FINISHED)


def decision_actions(state: MdpState) -> list:
    """Actions available when a vehicle meets the task-RSU in ``state``."""
    if state.budget <= 0:
        return []
    return [i for i, r in enumerate(state.status) if r != FINISHED]


def slot_transition(state: MdpState, action: Optional[int], meeting: bool, params: DiscreteChainParams) -> dict:
    """Successor distribution of one slot as ``{MdpState: probability}``."""
    status, d, budget = state
    if d >= params.horizon:
        raise ValueError("terminal state has no successors")
    available = decision_actions(state) if meeting else []
    if action is None:
        if available:
            raise ValueError("a meeting with unfinished tasks requires an action")
    else:
        if not 0 <= action < len(status):
            raise ValueError(f"action {action} out of range")
        if status[action] == FINISHED:
            raise ValueError(f"action {action} targets a finished task")
        if not available:
            raise ValueError("no offload is possible in this slot")
    counts = list(status)
    if action is not None:
        counts[action] += 1
    next_budget = min(budget - (action is not None), params.horizon - d - 1)
    open_tasks = [i for i, r in enumerate(counts) if r != FINISHED]
    u = params.unit_completion_prob
    branches = []
    for i in open_tasks:
        q = counts[i] * u
        options = [(counts[i], 1.0 - q)]
        if q > 0:
            options.append((FINISHED, q))
        branches.append(options)
    out = {}
    for combo in itertools.product(*branches):
        nxt = list(counts)
        p = 1.0
        for i, (value, prob) in zip(open_tasks, combo):
            nxt[i] = value
            p *= prob
        if p == 0.0:
            continue
        key = MdpState(tuple(nxt), d + 1, next_budget)
        out[key] = out.get(key, 0.0) + p
    return out


def myopic_reward(status, action: Optional[int], meeting: bool, unit_completion_prob: float) -> float:
    """Expected one-slot reward of the equivalent queueing MDP.

    Sum of active replicas plus the meeting indicator, minus the expected
    replicas removed by completions this slot.
    """
    c = 1 if meeting else 0
    if meeting and (action is None or status[action] == FINISHED):
        raise ValueError("a meeting needs an unfinished task to assign")
    total = c
    removed = 0.0
    for i, r in enumerate(status):
        if r == FINISHED:
            continue
        load = r + (c if i == action else 0)
        total += r
        removed += load * unit_completion_prob * load
    return total - removed


@dataclass
class ValueTable:
    n_tasks: int
    params: DiscreteChainParams
    stages: list  # stages[d] = list of reachable MdpState at stage d
    J: dict  # MdpState -> expected number of finished tasks at the horizon
    A: dict  # MdpState -> canonical optimal action on a meeting (None if no choice)
    optimal: dict = field(default_factory=dict)  # MdpState -> frozenset of optimal actions
    Q: dict = field(default_factory=dict)  # MdpState -> {action: value}

    @property
    def initial_state(self) -> MdpState:
        return self.stages[0][0]

    @property
    def optimal_value(self) -> float:
        return self.J[self.initial_state]

    @property
    def violation_ratio(self) -> float:
        return 1.0 - self.optimal_value / self.n_tasks

    def action(self, state: MdpState) -> Optional[int]:
        return self.A.get(state)

    def optimal_actions(self, state: MdpState) -> frozenset:
        return self.optimal.get(state, frozenset())

    def decision_states(self):
        """Reachable states where a meeting forces a choice between actions."""
        for d, states in enumerate(self.stages[:-1]):
            if self.params.meeting_prob(d) <= 0:
                continue
            for x in states:
                if x in self.optimal:
                    yield x

    def to_records(self, stages=None) -> list:
        wanted = range(len(self.stages)) if stages is None else stages
        rows = []
        for d in wanted:
            for x in sorted(self.stages[d]):
                rows.append({
                    "r": ["F" if r == FINISHED else r for r in x.status],
                    "d": x.d,
                    "budget": x.budget,
                    "J": self.J[x],
                    "action": self.A.get(x),
                    "optimal_actions": sorted(self.optimal.get(x, ())),
                })
        return rows

    def dump(self, path, stages=None) -> None:
        doc = {
            "n_tasks": self.n_tasks,
            "params": {
                "s": self.params.s,
                "unit_completion_prob": self.params.unit_completion_prob,
                "horizon": self.params.horizon,
                "vehicles": self.params.vehicles,
            },
            "optimal_value": self.optimal_value,
            "violation_ratio": self.violation_ratio,
            "states": self.to_records(stages),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)

    def describe(self, state: MdpState) -> str:
        return f"{format_status(state.status)} d={state.d} budget={state.budget}"


def state_space_bound(n_tasks: int, params: DiscreteChainParams) -> int:
    return (params.vehicles + 2) ** n_tasks * (params.horizon + 1)


def _expected(dist: dict, values: dict) -> float:
    return sum(p * values[y] for y, p in dist.items())


def value_iteration(
    n_tasks: int,
    params: DiscreteChainParams,
    *,
    small_slot: bool = True,
    tie_tol: float = 1e-12,
    keep_q: bool = False,
) -> ValueTable:
    """Backward induction over every reachable (state, stage).

    Actions whose value is within ``tie_tol`` of the best are recorded as
    optimal; the canonical action is the one among them with the fewest
    replicas, lowest index first.
    """
    params.check(n_tasks, small_slot=small_slot)
    bound = state_space_bound(n_tasks, params)
    if bound > STATE_SPACE_CAP:
        raise StateSpaceTooLarge(
            f"(M+2)^N*(D+1) = {bound:.3g} exceeds {STATE_SPACE_CAP:.0e}; "
            "use Monte Carlo with the closed-form bound instead"
        )
    horizon = params.horizon
    s0 = initial_state(n_tasks, params)

    stages = [[s0]]
    successors = {}
    for d in range(horizon):
        p_meet = params.meeting_prob(d)
        nxt = {}
        for x in stages[d]:
            table = {}
            if p_meet < 1.0 or not decision_actions(x):
                table[None] = slot_transition(x, None, False, params)
            if p_meet > 0.0:
                for a in decision_actions(x):
                    table[a] = slot_transition(x, a, True, params)
            successors[x] = table
            for dist in table.values():
                nxt.update(dict.fromkeys(dist))
        stages.append(sorted(nxt))

    J = {x: float(terminal_reward(x)) for x in stages[horizon]}
    A, optimal, Q = {}, {}, {}
    for d in range(horizon - 1, -1, -1):
        p_meet = params.meeting_prob(d)
        for x in stages[d]:
            table = successors[x]
            idle = _expected(table[None], J) if None in table else None
            actions = [a for a in table if a is not None]
            if actions:
                q = {a: _expected(table[a], J) for a in actions}
                best = max(q.values())
                opt = frozenset(a for a in actions if q[a] >= best - tie_tol)
                optimal[x] = opt
                A[x] = min(opt, key=lambda a: (x.status[a], a))
                if keep_q:
                    Q[x] = q
                J[x] = p_meet * best + (1.0 - p_meet) * (idle if idle is not None else 0.0)
            else:
                A[x] = None
                J[x] = idle
    return ValueTable(n_tasks, params, stages, J, A, optimal, Q)
