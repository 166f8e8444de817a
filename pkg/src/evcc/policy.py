"""Task assignment rules: BETA, the round-robin baseline, and a DP table wrapper."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .model import FINISHED


class BalanceSnapshot(NamedTuple):
    gamma: int  # total active replicas
    u: int  # unfinished tasks


def beta_assign(status: Sequence[int]) -> Optional[int]:
    """Unfinished task with the fewest replicas (lowest index on ties), or None."""
    best = None
    for i, r in enumerate(status):
        if r != FINISHED and (best is None or r < status[best]):
            best = i
    return best


def round_robin_assign(k: int, n_tasks: int) -> int:
    """Task for the k-th meeting (k counted from 0), finished or not."""
    if k < 0:
        raise ValueError("meeting index must be >= 0")
    return k % n_tasks


def balance_snapshot(status: Sequence[int]) -> BalanceSnapshot:
    active = [r for r in status if r != FINISHED]
    return BalanceSnapshot(sum(active), len(active))


def check_balance(status: Sequence[int]) -> bool:
    gamma, u = balance_snapshot(status)
    if u == 0:
        return True
    lo, hi = gamma // u, -(-gamma // u)
    return all(r in (lo, hi) for r in status if r != FINISHED)


class PolicyKind(enum.Enum):
    BETA = "beta"
    ROUND_ROBIN = "round-robin"
    MDP_TABLE = "mdp"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    table: object = None  # mdp.ValueTable for MDP_TABLE

    def __post_init__(self):
        if (self.kind is PolicyKind.MDP_TABLE) != (self.table is not None):
            raise ValueError("a value table is required for (and only for) the mdp policy")

    @classmethod
    def beta(cls) -> "Policy":
        return cls(PolicyKind.BETA)

    @classmethod
    def round_robin(cls) -> "Policy":
        return cls(PolicyKind.ROUND_ROBIN)

    @classmethod
    def from_table(cls, table) -> "Policy":
        return cls(PolicyKind.MDP_TABLE, table)


def as_policy(policy) -> Policy:
    """Accept a Policy, a PolicyKind, a ValueTable or one of 'beta'/'round-robin'."""
    if isinstance(policy, Policy):
        return policy
    if isinstance(policy, PolicyKind):
        return Policy(policy)
    if isinstance(policy, str):
        kind = PolicyKind(policy)
        if kind is PolicyKind.MDP_TABLE:
            raise ValueError("the mdp policy needs a value table; pass the table itself")
        return Policy(kind)
    if hasattr(policy, "action"):
        return Policy.from_table(policy)
    raise TypeError(f"cannot interpret {policy!r} as a policy")
