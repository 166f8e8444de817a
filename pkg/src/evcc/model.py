"""Shared domain types, config validation and the RNG contract.

Task status vectors are plain tuples of ints. A non-negative entry is the
number of replicas of that task currently in service; ``FINISHED`` marks a
task whose output has been collected. Task indices are 0-based everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

FINISHED = -1

TaskStatus = tuple  # tuple[int, ...], entries >= 0 or FINISHED


class ConfigError(ValueError):
    """Raised when a configuration violates an invariant."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class SystemConfig:
    density: float  # veh/km
    road_length: float  # km
    n_tasks: int
    deadline: float  # s (slots for the discrete chain)
    n_rsus: int
    mu: float  # per-vehicle per-RSU meeting rate, 1/s
    delta: Optional[float] = None  # slot length in s, discrete chain only
    seed: int = 0
    task_interval: Optional[float] = None  # s, only used by the efficiency metric

    @property
    def mean_vehicles(self) -> float:
        return self.density * self.road_length

    @property
    def alpha(self) -> float:
        """Mean number of vehicles per task, lambda*S/N."""
        return self.density * self.road_length / self.n_tasks

    def replace(self, **changes) -> "SystemConfig":
        return validate_config(SystemConfig(**{**asdict(self), **changes}))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown key")
        return validate_config(cls(**data))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SystemConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("<root>", "expected a JSON object")
        return cls.from_dict(data)


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _finite(x) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool) and math.isfinite(x)


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError."""
    for name in ("density", "road_length", "deadline", "mu"):
        if not _finite(getattr(cfg, name)):
            raise ConfigError(name, f"must be a finite number, got {getattr(cfg, name)!r}")
    if cfg.density < 0:
        raise ConfigError("density", "must be >= 0")
    if cfg.road_length <= 0:
        raise ConfigError("road_length", "must be > 0")
    if cfg.deadline <= 0:
        raise ConfigError("deadline", "must be > 0")
    if cfg.mu < 0:
        raise ConfigError("mu", "must be >= 0")
    if not _is_int(cfg.n_tasks) or cfg.n_tasks < 1:
        raise ConfigError("n_tasks", "must be an integer >= 1")
    if not _is_int(cfg.n_rsus) or cfg.n_rsus < 1:
        raise ConfigError("n_rsus", "must be an integer >= 1")
    if not _is_int(cfg.seed) or not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed", "must be an integer in [0, 2**64)")
    if cfg.delta is not None and (not _finite(cfg.delta) or cfg.delta <= 0):
        raise ConfigError("delta", "must be > 0 when given")
    if cfg.task_interval is not None and (not _finite(cfg.task_interval) or cfg.task_interval <= 0):
        raise ConfigError("task_interval", "must be > 0 when given")
    return cfg


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    """Independent generator for episode ``episode`` of a run seeded with ``seed``.

    Streams are keyed on (seed, episode) only, so a run split across workers
    reproduces the serial run exactly.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(episode,)))


def sample_vehicle_count(density: float, road_length: float, rng: np.random.Generator) -> int:
    mean = density * road_length
    if mean < 0:
        raise ValueError("density * road_length must be >= 0")
    return int(rng.poisson(mean))


@dataclass(frozen=True)
class EpisodeOutcome:
    omega: tuple  # bool per task: completed by the deadline
    vehicle_count: int
    completion_times: tuple  # float or None per task
    offloads: tuple = ()  # replicas created per task

    @property
    def violation_ratio(self) -> float:
        return 1.0 - sum(self.omega) / len(self.omega)


@dataclass(frozen=True)
class SimStats:
    violation_ratio_mean: float
    stderr: float
    iterations: int
    per_iteration_ratios: tuple = ()
    stderr_defined: bool = True

    @classmethod
    def from_ratios(cls, ratios: Sequence[float]) -> "SimStats":
        arr = np.asarray(ratios, dtype=float)
        n = arr.size
        if n == 0:
            raise ValueError("need at least one episode")
        mean = float(arr.mean())
        if n == 1:
            return cls(mean, 0.0, 1, tuple(arr.tolist()), stderr_defined=False)
        return cls(mean, float(arr.std(ddof=1) / math.sqrt(n)), n, tuple(arr.tolist()))


def status_finished_count(status: Sequence[int]) -> int:
    return sum(1 for r in status if r == FINISHED)


def unfinished(status: Sequence[int]) -> list:
    return [i for i, r in enumerate(status) if r != FINISHED]


def format_status(status: Sequence[int]) -> str:
    return "(" + ",".join("F" if r == FINISHED else str(r) for r in status) + ")"
