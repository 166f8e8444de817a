"""Closed-form violation bounds and their limits.

The single-task reduction: each of a Poisson(alpha) number of vehicles
serves the task after an Exp(mu) meeting delay plus an Exp(B*mu) collection
lag, so the violation probability is exp(-alpha * F(D)) with F the
hypoexponential CDF of the two stages.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

DEGENERATE_RTOL = 1e-9
SHORT_DEADLINE_THRESHOLD = 0.2


@dataclass(frozen=True)
class HypoexpParams:
    lambda1: float  # meeting rate with the task-RSU, mu
    lambda2: float  # collection rate over all RSUs, B*mu

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ValueError("both rates must be > 0")

    @classmethod
    def from_rates(cls, mu: float, n_rsus: int) -> "HypoexpParams":
        return cls(mu, n_rsus * mu)

    @property
    def degenerate(self) -> bool:
        return abs(self.lambda2 - self.lambda1) < DEGENERATE_RTOL * self.lambda1


@dataclass(frozen=True)
class BoundInputs:
    alpha: float  # mean vehicles per task, lambda*S/N
    params: HypoexpParams
    deadline: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")

    @classmethod
    def from_config(cls, cfg) -> "BoundInputs":
        return cls(cfg.alpha, HypoexpParams.from_rates(cfg.mu, cfg.n_rsus), cfg.deadline)


@dataclass(frozen=True)
class BoundReport:
    exact_bound: float
    rayleigh_bound: float
    mean_delay: float
    short_deadline_ok: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def log_service_survival(x, params: HypoexpParams):
    """log(1 - F(x)), evaluated without the 1/(lambda2 - lambda1) cancellation."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be >= 0")
    l1, l2 = params.lambda1, params.lambda2
    if params.degenerate:
        lam = 0.5 * (l1 + l2)
        return -lam * x + np.log1p(lam * x)
    diff = l2 - l1
    # 1 - F = exp(-l1 x) * (1 + l1 * (1 - exp(-diff x)) / diff)
    with np.errstate(over="ignore"):
        h = -np.expm1(-diff * x) / diff
    return -l1 * x + np.log1p(l1 * h)


def service_cdf(x, params: HypoexpParams):
    """CDF of Exp(lambda1) + Exp(lambda2); Erlang-2 when the rates coincide."""
    out = -np.expm1(log_service_survival(x, params))
    return float(out) if np.ndim(out) == 0 else out


def violation_bound(inputs: BoundInputs) -> float:
    return poisson_mixture_survival(inputs.alpha, service_cdf(inputs.deadline, inputs.params))


def rayleigh_exponent(inputs: BoundInputs) -> float:
    p = inputs.params
    return 0.5 * inputs.alpha * p.lambda1 * p.lambda2 * inputs.deadline**2


def rayleigh_bound(inputs: BoundInputs) -> float:
    return math.exp(-rayleigh_exponent(inputs))


def short_deadline_ok(inputs: BoundInputs, threshold: float = SHORT_DEADLINE_THRESHOLD) -> bool:
    p = inputs.params
    return max(p.lambda1, p.lambda2) * inputs.deadline <= threshold


def mean_delay(inputs: BoundInputs) -> float:
    """Mean of the Rayleigh-approximated completion time, in seconds."""
    if inputs.alpha <= 0:
        raise ValueError("mean delay is unbounded without vehicles (alpha = 0)")
    p = inputs.params
    return math.sqrt(math.pi / (2.0 * inputs.alpha * p.lambda1 * p.lambda2))


def bound_report(inputs: BoundInputs, threshold: float = SHORT_DEADLINE_THRESHOLD) -> BoundReport:
    delay = mean_delay(inputs) if inputs.alpha > 0 else math.inf
    return BoundReport(violation_bound(inputs), rayleigh_bound(inputs), delay, short_deadline_ok(inputs, threshold))


def poisson_mixture_survival(alpha: float, f_value: float) -> float:
    """P(no server done) when Poisson(alpha) servers each finish w.p. ``f_value``."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if not 0.0 <= f_value <= 1.0:
        raise ValueError("f_value must lie in [0, 1]")
    return math.exp(-alpha * f_value)


def poisson_mixture_series(alpha: float, f_value: float, terms: int = 200) -> float:
    """Truncated sum over k of Poisson(alpha) pmf(k) * (1 - f_value)**k."""
    total = 0.0
    miss = 1.0 - f_value
    for k in range(terms + 1):
        if alpha == 0:
            total += 1.0 if k == 0 else 0.0
            continue
        if miss == 0 and k > 0:
            break
        log_term = k * math.log(alpha) - alpha - math.lgamma(k + 1)
        if miss > 0:
            log_term += k * math.log(miss)
        total += math.exp(log_term)
    return total


def asymptotic_large_city(density, vmax, lmax, rsu_density, n_tasks, deadline) -> float:
    """Long-road limit under the linear speed model.

    ``vmax`` in km/h, ``density``/``lmax`` in veh/km, ``rsu_density`` = B/S
    in 1/km, ``deadline`` in s. Depends on S and B only through B/S.
    """
    v = vmax / 3600.0 * (1.0 - density / lmax)  # km/s
    return math.exp(-density * v**2 * rsu_density / (2.0 * n_tasks) * deadline**2)


def asymptotic_high_rsu(density, road_length, n_tasks, mu, deadline) -> float:
    """Limit as B/S grows: collection is instant once a vehicle holds the task."""
    return math.exp(-density * road_length / n_tasks * -math.expm1(-mu * deadline))


def asymptotic_high_rsu_short_deadline(density, vmax, lmax, n_tasks, deadline) -> float:
    """Short-deadline form of :func:`asymptotic_high_rsu` with the linear speed model."""
    v = vmax / 3600.0 * (1.0 - density / lmax)
    return math.exp(-density * v / n_tasks * deadline)
