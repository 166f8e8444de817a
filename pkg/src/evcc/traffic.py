"""Speed-density models and the density optima they imply.

Densities are veh/km, speeds km/h, flows veh/h. The flow-optimal (critical)
density maximises V(L)*L; the density minimising the short-deadline
violation bound maximises V(L)**2 * L.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bounds import BoundInputs, HypoexpParams, rayleigh_bound, violation_bound
from .model import SystemConfig

GRID_POINTS = 1024
GOLDEN_RTOL = 1e-6
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LinearSpeed:
    vmax: float
    lmax: float
    name: str = "linear"

    def __call__(self, L):
        return self.vmax * (1.0 - np.asarray(L, dtype=float) / self.lmax)


@dataclass(frozen=True)
class PolynomialSpeed:
    """V(L) = g - sum_k c_k * L**alpha_k on (0, lmax]."""

    g: float
    terms: tuple  # ((c_k, alpha_k), ...)
    lmax: Optional[float] = None
    name: str = "poly"

    def __post_init__(self):
        if self.lmax is None:
            object.__setattr__(self, "lmax", self._zero_crossing())

    def __call__(self, L):
        L = np.asarray(L, dtype=float)
        v = np.full(L.shape, float(self.g))
        with np.errstate(divide="ignore"):
            for c, a in self.terms:
                v = v - c * np.power(L, a)
        return v

    def _zero_crossing(self) -> float:
        from scipy.optimize import brentq

        f = lambda x: float(self(x))
        hi = 1.0
        while f(hi) > 0:
            hi *= 2.0
            if hi > 1e12:
                raise ValueError("speed never reaches zero; pass lmax explicitly")
        return brentq(f, 0.0 if f(0.0) > 0 else hi * 1e-12, hi, xtol=1e-14, rtol=1e-15)

    def monomial_optima(self) -> list:
        """Per-term (flow-optimal, eVCC-optimal) stationary points of g - c*L**a."""
        out = []
        for c, a in self.terms:
            if c == 0 or a == 0:
                out.append((math.nan, math.nan))
                continue
            out.append(((self.g / (c * (1 + a))) ** (1 / a), (self.g / (c * (1 + 2 * a))) ** (1 / a)))
        return out


@dataclass(frozen=True)
class CustomSpeed:
    """Tabulated V(L), linearly interpolated."""

    densities: tuple
    speeds: tuple
    name: str = "custom"

    def __post_init__(self):
        L = np.asarray(self.densities, dtype=float)
        if L.ndim != 1 or L.size < 2 or np.any(np.diff(L) <= 0):
            raise ValueError("densities must be strictly increasing with at least two points")
        if len(self.speeds) != L.size:
            raise ValueError("densities and speeds differ in length")
        if np.any(np.diff(np.asarray(self.speeds, dtype=float)) > 0):
            raise ValueError("tabulated speed must be non-increasing")

    @property
    def lmax(self) -> float:
        return float(self.densities[-1])

    def __call__(self, L):
        return np.interp(np.asarray(L, dtype=float), self.densities, self.speeds)

    @classmethod
    def from_csv(cls, path) -> "CustomSpeed":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise
                    continue  # header line
        L, V = zip(*rows)
        return cls(tuple(L), tuple(V))


def m27_model() -> PolynomialSpeed:
    """Calibrated freeway model: 116.4 * (1 - (L/149.797)**1.964)."""
    return PolynomialSpeed(116.4, ((116.4 / 149.797**1.964, 1.964),), lmax=149.797, name="m27")


def speed(model, L):
    arr = np.asarray(L, dtype=float)
    if np.any(arr < 0) or np.any(arr > model.lmax * (1 + 1e-12)):
        raise ValueError(f"density outside [0, {model.lmax}]")
    out = model(arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TrafficPoint:
    L: float
    V: float
    flow: float  # veh/h

    @classmethod
    def at(cls, model, L: float) -> "TrafficPoint":
        v = speed(model, L)
        return cls(L, v, v * L)


def meeting_rate_from_density(model, L: float, road_length: float) -> float:
    """Per-vehicle meeting rate with one RSU, V(L)/S, in 1/h."""
    if road_length <= 0:
        raise ValueError("road_length must be > 0")
    return speed(model, L) / road_length


def config_at_density(template: SystemConfig, model, L: float) -> SystemConfig:
    mu = meeting_rate_from_density(model, L, template.road_length) / 3600.0
    return template.replace(density=float(L), mu=max(mu, 0.0))


def golden_section_max(f: Callable[[float], float], a: float, b: float, rtol: float = GOLDEN_RTOL) -> float:
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > rtol * max(abs(a), abs(b), 1e-300):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def maximize_on_domain(objective: Callable, lmax: float, rtol: float = GOLDEN_RTOL, lo: float = 0.0) -> float:
    """Coarse grid to bracket the peak, then golden-section refinement."""
    grid = np.linspace(lo, lmax, GRID_POINTS)
    with np.errstate(all="ignore"):
        values = np.nan_to_num(np.asarray(objective(grid), dtype=float), nan=-np.inf)
    i = int(np.argmax(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
    x = golden_section_max(lambda t: float(objective(t)), a, b, rtol)
    best = max((x, grid[i], a, b), key=lambda t: float(objective(t)))
    return float(best)


def _lower_limit(model) -> float:
    # negative exponents blow up at zero density
    if isinstance(model, PolynomialSpeed) and any(a < 0 for _, a in model.terms):
        return model.lmax * 1e-9
    return 0.0


def critical_density(model, method: str = "auto") -> float:
    if method == "auto" and isinstance(model, LinearSpeed):
        return model.lmax / 2.0
    return maximize_on_domain(lambda L: model(L) * L, model.lmax, lo=_lower_limit(model))


def evcc_optimal_density(model, method: str = "auto") -> float:
    if method == "auto" and isinstance(model, LinearSpeed):
        return model.lmax / 3.0
    return maximize_on_domain(lambda L: np.square(model(L)) * L, model.lmax, lo=_lower_limit(model))


@dataclass(frozen=True)
class ConditionReport:
    monotone_nonnegative: bool
    concave: bool
    polynomial_form: bool
    boundary_exponents: tuple = ()  # exponents sitting on an open-interval endpoint
    verifiable: bool = True

    @property
    def satisfied(self) -> bool:
        return self.monotone_nonnegative and (self.concave or self.polynomial_form)


def _valid_exponent(a: float) -> bool:
    return a > 0 or -1 < a < -0.5


def check_conditions(model, samples: int = 2001) -> ConditionReport:
    """Sampled check that V is non-increasing, non-negative, and concave or of polynomial form."""
    lo = _lower_limit(model)
    L = np.linspace(lo, model.lmax, samples)
    v = model(L)
    scale = max(1.0, float(np.max(np.abs(v[np.isfinite(v)]))) if np.any(np.isfinite(v)) else 1.0)
    tol = 1e-9 * scale
    finite = bool(np.all(np.isfinite(v)))
    monotone = finite and bool(np.all(np.diff(v) <= tol)) and bool(np.all(v >= -tol))
    concave = finite and bool(np.all(np.diff(v, 2) <= tol))
    poly = False
    boundary = ()
    if isinstance(model, PolynomialSpeed):
        boundary = tuple(a for _, a in model.terms if a in (-1.0, -0.5, 0.0))
        poly = model.g >= 0 and all(c >= 0 and _valid_exponent(a) for c, a in model.terms)
    return ConditionReport(monotone, concave, poly, boundary, not isinstance(model, CustomSpeed))


@dataclass(frozen=True)
class DensityComparison:
    l_star: float
    l_dagger: float
    ordering_holds: bool
    conditions: ConditionReport
    monomial_closed_forms: tuple = ()  # ((L*, L-dagger), ...) per polynomial term


def compare_densities(model, tol: float = 1e-6) -> DensityComparison:
    l_star = critical_density(model)
    l_dag = evcc_optimal_density(model)
    closed = tuple(model.monomial_optima()) if isinstance(model, PolynomialSpeed) else ()
    return DensityComparison(l_star, l_dag, l_dag <= l_star + tol * model.lmax, check_conditions(model), closed)


@dataclass(frozen=True)
class EfficiencyPoint:
    L: float
    V: float
    violation: float
    eta_ce: float  # executed tasks per second
    eta_te: float  # veh/h
    task_gen_rate: float


def violation_at_density(template: SystemConfig, model, L: float, method: str = "bound") -> float:
    cfg = config_at_density(template, model, L)
    if cfg.alpha == 0 or cfg.mu == 0:
        return 1.0
    inputs = BoundInputs.from_config(cfg)
    if method == "bound":
        return violation_bound(inputs)
    if method == "rayleigh":
        return rayleigh_bound(inputs)
    raise ValueError(f"unknown method {method!r}")


def efficiency_curve(model, template: SystemConfig, task_gen_rate: float, grid: Sequence[float],
                     method: str = "bound", iterations: int = 1000) -> list:
    """eVCC and traffic efficiency along ``grid``.

    ``method`` is 'bound', 'rayleigh' or 'monte-carlo' (BETA simulation of
    ``iterations`` episodes at each density).
    """
    points = []
    for L in grid:
        L = float(L)
        if method == "monte-carlo":
            from .simulate import run_monte_carlo

            cfg = config_at_density(template, model, L)
            pv = run_monte_carlo(cfg, "beta", iterations).violation_ratio_mean
        else:
            pv = violation_at_density(template, model, L, method)
        v = speed(model, L)
        points.append(EfficiencyPoint(L, v, pv, task_gen_rate * (1.0 - pv), v * L, task_gen_rate))
    return points


@dataclass(frozen=True)
class TradeoffSummary:
    peak_density: float  # where eVCC efficiency is largest
    win_win_end: float  # last density where both efficiencies still rise


def tradeoff_summary(points: Sequence[EfficiencyPoint]) -> TradeoffSummary:
    ce = np.array([p.eta_ce for p in points])
    te = np.array([p.eta_te for p in points])
    L = np.array([p.L for p in points])
    peak = int(np.argmax(ce))
    rising = (np.diff(ce) > 0) & (np.diff(te) > 0)
    end = 0
    while end < rising.size and rising[end]:
        end += 1
    return TradeoffSummary(float(L[peak]), float(L[end]))
