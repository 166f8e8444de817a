"""Task replication for deadline-constrained encounter-based vehicular cloud computing.

Optimal assignment by finite-horizon DP, Monte Carlo of the balanced
(BETA) rule, closed-form violation bounds, and the traffic-density optima
they imply.
"""

from .bounds import (
    BoundInputs,
    BoundReport,
    HypoexpParams,
    bound_report,
    mean_delay,
    poisson_mixture_survival,
    rayleigh_bound,
    service_cdf,
    violation_bound,
)
from .mdp import DiscreteChainParams, MdpState, ValueTable, myopic_reward, slot_transition, terminal_reward, value_iteration
from .model import FINISHED, ConfigError, EpisodeOutcome, SimStats, SystemConfig, episode_rng, validate_config
from .policy import Policy, PolicyKind, beta_assign, check_balance, round_robin_assign
from .simulate import run_monte_carlo, simulate_episode_continuous, simulate_episode_discrete
from .traffic import (
    CustomSpeed,
    LinearSpeed,
    PolynomialSpeed,
    compare_densities,
    critical_density,
    efficiency_curve,
    evcc_optimal_density,
    m27_model,
    meeting_rate_from_density,
)

__version__ = "0.1.0"
