import json
import math

import numpy as np
import pytest

from evcc.model import (
    ConfigError,
    SimStats,
    SystemConfig,
    episode_rng,
    sample_vehicle_count,
    validate_config,
)


def base_config(**kw):
    base = dict(density=60.0, road_length=10.0, n_tasks=50, deadline=80.0, n_rsus=10, mu=0.0016)
    base.update(kw)
    return SystemConfig(**base)


def test_reference_configuration_accepted():
    cfg = base_config()
    assert validate_config(cfg) is cfg


def test_empty_road_accepted():
    assert validate_config(base_config(density=0.0)).alpha == 0


@pytest.mark.parametrize(
    "field,value",
    [("road_length", -1.0), ("road_length", 0.0), ("deadline", 0.0), ("n_rsus", 0),
     ("density", -1.0), ("mu", -0.1), ("n_tasks", 0), ("n_tasks", 2.5), ("seed", -1),
     ("delta", 0.0), ("deadline", math.nan)],
)
def test_invalid_field_is_named(field, value):
    with pytest.raises(ConfigError) as err:
        validate_config(base_config(**{field: value}))
    assert err.value.field == field


def test_json_round_trip_and_unknown_keys():
    cfg = base_config(seed=123, delta=0.5)
    assert SystemConfig.from_json(cfg.to_json()) == cfg
    data = json.loads(cfg.to_json())
    data["colour"] = "red"
    with pytest.raises(ConfigError, match="colour"):
        SystemConfig.from_dict(data)


def test_poisson_zero_mean():
    rng = np.random.default_rng(0)
    assert all(sample_vehicle_count(0.0, 10.0, rng) == 0 for _ in range(100))


def test_poisson_moments_at_600():
    rng = np.random.default_rng(2024)
    draws = np.array([sample_vehicle_count(60.0, 10.0, rng) for _ in range(100_000)])
    assert abs(draws.mean() - 600) <= 3 * math.sqrt(600 / 1e5)
    assert abs(draws.var(ddof=1) / 600 - 1) < 0.05


def test_episode_streams_are_keyed_by_seed_and_index():
    a = episode_rng(7, 3).random(5)
    assert np.array_equal(a, episode_rng(7, 3).random(5))
    assert not np.array_equal(a, episode_rng(7, 4).random(5))
    assert not np.array_equal(a, episode_rng(8, 3).random(5))


def test_simstats_single_iteration_flags_stderr():
    st = SimStats.from_ratios([0.4])
    assert st.iterations == 1 and st.stderr == 0.0 and not st.stderr_defined


def test_simstats_mean_and_stderr():
    st = SimStats.from_ratios([0.0, 1.0, 0.5, 0.5])
    assert st.violation_ratio_mean == 0.5
    assert st.stderr == pytest.approx(np.std([0, 1, 0.5, 0.5], ddof=1) / 2)
