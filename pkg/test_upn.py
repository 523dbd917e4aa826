import logging
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config.config import NetworkConfig, PpoHyperparams
from core.errors import DimensionMismatchError, TrainingDivergedError
from modules.envs import LatentParams, WorldConfig, make_spec
from modules.evalbench import UpnController, run_episodes
from modules.upn import (ConditionedTask, UniversalPolicy, extend_training, fine_tune, improvement_ratio,
                         query, should_stop, train_upn, upn_observation)
import modules.ppo.trainer as trainer_module

SMALL_NET = NetworkConfig(hidden_width=16, depth=1)
SMALL_PPO = PpoHyperparams(batch_size=20, epochs=2, minibatches=2)
THETA_G = LatentParams([0.5488135, 0.71518937, 0.60276338, 0.54488318, 0.4236548])


@pytest.fixture
def pendulum():
    return make_spec("pendulum", horizon=10)


@pytest.fixture
def untrained(pendulum):
    return train_upn(pendulum, [0.0] * 5, [1.0] * 5, 0, SMALL_PPO, SMALL_NET, np.random.default_rng(0))


def test_zero_budget_returns_initialized_policy(untrained):
    assert untrained.steps_trained == 0
    assert untrained.final_return is None
    assert untrained.agent.obs_dim == 3 + 5


def test_point_mass_input_length():
    spec = make_spec("point_mass", horizon=10)
    upn = train_upn(spec, [0.0] * 5, [1.0] * 5, 0, SMALL_PPO, SMALL_NET, np.random.default_rng(0))
    assert upn.agent.obs_dim == 9
    assert upn_observation(np.zeros(4), THETA_G).shape == (9,)


def test_query_is_deterministic(untrained):
    state = np.array([1.0, 0.0, 0.3])
    np.testing.assert_array_equal(query(untrained, state, THETA_G), query(untrained, state, THETA_G))


def test_query_outside_range_warns(pendulum, caplog):
    upn = train_upn(pendulum, [0.4] * 5, [0.6] * 5, 0, SMALL_PPO, SMALL_NET, np.random.default_rng(0))
    with caplog.at_level(logging.WARNING):
        query(upn, np.array([1.0, 0.0, 0.0]), LatentParams([0.9] * 5))
    assert "outside its trained range" in caplog.text


def test_policy_rejects_mismatched_agent(untrained):
    with pytest.raises(DimensionMismatchError):
        UniversalPolicy(agent=untrained.agent, env_id="point_mass", state_dim=4, action_dim=1,
                        theta_low=[0.0] * 5, theta_high=[1.0] * 5)


def test_dict_round_trip_preserves_queries(untrained):
    restored = UniversalPolicy.from_dict(untrained.to_dict())
    states = np.random.default_rng(1).standard_normal((10, 3))
    for s in states:
        np.testing.assert_array_equal(query(untrained, s, THETA_G), query(restored, s, THETA_G))


def test_conditioned_task_samples_theta_in_range(pendulum):
    task = ConditionedTask(pendulum, [0.2] * 5, [0.3] * 5)
    obs = task.reset(np.random.default_rng(2))
    assert obs.shape == (8,)
    theta = np.array(task.episode_info()['theta'])
    assert np.all((theta >= 0.2) & (theta <= 0.3))
    np.testing.assert_array_equal(obs[3:], theta)


def test_train_upn_consumes_budget(pendulum):
    upn = train_upn(pendulum, [0.0] * 5, [1.0] * 5, 40, SMALL_PPO, SMALL_NET, np.random.default_rng(3))
    assert upn.steps_trained == 40
    assert upn.final_return is not None and math.isfinite(upn.final_return)


def test_train_upn_rejects_bad_range(pendulum):
    with pytest.raises(ValueError):
        train_upn(pendulum, [0.5] * 5, [0.4] * 5, 10, SMALL_PPO, SMALL_NET, np.random.default_rng(0))


def test_improvement_rule():
    assert improvement_ratio(100.0, 104.0) == pytest.approx(0.04)
    assert should_stop(100.0, 104.0, 0.05)
    assert not should_stop(100.0, 110.0, 0.05)
    # negative returns improve towards zero
    assert improvement_ratio(-100.0, -90.0) == pytest.approx(0.1)
    assert improvement_ratio(0.0, 0.0) == 0.0
    assert improvement_ratio(0.0, 1.0) == math.inf


def test_infinite_threshold_stops_after_first_chunk(untrained, pendulum):
    tuned, report = fine_tune(untrained, THETA_G, step_budget=100, chunk_steps=20,
                              improvement_threshold=math.inf, hp=SMALL_PPO, rng=np.random.default_rng(4),
                              spec=pendulum)
    assert len(report.chunk_returns) == 1
    assert report.steps == 20
    assert report.stopped_early
    assert tuned.fine_tune_steps == 20
    assert report.baseline_return is not None


def test_fine_tune_zero_budget_is_identity(untrained, pendulum):
    tuned, report = fine_tune(untrained, THETA_G, 0, 20, 0.05, SMALL_PPO, np.random.default_rng(5), pendulum)
    assert tuned is untrained
    assert report.steps == 0


def test_extend_training_uses_exact_budget(untrained, pendulum):
    extended = extend_training(untrained, THETA_G, 25, SMALL_PPO, np.random.default_rng(6), pendulum)
    assert extended.fine_tune_steps == 25
    assert extend_training(untrained, THETA_G, 0, SMALL_PPO, np.random.default_rng(6), pendulum) is untrained


def test_infinite_threshold_stops_from_zero_baseline():
    assert improvement_ratio(0.0, 1.0) == math.inf
    assert should_stop(0.0, 1.0, math.inf)
    assert should_stop(-5.0, 5.0, math.inf)
    assert not should_stop(0.0, 1.0, 0.05)


def test_extend_training_divergence_keeps_policy_wrapper(untrained, pendulum, monkeypatch):
    def diverge(*args, **kwargs):
        raise TrainingDivergedError("PPO loss became non-finite")

    monkeypatch.setattr(trainer_module, 'ppo_update', diverge)
    with pytest.raises(TrainingDivergedError) as info:
        extend_training(untrained, THETA_G, 40, SMALL_PPO, np.random.default_rng(7), pendulum)
    last_good = info.value.last_good
    assert isinstance(last_good, UniversalPolicy)
    assert last_good.theta_low.tolist() == untrained.theta_low.tolist()
    assert last_good.fine_tune_steps == untrained.fine_tune_steps
    obs = np.array([0.1, -0.2, 0.3])
    np.testing.assert_array_equal(query(last_good, obs, THETA_G), query(untrained, obs, THETA_G))


class _ZeroController:
    def reset(self, state):
        pass

    def act(self, state):
        return np.zeros(2)


class _RandomController:
    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)

    def reset(self, state):
        pass

    def act(self, state):
        return self.rng.uniform(-1.0, 1.0, 2)


def _mean_return(spec, world, controller, episodes=20, seed=0):
    return float(np.mean([sum(r.rewards) for r in run_episodes(spec, world, controller, episodes, seed)]))


@pytest.fixture(scope="module")
def putt_upn():
    spec = make_spec("point_mass", horizon=50)
    hp = PpoHyperparams(batch_size=1000, epochs=5, minibatches=4, stepsize=1e-3)
    network = NetworkConfig(hidden_width=32, depth=1)
    return spec, train_upn(spec, [0.0] * 5, [1.0] * 5, 40000, hp, network, np.random.default_rng(0))


@pytest.mark.slow
def test_trained_upn_beats_random_policy(putt_upn):
    spec, upn = putt_upn
    world = WorldConfig(THETA_G)
    still = _mean_return(spec, world, _ZeroController())
    upn_gain = _mean_return(spec, world, UpnController(upn, THETA_G, spec)) - still
    random_gain = _mean_return(spec, world, _RandomController(1)) - still
    assert upn_gain > 0.0
    assert upn_gain >= 5.0 * abs(random_gain)


@pytest.mark.slow
def test_trained_upn_depends_on_theta(putt_upn):
    spec, upn = putt_upn
    light = LatentParams([0.05, 0.05, 0.05, 0.05, 0.5])
    heavy = LatentParams([0.95, 0.95, 0.95, 0.95, 0.5])
    rng = np.random.default_rng(3)
    states = [np.array([rng.uniform(-0.8, 0.4), rng.uniform(-0.3, 0.3), 0.0, 0.0]) for _ in range(16)]
    gaps = [np.linalg.norm(query(upn, s, light) - query(upn, s, heavy)) for s in states]
    assert max(gaps) > 1e-6
