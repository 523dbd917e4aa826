import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config.config import NetworkConfig, PpoHyperparams
from core.checkpoint import decode_checkpoint, encode_checkpoint
from core.errors import DimensionMismatchError, ZeroShotRefusedError
from modules.envs import EnvState, LatentParams, RealityGap, WorldConfig, make_spec, step
from modules.ppo import ActorCritic
from modules.rat import (GapSampler, RatPolicy, RatTask, apply_zero_shot, check_zero_shot, correct_action,
                         new_rat_policy, rat_reward, train_rat, train_rat_initial)
from modules.evalbench import imitation_deviation
from modules.upn import query, train_upn

SMALL_NET = NetworkConfig(hidden_width=16, depth=1)
SMALL_PPO = PpoHyperparams(batch_size=20, epochs=2, minibatches=2, gamma=0.9)
THETA_G = LatentParams([0.5488135, 0.71518937, 0.60276338, 0.54488318, 0.4236548])


@pytest.fixture
def spec():
    return make_spec("point_mass", horizon=10)


@pytest.fixture
def upn(spec):
    # a full-gain output layer gives clearly non-zero actions
    network = NetworkConfig(hidden_width=16, depth=1, output_gain=1.0)
    return train_upn(spec, [0.0] * 5, [1.0] * 5, 0, SMALL_PPO, network, np.random.default_rng(0))


def _zero_delta_policy(upn, sampler, reset=True):
    rat = new_rat_policy(upn, THETA_G, sampler, reset, SMALL_NET, np.random.default_rng(1))
    actor = rat.agent.actor
    arrays = actor.arrays()
    n = len(actor.weights)
    arrays[n - 1] = np.zeros_like(arrays[n - 1])
    arrays[2 * n - 1] = np.zeros_like(arrays[2 * n - 1])
    return rat.with_agent(ActorCritic(actor.with_arrays(arrays), rat.agent.critic))


def test_rat_reward_examples():
    assert rat_reward([0.5, -1.0, 2.0], [0.5, -1.0, 2.0]) == 0.0
    assert rat_reward([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]) == -1.0
    assert rat_reward([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]) == -14.0
    assert rat_reward(EnvState(np.array([1.0, 1.0])), EnvState(np.array([1.0, 3.0]))) == -4.0
    with pytest.raises(DimensionMismatchError):
        rat_reward([1.0, 2.0], [1.0])


def test_correct_action_examples():
    np.testing.assert_array_equal(correct_action([0.3, -0.2], [0.0, 0.0], 1.0), [0.3, -0.2])
    np.testing.assert_array_equal(correct_action([0.5], [-0.5], 1.0), [0.0])
    np.testing.assert_array_equal(correct_action([0.9], [0.4], 1.0), [1.0])
    with pytest.raises(DimensionMismatchError):
        correct_action([0.1, 0.2], [0.1], 1.0)


def test_gap_sampler_bounds():
    sampler = GapSampler([0.0, 1.0, 0.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0, 0.0])
    rng = np.random.default_rng(2)
    for _ in range(100):
        gap = sampler.sample(rng)
        assert sampler.contains(gap)
        assert gap.offsets[2:].tolist() == [0.0, 0.0, 0.0]
    np.testing.assert_array_equal(sampler.support, [True, True, False, False, False])
    with pytest.raises(ValueError):
        GapSampler([1.0] * 5, [0.0] * 5)


def test_gap_sampler_from_absolute_ranges():
    sampler = GapSampler.from_absolute_ranges(THETA_G, absolute_low=[0.0, 0.0], absolute_high=[1.0, 3.0])
    assert sampler.low[0] == pytest.approx(-THETA_G.values[0])
    assert sampler.high[1] == pytest.approx(3.0 - THETA_G.values[1])
    assert sampler.high[4] == 0.0


@pytest.mark.parametrize("reset", [True, False])
def test_zero_gap_zero_delta_scores_zero(upn, spec, reset):
    task = RatTask(upn, spec, THETA_G, real_gap=RealityGap.zero(), reset=reset)
    rng = np.random.default_rng(3)
    for _ in range(3):
        task.reset(rng)
        done = False
        while not done:
            _, reward, terminated, truncated = task.step(np.zeros(2))
            assert reward == 0.0
            done = terminated or truncated


def test_reset_rewards_score_single_transitions(upn, spec):
    gap = RealityGap.relative(THETA_G)
    task = RatTask(upn, spec, THETA_G, real_gap=gap, reset=True)
    task.reset(np.random.default_rng(4))
    rng = np.random.default_rng(5)
    for _ in range(spec.horizon):
        state = task.real.get_state()
        action = task.upn_action
        delta = rng.uniform(-0.3, 0.3, 2)
        _, reward, terminated, truncated = task.step(delta)
        real_next, _, _ = step(spec, WorldConfig(THETA_G, gap), state, correct_action(action, delta, 1.0))
        sim_next, _, _ = step(spec, WorldConfig(THETA_G), state, action)
        assert reward == rat_reward(real_next, sim_next)
        if terminated or truncated:
            break


def test_gap_makes_rewards_negative(upn, spec):
    task = RatTask(upn, spec, THETA_G, real_gap=RealityGap.relative(THETA_G), reset=True)
    task.reset(np.random.default_rng(6))
    rewards = [task.step(np.zeros(2))[1] for _ in range(5)]
    assert all(r <= 0.0 for r in rewards)
    assert min(rewards) < 0.0
    assert task.episode_info()['mean_rat_reward'] == pytest.approx(np.mean(rewards))


def test_sampler_task_redraws_gap(upn, spec):
    sampler = GapSampler([0.0, 1.0, 0.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0, 0.0])
    task = RatTask(upn, spec, THETA_G, sampler=sampler)
    rng = np.random.default_rng(7)
    task.reset(rng)
    first = task.gap
    task.reset(rng)
    assert first != task.gap
    assert sampler.contains(task.gap)


def test_initial_training_zero_episodes_is_fresh(upn, spec):
    sampler = GapSampler([0.0] * 5, [0.0] * 5)
    rat = train_rat_initial(upn, spec, THETA_G, sampler, 0, SMALL_PPO, SMALL_NET, np.random.default_rng(8))
    assert rat.provenance == "fresh"
    assert rat.steps_trained == 0


def test_initial_training_counts_steps(upn, spec):
    sampler = GapSampler([0.0, 1.0, 0.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0, 0.0])
    rat = train_rat_initial(upn, spec, THETA_G, sampler, 3, SMALL_PPO, SMALL_NET, np.random.default_rng(9),
                            reset=False)
    assert rat.provenance == "robust_init"
    assert rat.episodes_trained == 3
    assert 3 <= rat.steps_trained <= 3 * spec.horizon
    assert rat.reset is False


def test_real_training_continues_from_initial(upn, spec):
    sampler = GapSampler([0.0, 1.0, 0.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0, 0.0])
    initial = train_rat_initial(upn, spec, THETA_G, sampler, 2, SMALL_PPO, SMALL_NET, np.random.default_rng(10))
    rat = train_rat(upn, spec, THETA_G, RealityGap.relative(THETA_G), 20, SMALL_PPO, SMALL_NET,
                    np.random.default_rng(11), initial=initial)
    assert rat.provenance == "real"
    assert rat.steps_trained >= initial.steps_trained + 20
    assert rat.sampler is initial.sampler


def test_zero_shot_guard(upn, spec):
    rat = _zero_delta_policy(upn, GapSampler([0.0] * 5, [0.0] * 5))
    shifted = LatentParams(THETA_G.values * 1.05)
    with pytest.raises(ZeroShotRefusedError):
        check_zero_shot(rat, shifted, 0.0)
    assert check_zero_shot(rat, THETA_G, 0.0) == 0.0
    with pytest.raises(ZeroShotRefusedError):
        apply_zero_shot(upn, rat, shifted, WorldConfig(shifted), spec, 2, 0, eps_max=0.0)


def test_zero_shot_at_ground_truth_is_deterministic(upn, spec):
    rat = _zero_delta_policy(upn, GapSampler([0.0] * 5, [0.0] * 5))
    world = WorldConfig(THETA_G, RealityGap.relative(THETA_G))
    a = apply_zero_shot(upn, rat, THETA_G, world, spec, 4, 0, eps_max=0.05)
    b = apply_zero_shot(upn, rat, THETA_G, world, spec, 4, 0, eps_max=0.05)
    assert a == b
    assert a.method == "rat" and a.episodes == 4


def test_checkpoint_keeps_rat_metadata(upn):
    sampler = GapSampler([0.0, 1.0, 0.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0, 0.0])
    rat = new_rat_policy(upn, THETA_G, sampler, False, SMALL_NET, np.random.default_rng(12))
    text = encode_checkpoint("rat_init", rat.to_dict(), seed=0, config_hash="abc")
    restored = RatPolicy.from_dict(decode_checkpoint(text, expected_kind="rat_init")['payload'])
    assert restored.theta_g == rat.theta_g
    np.testing.assert_array_equal(restored.sampler.low, sampler.low)
    np.testing.assert_array_equal(restored.sampler.high, sampler.high)
    assert restored.reset is False
    obs, action = np.array([0.1, 0.2, 0.0, 0.0]), np.array([0.5, -0.5])
    np.testing.assert_array_equal(restored.greedy_delta(obs, action), rat.greedy_delta(obs, action))


def test_zero_shot_leaves_models_untouched(upn, spec):
    sampler = GapSampler([0.0, 1.0, 0.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0, 0.0])
    rat = new_rat_policy(upn, THETA_G, sampler, True, SMALL_NET, np.random.default_rng(13))
    upn_before, rat_before = upn.to_dict(), rat.to_dict()
    near = LatentParams(THETA_G.values * 1.01)
    far = LatentParams(THETA_G.values * 1.2)
    gap = RealityGap.relative(THETA_G)
    apply_zero_shot(upn, rat, near, WorldConfig(near, gap), spec, 2, 0, eps_max=0.05)
    with pytest.raises(ZeroShotRefusedError):
        apply_zero_shot(upn, rat, far, WorldConfig(far, gap), spec, 2, 0, eps_max=0.05)
    assert upn.to_dict() == upn_before
    assert rat.to_dict() == rat_before


def _mean_rat_reward(task, delta, episodes=20, seed=100):
    rng = np.random.default_rng(seed)
    rewards = []
    for _ in range(episodes):
        obs = task.reset(rng)
        while True:
            obs, reward, terminated, truncated = task.step(delta(obs))
            rewards.append(reward)
            if terminated or truncated:
                break
    return float(np.mean(rewards))


TRAINING_PPO = PpoHyperparams(batch_size=200, epochs=5, minibatches=4, gamma=0.9, stepsize=1e-3)
COVERING = GapSampler([0.0, 1.0, 0.0, 0.0, 0.0], [2.5, 3.0, 0.0, 0.0, 0.0])


@pytest.fixture(scope="module")
def putt():
    spec = make_spec("point_mass", horizon=10)
    network = NetworkConfig(hidden_width=16, depth=1, output_gain=1.0)
    upn = train_upn(spec, [0.0] * 5, [1.0] * 5, 0, SMALL_PPO, network, np.random.default_rng(0))
    return spec, upn


@pytest.fixture(scope="module")
def robust_rat(putt):
    spec, upn = putt
    return train_rat_initial(upn, spec, THETA_G, COVERING, 600, TRAINING_PPO, SMALL_NET,
                             np.random.default_rng(20))


@pytest.mark.slow
def test_zero_gap_training_keeps_corrections_small(putt):
    spec, upn = putt
    zero = GapSampler([0.0] * 5, [0.0] * 5)
    rat = train_rat_initial(upn, spec, THETA_G, zero, 20, SMALL_PPO, SMALL_NET, np.random.default_rng(21))
    task = RatTask(upn, spec, THETA_G, reset=True)
    assert _mean_rat_reward(task, rat.agent.greedy) >= -1e-3

    rng = np.random.default_rng(22)
    sizes = []
    for _ in range(50):
        obs = np.array([rng.uniform(-0.8, 0.4), rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.2), 0.0])
        sizes.append(np.linalg.norm(rat.greedy_delta(obs, query(upn, obs, THETA_G))))
    assert float(np.mean(sizes)) < 0.1


@pytest.mark.slow
def test_real_training_improves_on_zero_correction(putt, robust_rat):
    spec, upn = putt
    gap = RealityGap.relative(THETA_G)
    rat = train_rat(upn, spec, THETA_G, gap, 6000, TRAINING_PPO, SMALL_NET, np.random.default_rng(23),
                    initial=robust_rat)
    task = RatTask(upn, spec, THETA_G, real_gap=gap, reset=True)
    uncorrected = _mean_rat_reward(task, lambda obs: np.zeros(spec.action_dim))
    corrected = _mean_rat_reward(task, rat.agent.greedy)
    assert uncorrected < 0.0
    assert corrected > uncorrected


@pytest.mark.slow
def test_robust_initial_policy_reduces_imitation_error(putt, robust_rat):
    spec, upn = putt
    gap = RealityGap.relative(THETA_G)
    uncorrected = imitation_deviation(upn, spec, THETA_G, gap, 50, seed=0)
    corrected = imitation_deviation(upn, spec, THETA_G, gap, 50, seed=0, correction=robust_rat.greedy_delta)
    assert np.mean(corrected < uncorrected) >= 0.8
