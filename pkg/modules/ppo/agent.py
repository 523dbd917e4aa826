# modules/ppo/agent.py
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from config.config import NetworkConfig, PpoHyperparams
from core.errors import NonFiniteError, TrainingDivergedError
from modules.neuralcore import (AdamState, ForwardCache, GaussianHead, MlpParams,
                                adam_step, backward, forward)
from modules.neuralcore.gaussian import LOG_2PI
from .gae import gae_advantages, normalize_advantages
from .trajectory import Trajectory

logger = logging.getLogger(__name__)


@dataclass
class ActorCritic:
    """Gaussian actor plus a scalar value network over the same observation"""
    actor: MlpParams
    critic: MlpParams

    @classmethod
    def initialize(cls, obs_dim: int, action_dim: int, network: NetworkConfig,
                   rng: np.random.Generator, init_log_std: float) -> 'ActorCritic':
        actor = MlpParams.initialize(network.sizes(obs_dim, action_dim), rng,
                                     output_gain=network.output_gain, init_log_std=init_log_std)
        critic = MlpParams.initialize(network.sizes(obs_dim, 1), rng, output_gain=1.0)
        return cls(actor=actor, critic=critic)

    @property
    def obs_dim(self) -> int:
        return self.actor.input_dim

    @property
    def action_dim(self) -> int:
        return self.actor.output_dim

    def head(self, obs) -> GaussianHead:
        mean, log_std = forward(self.actor, obs)
        return GaussianHead(mean, log_std)

    def greedy(self, obs) -> np.ndarray:
        return forward(self.actor, obs)[0]

    def value(self, obs):
        v = forward(self.critic, obs)[0]
        return float(v[0]) if v.ndim == 1 else v[:, 0]

    def is_finite(self) -> bool:
        return self.actor.is_finite() and self.critic.is_finite()

    def copy(self) -> 'ActorCritic':
        return ActorCritic(self.actor.copy(), self.critic.copy())

    def to_dict(self) -> Dict[str, Any]:
        return {'actor': self.actor.to_dict(), 'critic': self.critic.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ActorCritic':
        return cls(actor=MlpParams.from_dict(data['actor']), critic=MlpParams.from_dict(data['critic']))


@dataclass
class OptimizerState:
    actor: AdamState
    critic: AdamState

    @classmethod
    def for_agent(cls, agent: ActorCritic, stepsize: float) -> 'OptimizerState':
        return cls(AdamState.for_params(agent.actor, stepsize), AdamState.for_params(agent.critic, stepsize))

    def with_stepsize(self, stepsize: float) -> 'OptimizerState':
        return OptimizerState(self.actor.with_stepsize(stepsize), self.critic.with_stepsize(stepsize))


@dataclass
class UpdateDiagnostics:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float
    samples: int

    def as_dict(self) -> Dict[str, float]:
        return {
            'policy_loss': self.policy_loss,
            'value_loss': self.value_loss,
            'entropy': self.entropy,
            'clip_fraction': self.clip_fraction,
            'approx_kl': self.approx_kl,
            'samples': self.samples,
        }


def policy_loss_and_grads(actor: MlpParams, obs: np.ndarray, actions: np.ndarray,
                          old_log_probs: np.ndarray, advantages: np.ndarray,
                          clip: float, entcoeff: float) -> Tuple[float, MlpParams, Dict[str, float]]:
    """Clipped surrogate loss (to minimise) and its exact gradient

    loss = -mean(min(r * A, clip(r, 1-c, 1+c) * A)) - entcoeff * H
    with r = exp(log_pi(a|s) - log_pi_old(a|s)).
    """
    cache = ForwardCache()
    mean, log_std = forward(actor, obs, cache)
    std = np.exp(log_std)
    z = (actions - mean) / std
    dim = actions.shape[-1]
    logp = -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * dim * LOG_2PI
    ratio = np.exp(logp - old_log_probs)
    surr_unclipped = ratio * advantages
    surr_clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages
    ent = float(np.sum(log_std) + 0.5 * dim * (LOG_2PI + 1.0))
    n = advantages.shape[0]
    loss = -float(np.mean(np.minimum(surr_unclipped, surr_clipped))) - entcoeff * ent

    # gradient flows only where the unclipped branch is the active minimum
    active = surr_unclipped <= surr_clipped
    dlogp = -(active * ratio * advantages) / n
    grads = backward(actor, cache, dlogp[:, None] * z / std)
    dlog_std = np.sum(dlogp[:, None] * (z * z - 1.0), axis=0) - entcoeff
    grads = MlpParams(grads.weights, grads.biases, log_std=dlog_std, activation=actor.activation)

    stats = {
        'entropy': ent,
        'clip_fraction': float(np.mean(np.abs(ratio - 1.0) > clip)),
        'approx_kl': float(np.mean(old_log_probs - logp)),
    }
    return loss, grads, stats


def value_loss_and_grads(critic: MlpParams, obs: np.ndarray, returns: np.ndarray,
                         vf_coef: float) -> Tuple[float, MlpParams]:
    cache = ForwardCache()
    values = forward(critic, obs, cache)[0][:, 0]
    diff = values - returns
    n = returns.shape[0]
    loss = vf_coef * float(np.mean(diff * diff))
    grads = backward(critic, cache, (vf_coef * 2.0 * diff / n)[:, None])
    return loss, grads


def flatten_batch(trajectories: Sequence[Trajectory], gamma: float, lam: float):
    """Stack trajectories into arrays and compute per-episode GAE targets"""
    obs, actions, old_logp, advantages, returns = [], [], [], [], []
    for traj in trajectories:
        adv, ret = gae_advantages(traj, gamma, lam)
        obs.append(np.vstack(traj.states))
        actions.append(np.vstack(traj.actions))
        old_logp.append(np.asarray(traj.log_probs))
        advantages.append(adv)
        returns.append(ret)
    return (np.vstack(obs), np.vstack(actions), np.concatenate(old_logp),
            np.concatenate(advantages), np.concatenate(returns))


def ppo_update(agent: ActorCritic, optim: OptimizerState, trajectories: Sequence[Trajectory],
               hp: PpoHyperparams, rng: np.random.Generator,
               min_samples: Optional[int] = None) -> Tuple[ActorCritic, OptimizerState, UpdateDiagnostics]:
    """Run ``hp.epochs`` passes of minibatch Adam over one on-policy batch

    The inputs are never mutated. If any loss or gradient turns non-finite
    the update is abandoned with TrainingDivergedError and the caller keeps
    the agent it passed in.

    Args:
        min_samples: smallest acceptable batch (defaults to ``hp.batch_size``)
    """
    if not trajectories:
        raise ValueError("ppo_update() needs at least one trajectory")
    obs, actions, old_logp, advantages, returns = flatten_batch(trajectories, hp.gamma, hp.lam)
    n = obs.shape[0]
    required = hp.batch_size if min_samples is None else min_samples
    if n < required:
        raise ValueError(f"batch of {n} samples is smaller than the required {required}")
    advantages = normalize_advantages(advantages)

    actor, critic = agent.actor, agent.critic
    optim = optim.with_stepsize(hp.stepsize)
    actor_state, critic_state = optim.actor, optim.critic
    mb_size = int(np.ceil(n / hp.minibatches))
    p_losses, v_losses, ents, clips, kls = [], [], [], [], []

    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        for start in range(0, n, mb_size):
            idx = order[start:start + mb_size]
            p_loss, p_grads, stats = policy_loss_and_grads(
                actor, obs[idx], actions[idx], old_logp[idx], advantages[idx], hp.clip, hp.entcoeff)
            v_loss, v_grads = value_loss_and_grads(critic, obs[idx], returns[idx], hp.vf_coef)
            diagnostics = {'epoch': epoch, 'policy_loss': p_loss, 'value_loss': v_loss, **stats}
            if not (np.isfinite(p_loss) and np.isfinite(v_loss)):
                raise TrainingDivergedError("PPO loss became non-finite", last_good=agent,
                                            diagnostics=diagnostics)
            try:
                actor, actor_state = adam_step(actor_state, actor, p_grads)
                critic, critic_state = adam_step(critic_state, critic, v_grads)
            except NonFiniteError as e:
                raise TrainingDivergedError(f"PPO gradient became non-finite: {e}", last_good=agent,
                                            diagnostics=diagnostics) from e
            p_losses.append(p_loss)
            v_losses.append(v_loss)
            ents.append(stats['entropy'])
            clips.append(stats['clip_fraction'])
            kls.append(stats['approx_kl'])

    new_agent = ActorCritic(actor, critic)
    if not new_agent.is_finite():
        raise TrainingDivergedError("PPO parameters became non-finite", last_good=agent,
                                    diagnostics={'samples': n})
    report = UpdateDiagnostics(policy_loss=float(np.mean(p_losses)), value_loss=float(np.mean(v_losses)),
                               entropy=float(np.mean(ents)), clip_fraction=float(np.mean(clips)),
                               approx_kl=float(np.mean(kls)), samples=n)
    return new_agent, OptimizerState(actor_state, critic_state), report


def mean_episode_return(trajectories: List[Trajectory]) -> float:
    return float(np.mean([t.episode_return for t in trajectories]))
