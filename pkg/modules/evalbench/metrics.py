# modules/evalbench/metrics.py
from dataclasses import dataclass, field
from typing import Any, Dict, List, Protocol, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from core.seeding import stream
from modules.envs import EnvSpec, EnvState, Environment, WorldConfig


@dataclass
class EpisodeResult:
    """Task rewards of one evaluation episode"""
    rewards: List[float]
    index: int = 0
    terminated: bool = False
    info: Dict[str, Any] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.rewards)

    @property
    def total_reward(self) -> float:
        return float(np.sum(self.rewards))

    @property
    def stepwise_reward(self) -> float:
        if not self.rewards:
            raise ValueError(f"episode {self.index} has no steps")
        return self.total_reward / self.steps


def metric_stepwise(episodes: Sequence[Union[EpisodeResult, Sequence[float]]]) -> Tuple[float, float]:
    """Average step-wise cumulative reward and its standard error

    Each episode contributes (cumulative task reward) / (steps taken); the
    standard error is the sample std (ddof=1) over those values / sqrt(n),
    and 0 for a single episode.
    """
    if len(episodes) == 0:
        raise ValueError("metric_stepwise() needs at least one episode")
    values = np.array([e.stepwise_reward if isinstance(e, EpisodeResult)
                       else EpisodeResult(list(e)).stepwise_reward for e in episodes])
    mean = float(np.mean(values))
    if values.size == 1:
        return mean, 0.0
    return mean, float(stats.sem(values, ddof=1))


class Controller(Protocol):
    """Closed-loop actor for evaluation: sees the full real state each step"""

    def reset(self, state: EnvState) -> None: ...

    def act(self, state: EnvState) -> np.ndarray: ...


def run_episodes(spec: EnvSpec, world: WorldConfig, controller: Controller, episodes: int,
                 seed: int, start_index: int = 0) -> List[EpisodeResult]:
    """Roll ``controller`` in a world for ``episodes`` episodes

    Episode i starts from the initial state drawn by stream(seed, "episode",
    start_index + i), so different controllers evaluated with the same seed
    face the same initial states.
    """
    results = []
    env = Environment(spec, world)
    for i in range(start_index, start_index + episodes):
        state = env.reset(stream(seed, "episode", i))
        controller.reset(state)
        rewards: List[float] = []
        terminated = False
        while True:
            state, reward, terminated, truncated = env.step(controller.act(state))
            rewards.append(reward)
            if terminated or truncated:
                break
        results.append(EpisodeResult(rewards=rewards, index=i, terminated=terminated))
    return results


@dataclass
class EvalEntry:
    """One (method, deviation level) cell of a comparison report"""
    method: str
    deviation: float
    mean: float
    std_error: float
    episodes: int
    horizon: int
    seed: int
    samples: int = 1
    values: List[float] = field(default_factory=list, repr=False)

    @classmethod
    def from_episodes(cls, method: str, deviation: float, results: Sequence[EpisodeResult],
                      horizon: int, seed: int, samples: int = 1) -> 'EvalEntry':
        mean, se = metric_stepwise(results)
        return cls(method=method, deviation=float(deviation), mean=mean, std_error=se,
                   episodes=len(results), horizon=horizon, seed=int(seed), samples=samples,
                   values=[r.stepwise_reward for r in results])

    @classmethod
    def pool(cls, entries: Sequence['EvalEntry']) -> 'EvalEntry':
        """Merge entries of one method and level (e.g. one per adjacent sample)"""
        if not entries:
            raise ValueError("nothing to pool")
        values = [v for e in entries for v in e.values]
        mean, se = metric_stepwise([[v] for v in values])
        first = entries[0]
        return cls(method=first.method, deviation=first.deviation, mean=mean, std_error=se,
                   episodes=len(values), horizon=first.horizon, seed=first.seed,
                   samples=len(entries), values=values)
