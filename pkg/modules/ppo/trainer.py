# modules/ppo/trainer.py
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional
import logging

import numpy as np
from tqdm.auto import tqdm

from config.config import PpoHyperparams
from core.errors import TrainingDivergedError
from core.events import EventBus, publish_progress
from core.logger import log_metrics
from .agent import ActorCritic, OptimizerState, mean_episode_return, ppo_update
from .rollout import RlTask, collect_rollouts
from .trajectory import Trajectory


@dataclass
class UpdateRecord:
    update: int
    steps: int
    episodes: int
    mean_return: float
    diagnostics: Dict[str, float] = field(default_factory=dict)


class PpoTrainer:
    """Owns an agent, its optimizer state and a random stream

    The agent is replaced (never mutated) after each successful update, so
    ``self.agent`` is always the last finite model.
    """

    def __init__(self, agent: ActorCritic, hp: PpoHyperparams, rng: np.random.Generator,
                 stage: str = "ppo", event_bus: Optional[EventBus] = None,
                 show_progress: bool = False, optim: Optional[OptimizerState] = None):
        self.logger = logging.getLogger(__name__)
        self.agent = agent
        self.hp = hp
        self.rng = rng
        self.stage = stage
        self.event_bus = event_bus
        self.show_progress = show_progress
        self.optim = optim or OptimizerState.for_agent(agent, hp.stepsize)
        self.total_steps = 0
        self.total_episodes = 0
        self.history: List[UpdateRecord] = []

    def update(self, trajectories: List[Trajectory], min_samples: Optional[int] = None) -> UpdateRecord:
        try:
            agent, optim, diag = ppo_update(self.agent, self.optim, trajectories, self.hp,
                                            self.rng, min_samples=min_samples)
        except TrainingDivergedError as e:
            e.last_good = self.agent
            self.logger.error(f"{self.stage}: training diverged after {self.total_steps} steps: {e}")
            raise
        self.agent, self.optim = agent, optim
        self.total_steps += diag.samples
        self.total_episodes += len(trajectories)
        record = UpdateRecord(update=len(self.history) + 1, steps=self.total_steps,
                              episodes=self.total_episodes,
                              mean_return=mean_episode_return(trajectories),
                              diagnostics=diag.as_dict())
        self.history.append(record)
        log_metrics(self.logger, self.stage, update=record.update, steps=record.steps,
                    mean_return=record.mean_return, **{k: float(v) for k, v in record.diagnostics.items()
                                                       if k != 'samples'})
        publish_progress(self.event_bus, self.stage, update=record.update, steps=record.steps,
                         episodes=record.episodes, mean_return=record.mean_return,
                         **{k: v for k, v in record.diagnostics.items() if k != 'samples'})
        return record

    def train(self, task: RlTask, total_steps: int,
              on_update: Optional[Callable[[UpdateRecord], bool]] = None) -> List[UpdateRecord]:
        """Alternate rollouts and updates until ``total_steps`` more steps are consumed

        ``on_update`` may return True to stop early.
        """
        return self._loop(task, lambda steps, episodes: steps >= total_steps, total_steps, 'steps', on_update)

    def train_episodes(self, task: RlTask, episodes: int,
                       on_update: Optional[Callable[[UpdateRecord], bool]] = None) -> List[UpdateRecord]:
        """Like train() but the budget is counted in whole episodes"""
        return self._loop(task, lambda steps, eps: eps >= episodes, episodes, 'episodes', on_update,
                          episode_budget=episodes)

    def _loop(self, task, finished, budget, unit, on_update, episode_budget=None) -> List[UpdateRecord]:
        records: List[UpdateRecord] = []
        steps = episodes = 0
        with tqdm(total=budget, unit=unit, desc=self.stage, disable=not self.show_progress) as pbar:
            while not finished(steps, episodes):
                max_episodes = None if episode_budget is None else episode_budget - episodes
                batch = collect_rollouts(task, self.agent, self.hp.batch_size, self.rng,
                                         max_episodes=max_episodes)
                # a trailing partial batch (episode budget exhausted) is still used
                n = sum(len(t) for t in batch)
                record = self.update(batch, min_samples=min(n, self.hp.batch_size))
                records.append(record)
                steps += n
                episodes += len(batch)
                pbar.update(len(batch) if unit == 'episodes' else n)
                if on_update is not None and on_update(record):
                    break
        return records
