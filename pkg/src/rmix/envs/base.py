from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    n_agents: int
    n_actions: int
    obs_dim: int
    state_dim: int
    horizon: int
    r_max: float

    def __post_init__(self):
        for name in ("n_agents", "n_actions", "obs_dim", "state_dim", "horizon"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")


class StepResult(NamedTuple):
    reward: float
    terminated: bool
    obs: np.ndarray
    state: np.ndarray
    avail: np.ndarray
    info: dict = {}


class UnavailableActionError(ValueError):
    pass


@dataclass
class Env:
    """Interface shared by the cooperative environments.

    ``reset(seed)`` returns (obs (N, obs_dim), state); ``step(actions)``
    returns a :class:`StepResult`. ``episode_success()`` reports the
    environment's success criterion for the finished episode.
    """

    spec: EnvSpec = field(init=False)

    def reset(self, seed=None):
        raise NotImplementedError

    def step(self, actions) -> StepResult:
        raise NotImplementedError

    def avail_actions(self) -> np.ndarray:
        return np.ones((self.spec.n_agents, self.spec.n_actions), dtype=bool)

    def episode_success(self) -> bool:
        raise NotImplementedError

    def _check_actions(self, actions):
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (self.spec.n_agents,):
            raise ValueError(f"expected {self.spec.n_agents} actions, got shape {actions.shape}")
        avail = self.avail_actions()
        for i, a in enumerate(actions):
            if not 0 <= a < self.spec.n_actions or not avail[i, a]:
                raise UnavailableActionError(f"agent {i} chose unavailable action {a}")
        return actions
