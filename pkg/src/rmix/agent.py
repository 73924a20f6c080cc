"""Shared recurrent agent network emitting per-action return atoms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import GRUCell, Linear, Module, Tensor, as_tensor, one_hot


def agent_inputs(obs, last_actions, n_actions):
    """Assemble agent inputs: observation, one-hot last action, one-hot id.

    ``obs`` is (..., N, obs_dim) and ``last_actions`` (..., N) with -1 meaning
    "no previous action" (all-zero one-hot).
    """
    obs = np.asarray(obs, dtype=np.float64)
    n_agents = obs.shape[-2]
    last = np.asarray(last_actions)
    last_oh = one_hot(np.maximum(last, 0), n_actions) * (last >= 0)[..., None]
    ids = np.broadcast_to(np.eye(n_agents), obs.shape[:-1] + (n_agents,))
    return np.concatenate([obs, last_oh, ids], axis=-1)


class AgentNet(Module):
    """obs+last action+id -> Linear/ReLU -> GRU -> Linear -> (A, M) atoms."""

    def __init__(self, input_dim, n_actions, n_atoms, hidden_dim=64, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.fc1 = Linear(input_dim, hidden_dim, rng)
        self.rnn = GRUCell(hidden_dim, hidden_dim, rng)
        self.fc2 = Linear(hidden_dim, n_actions * n_atoms, rng)
        self.n_actions = n_actions
        self.n_atoms = n_atoms
        self.hidden_dim = hidden_dim

    def init_hidden(self, batch):
        return Tensor(np.zeros((batch, self.hidden_dim)))

    def __call__(self, x, h):
        x = as_tensor(x)
        h = self.rnn(self.fc1(x).relu(), as_tensor(h))
        atoms = self.fc2(h).reshape(x.shape[0], self.n_actions, self.n_atoms)
        return atoms, h


def select_action(values, epsilon, rng, avail=None):
    """Epsilon-greedy over available actions; greedy ties go to the lowest index."""
    values = np.asarray(values, dtype=np.float64)
    avail = np.ones(values.shape, dtype=bool) if avail is None else np.asarray(avail, dtype=bool)
    if not avail.any():
        raise ValueError("no available action")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.choice(np.flatnonzero(avail)))
    return int(np.argmax(np.where(avail, values, -np.inf)))


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    finish: float = 0.05
    anneal_steps: int = 50_000

    def __call__(self, step: int) -> float:
        if step < 0:
            raise ValueError("step must be nonnegative")
        if self.anneal_steps <= 0 or step >= self.anneal_steps:
            return self.finish
        frac = step / self.anneal_steps
        return self.start + frac * (self.finish - self.start)


def epsilon_schedule(step: int, start=1.0, finish=0.05, anneal_steps=50_000) -> float:
    return EpsilonSchedule(start, finish, anneal_steps)(step)
