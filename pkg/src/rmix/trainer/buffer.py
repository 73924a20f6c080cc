"""Episode storage: padded episode batches and a ring replay buffer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EpisodeBatch:
    """B episodes padded to T steps.

    obs (B, T+1, N, obs_dim), state (B, T+1, S), avail (B, T+1, N, A) hold the
    observation at every decision point plus the one after the last action.
    actions (B, T, N), reward (B, T), terminated (B, T), filled (B, T).
    Padded steps have ``filled == 0`` and at least one available action.
    """

    obs: np.ndarray
    state: np.ndarray
    avail: np.ndarray
    actions: np.ndarray
    reward: np.ndarray
    terminated: np.ndarray
    filled: np.ndarray

    @property
    def batch_size(self):
        return self.actions.shape[0]

    @property
    def max_t(self):
        return self.actions.shape[1]

    @property
    def n_agents(self):
        return self.actions.shape[2]

    def last_actions(self):
        """(B, T+1, N) previous action per decision point, -1 before the first."""
        b, t, n = self.actions.shape
        out = np.full((b, t + 1, n), -1, dtype=np.int64)
        out[:, 1:] = self.actions
        return out

    def __getitem__(self, idx):
        return EpisodeBatch(*(getattr(self, f)[idx] for f in _FIELDS))

    @classmethod
    def concat(cls, batches):
        return cls(*(np.concatenate([getattr(b, f) for b in batches]) for f in _FIELDS))

    def padded_to(self, max_t):
        """Copy extended with padding steps up to ``max_t``."""
        extra = max_t - self.max_t
        if extra < 0:
            raise ValueError("cannot shrink a batch")
        if extra == 0:
            return self

        def pad(arr, fill=0):
            width = [(0, 0)] * arr.ndim
            width[1] = (0, extra)
            return np.pad(arr, width, constant_values=fill)

        avail = pad(self.avail.astype(bool), False)
        avail[:, self.max_t + 1:, :, 0] = True
        return EpisodeBatch(pad(self.obs), pad(self.state), avail, pad(self.actions),
                            pad(self.reward), pad(self.terminated), pad(self.filled))


_FIELDS = ("obs", "state", "avail", "actions", "reward", "terminated", "filled")


class EpisodeBuilder:
    """Accumulates one episode and emits a B=1 batch padded to ``horizon``."""

    def __init__(self, spec):
        self.spec = spec
        self.obs, self.state, self.avail = [], [], []
        self.actions, self.reward, self.terminated = [], [], []

    def observe(self, obs, state, avail):
        self.obs.append(np.asarray(obs, dtype=np.float64))
        self.state.append(np.asarray(state, dtype=np.float64))
        self.avail.append(np.asarray(avail, dtype=bool))

    def act(self, actions, reward, terminated):
        self.actions.append(np.asarray(actions, dtype=np.int64))
        self.reward.append(float(reward))
        self.terminated.append(float(terminated))

    def __len__(self):
        return len(self.actions)

    def build(self) -> EpisodeBatch:
        sp = self.spec
        t, h = len(self.actions), sp.horizon
        if len(self.obs) != t + 1:
            raise ValueError("episode needs one more observation than actions")
        obs = np.zeros((1, h + 1, sp.n_agents, sp.obs_dim))
        state = np.zeros((1, h + 1, sp.state_dim))
        avail = np.zeros((1, h + 1, sp.n_agents, sp.n_actions), dtype=bool)
        avail[0, :, :, 0] = True
        actions = np.zeros((1, h, sp.n_agents), dtype=np.int64)
        reward = np.zeros((1, h))
        term = np.zeros((1, h))
        filled = np.zeros((1, h))
        obs[0, :t + 1] = self.obs
        state[0, :t + 1] = self.state
        avail[0, :t + 1] = self.avail
        if t:
            actions[0, :t] = self.actions
            reward[0, :t] = self.reward
            term[0, :t] = self.terminated
            filled[0, :t] = 1.0
        return EpisodeBatch(obs, state, avail, actions, reward, term, filled)


class ReplayBuffer:
    """Ring buffer of complete episodes, all padded to the same horizon."""

    def __init__(self, capacity=5000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.episodes: list[EpisodeBatch] = []
        self.next_index = 0
        self.total_added = 0

    def __len__(self):
        return len(self.episodes)

    def add(self, episode: EpisodeBatch):
        if episode.batch_size != 1:
            raise ValueError("add one episode at a time")
        if len(self.episodes) < self.capacity:
            self.episodes.append(episode)
        else:
            self.episodes[self.next_index] = episode
        self.next_index = (self.next_index + 1) % self.capacity
        self.total_added += 1

    def can_sample(self, batch_size):
        return len(self.episodes) >= batch_size

    def sample(self, batch_size, rng) -> EpisodeBatch:
        if not self.can_sample(batch_size):
            raise BufferUnderfull(f"{len(self.episodes)} episodes stored, need {batch_size}")
        idx = rng.choice(len(self.episodes), size=batch_size, replace=False)
        return EpisodeBatch.concat([self.episodes[i] for i in idx])


class BufferUnderfull(RuntimeError):
    pass
