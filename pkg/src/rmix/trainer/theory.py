"""Exact tabular checks: the CVaR Bellman operator and the post-update bias probe."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..distributional import tail_count


@dataclass
class TabularMDP:
    """Enumerable multi-agent MDP over joint actions.

    transition: (S, U, S) with rows summing to 1; reward: (S, U) mean rewards;
    U = n_actions ** n_agents joint actions in lexicographic order.
    """

    transition: np.ndarray
    reward: np.ndarray
    n_agents: int
    n_actions: int
    r_max: float

    @classmethod
    def random(cls, rng, n_states=4, n_agents=2, n_actions=3, r_max=1.0):
        u = n_actions ** n_agents
        trans = rng.dirichlet(np.ones(n_states), size=(n_states, u))
        reward = rng.uniform(-r_max, r_max, size=(n_states, u))
        return cls(trans, reward, n_agents, n_actions, r_max)

    @property
    def n_states(self):
        return self.reward.shape[0]

    def joint_actions(self):
        return list(itertools.product(range(self.n_actions), repeat=self.n_agents))


def bellman_operator(mdp: TabularMDP, c_tot, gamma):
    """``(T C)(s, u) = R(s, u) + gamma * sum_s' P(s'|s,u) max_u' C(s', u')``."""
    return mdp.reward + gamma * mdp.transition @ np.max(c_tot, axis=1)


def contraction_ratio(mdp, c1, c2, gamma):
    """``||T C1 - T C2||_inf / ||C1 - C2||_inf`` (nan when C1 == C2)."""
    num = np.max(np.abs(bellman_operator(mdp, c1, gamma) - bellman_operator(mdp, c2, gamma)))
    den = np.max(np.abs(c1 - c2))
    return num / den if den > 0 else float("nan")


def additive_tables(per_agent):
    """Joint table from per-agent tables (S, A) via summation, lexicographic joints."""
    out = per_agent[0]
    for table in per_agent[1:]:
        out = (out[:, :, None] + table[:, None, :]).reshape(out.shape[0], -1)
    return out


@dataclass
class ProbeMDP:
    """Next-state layer for the bias probe.

    Each agent i has ground-truth action values ``q[i, s', u]``; its return
    from (s', u) is ``q + noise`` with noise uniform on ``[-noise, noise]``.
    A value head that has seen ``n_atoms`` return samples per action holds
    those samples as its atoms.
    """

    q: np.ndarray  # (N, S', A)
    noise: float = 2.0
    gamma: float = 0.99

    @classmethod
    def random(cls, rng, n_agents=2, n_states=4, n_actions=3, noise=2.0, gamma=0.99):
        return cls(rng.uniform(-1.0, 1.0, size=(n_agents, n_states, n_actions)), noise, gamma)

    @property
    def n_agents(self):
        return self.q.shape[0]

    @property
    def n_states(self):
        return self.q.shape[1]

    @property
    def r_max(self):
        return float(np.abs(self.q).max() + self.noise)

    def sample_atoms(self, rng, n_samples, n_atoms):
        """(n_samples, N, A, M) atoms and the sampled next states."""
        s = rng.integers(self.n_states, size=n_samples)
        base = self.q[:, s, :].transpose(1, 0, 2)  # (n, N, A)
        eps = rng.uniform(-self.noise, self.noise, size=base.shape + (n_atoms,))
        return base[..., None] + eps, s


def bias_probe(probe: ProbeMDP, alphas, n_samples=100_000, n_atoms=35, rng=None,
               exact_atoms=False, chunk=10_000):
    """Monte-Carlo estimate of the post-update bias under additive mixing.

    ``psi = gamma * (max_u C_tot(s', u) - max_u Q_tot(s', u))`` where C uses
    the CVaR of each agent's sampled atoms at level alpha. Every alpha is
    evaluated on the same samples. Returns {alpha: (mean, standard error)}.
    With ``exact_atoms`` the atoms are point masses at the true values.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    alphas = [float(a) for a in alphas]
    counts = [tail_count(a, n_atoms) for a in alphas]
    sums = np.zeros(len(alphas))
    sq = np.zeros(len(alphas))
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        atoms, s = probe.sample_atoms(rng, n, n_atoms)
        if exact_atoms:
            atoms = np.repeat(probe.q[:, s, :].transpose(1, 0, 2)[..., None], n_atoms, axis=-1)
        q_best = probe.q[:, s, :].max(axis=2).sum(axis=0)  # (n,)
        srt = np.sort(atoms, axis=-1)
        prefix = np.cumsum(srt, axis=-1)
        for i, k in enumerate(counts):
            c = prefix[..., k - 1] / k  # (n, N, A)
            psi = probe.gamma * (c.max(axis=2).sum(axis=1) - q_best)
            sums[i] += psi.sum()
            sq[i] += (psi * psi).sum()
        done += n
    mean = sums / n_samples
    var = np.maximum(sq / n_samples - mean * mean, 0.0)
    se = np.sqrt(var / n_samples)
    return {a: (float(m), float(e)) for a, m, e in zip(alphas, mean, se)}
