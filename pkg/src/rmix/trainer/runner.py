"""Episode rollouts and greedy evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .buffer import EpisodeBatch, EpisodeBuilder


@dataclass
class EpisodeStats:
    episode: EpisodeBatch
    length: int
    ret: float
    success: bool
    alphas: list = field(default_factory=list)  # per step, per agent
    rewards: list = field(default_factory=list)
    joint_actions: list = field(default_factory=list)


def run_episode(env, learner, epsilon, rng, seed=None) -> EpisodeStats:
    """Roll out one episode with epsilon-greedy CVaR action selection."""
    obs, state = env.reset(seed)
    avail = env.avail_actions()
    builder = EpisodeBuilder(env.spec)
    builder.observe(obs, state, avail)
    hidden = learner.initial_hidden()
    last = np.full(env.spec.n_agents, -1)
    ret = 0.0
    stats = EpisodeStats(None, 0, 0.0, False)
    for _ in range(env.spec.horizon):
        actions, alphas, hidden = learner.act(obs, last, hidden, avail, epsilon, rng)
        res = env.step(actions)
        builder.act(actions, res.reward, res.terminated)
        obs, state, avail = res.obs, res.state, res.avail
        builder.observe(obs, state, avail)
        ret += res.reward
        stats.alphas.append([float(a) for a in alphas])
        stats.rewards.append(res.reward)
        stats.joint_actions.append(tuple(int(a) for a in actions))
        last = actions
        if res.terminated:
            break
    stats.episode = builder.build()
    stats.length = len(builder)
    stats.ret = ret
    stats.success = bool(env.episode_success())
    return stats


@dataclass
class EvalResult:
    success_rate: float
    mean_return: float
    alpha_hist: list
    joint_actions: dict


def evaluate(env, learner, n_episodes, rng, n_levels) -> EvalResult:
    """Greedy (epsilon = 0) rollouts on the current parameters; no learning."""
    successes, returns = 0, []
    hist = np.zeros(n_levels, dtype=np.int64)
    joints: dict = {}
    for _ in range(n_episodes):
        st = run_episode(env, learner, 0.0, rng, seed=int(rng.integers(2**31)))
        successes += st.success
        returns.append(st.ret)
        for step_alphas in st.alphas:
            for a in step_alphas:
                k = min(n_levels, max(1, int(round(a * n_levels))))
                hist[k - 1] += 1
        first = st.joint_actions[0] if st.joint_actions else ()
        key = ",".join(map(str, first))
        joints[key] = joints.get(key, 0) + 1
    return EvalResult(successes / n_episodes, float(np.mean(returns)), hist.tolist(),
                      dict(sorted(joints.items())))
