"""Single-step two-agent game with a deterministic safe lever and a noisy risky one."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..distributional import DiracMixture, cvar
from .base import Env, EnvSpec, StepResult

SAFE, RISKY = 0, 1


@dataclass
class RiskyMatrixGame(Env):
    safe_payoff: float = 2.5
    risky_high: float = 11.0
    risky_low: float = -5.0
    risky_p_high: float = 0.5
    mixed_payoff: float = 0.0
    success_alpha: float = 0.5
    _rng: np.random.Generator = field(default=None, init=False, repr=False)
    _last_joint: tuple = field(default=None, init=False, repr=False)
    _done: bool = field(default=True, init=False, repr=False)

    def __post_init__(self):
        r_max = max(abs(self.safe_payoff), abs(self.risky_high), abs(self.risky_low),
                    abs(self.mixed_payoff))
        self.spec = EnvSpec(n_agents=2, n_actions=2, obs_dim=2, state_dim=1,
                            horizon=1, r_max=r_max)
        self._rng = np.random.default_rng(0)

    def outcomes(self, joint):
        """Exact reward distribution of a joint action: list of (prob, reward)."""
        joint = tuple(int(a) for a in joint)
        if joint == (SAFE, SAFE):
            return [(1.0, self.safe_payoff)]
        if joint == (RISKY, RISKY):
            p = self.risky_p_high
            return [(1.0 - p, self.risky_low), (p, self.risky_high)]
        return [(1.0, self.mixed_payoff)]

    def _obs(self):
        return np.eye(2)

    def _state(self):
        return np.ones(1)

    def reset(self, seed=None):
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._done = False
        self._last_joint = None
        return self._obs(), self._state()

    def step(self, actions) -> StepResult:
        if self._done:
            raise RuntimeError("episode finished; call reset()")
        actions = self._check_actions(actions)
        joint = tuple(int(a) for a in actions)
        outs = self.outcomes(joint)
        if len(outs) == 1:
            reward = outs[0][1]
        else:
            reward = outs[1][1] if self._rng.random() < outs[1][0] else outs[0][1]
        self._last_joint = joint
        self._done = True
        return StepResult(float(reward), True, self._obs(), self._state(),
                          self.avail_actions(), {"joint_action": joint})

    def episode_success(self) -> bool:
        return self._last_joint == self.optimal_joint_action(self.success_alpha)

    def optimal_joint_action(self, alpha):
        table = oracle_policy_values(self, alpha)
        return max(table, key=lambda j: (table[j], tuple(-a for a in j)))


def oracle_policy_values(env: RiskyMatrixGame, alpha) -> dict:
    """Exact CVaR of every joint action by enumerating its outcomes."""
    if not hasattr(env, "outcomes"):
        raise TypeError("environment does not expose an enumerable outcome model")
    table = {}
    for joint in itertools.product(range(env.spec.n_actions), repeat=env.spec.n_agents):
        outs = env.outcomes(joint)
        z = DiracMixture([r for _, r in outs], [p for p, _ in outs])
        table[joint] = cvar(z, alpha)
    return table
