"""Two-row cliff-corridor gridworld.

Agents start at the left end of the bottom row and must reach the goal at
its right end. The bottom row between start and goal is a cliff corridor:
each step an agent ends there, it triggers a team penalty with probability
``fall_prob``. Going around through the top row is longer but safe.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..distributional import DiracMixture, cvar, expectation
from .base import Env, EnvSpec, StepResult

STAY, UP, DOWN, LEFT, RIGHT = range(5)
_MOVES = {STAY: (0, 0), UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
_N_CHANNELS = 4  # out-of-grid, cliff, goal, other agent


@dataclass
class RiskyGridworld(Env):
    n_agents: int = 2
    width: int = 5
    horizon: int = 12
    view_radius: int = 1
    step_cost: float = 0.5
    goal_reward: float = 1.0
    fall_penalty: float = 2.0
    fall_prob: float = 0.12
    risk_alpha: float = 0.5
    _rng: np.random.Generator = field(default=None, init=False, repr=False)

    height = 2

    def __post_init__(self):
        if self.width < 3:
            raise ValueError("width must be at least 3")
        window = (2 * self.view_radius + 1) ** 2
        r_max = self.n_agents * (self.goal_reward + self.step_cost + self.fall_penalty)
        self.spec = EnvSpec(
            n_agents=self.n_agents, n_actions=5,
            obs_dim=window * _N_CHANNELS + 3,
            state_dim=3 * self.n_agents + 1,
            horizon=self.horizon, r_max=r_max,
        )
        self.start = (1, 0)
        self.goal = (1, self.width - 1)
        self._rng = np.random.default_rng(0)
        self.reset(0)
        self.risk_gap = self._verify_risk_gap()

    # -- static layout --------------------------------------------------
    def is_cliff(self, cell):
        return cell[0] == 1 and 0 < cell[1] < self.width - 1

    def _inside(self, cell):
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    # -- dynamics -------------------------------------------------------
    def _move(self, pos, action):
        dr, dc = _MOVES[action]
        cand = (pos[0] + dr, pos[1] + dc)
        return cand if self._inside(cand) else pos  # clamp at the boundary

    def transition_outcomes(self, positions, done, actions):
        """All stochastic successors: list of (prob, positions, done, reward, fell)."""
        new_pos, new_done = [], []
        reward = 0.0
        exposed = []
        for i, (pos, d, a) in enumerate(zip(positions, done, actions)):
            if d:
                new_pos.append(pos)
                new_done.append(True)
                continue
            p = self._move(pos, int(a))
            reward -= self.step_cost
            new_pos.append(p)
            if p == self.goal:
                reward += self.goal_reward
                new_done.append(True)
            else:
                new_done.append(False)
                if self.is_cliff(p):
                    exposed.append(i)
        outs = []
        for falls in itertools.product((False, True), repeat=len(exposed)):
            prob = 1.0
            for f in falls:
                prob *= self.fall_prob if f else 1.0 - self.fall_prob
            if prob == 0.0:
                continue
            r = reward - self.fall_penalty * sum(falls)
            outs.append((prob, tuple(new_pos), tuple(new_done), r, any(falls)))
        return outs

    def reset(self, seed=None):
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.positions = tuple([self.start] * self.n_agents)
        self.done = tuple([False] * self.n_agents)
        self.t = 0
        self.fell = False
        self.terminated = False
        return self.observations(), self.global_state()

    def step(self, actions) -> StepResult:
        if self.terminated:
            raise RuntimeError("episode finished; call reset()")
        actions = self._check_actions(actions)
        outs = self.transition_outcomes(self.positions, self.done, actions)
        if len(outs) == 1:
            choice = outs[0]
        else:
            u = self._rng.random()
            acc = 0.0
            choice = outs[-1]
            for out in outs:
                acc += out[0]
                if u < acc:
                    choice = out
                    break
        _, self.positions, self.done, reward, fell = choice
        self.fell = self.fell or fell
        self.t += 1
        self.terminated = all(self.done) or self.t >= self.horizon
        return StepResult(float(reward), self.terminated, self.observations(),
                          self.global_state(), self.avail_actions(), {"fell": fell})

    def avail_actions(self):
        avail = np.ones((self.n_agents, 5), dtype=bool)
        for i, d in enumerate(self.done):
            if d:
                avail[i] = False
                avail[i, STAY] = True
        return avail

    def episode_success(self) -> bool:
        return all(self.done) and not self.fell

    # -- observations ---------------------------------------------------
    def observations(self):
        rad = self.view_radius
        obs = np.zeros((self.n_agents, self.spec.obs_dim))
        for i, (r0, c0) in enumerate(self.positions):
            feats = []
            for dr in range(-rad, rad + 1):
                for dc in range(-rad, rad + 1):
                    cell = (r0 + dr, c0 + dc)
                    inside = self._inside(cell)
                    other = any(j != i and not self.done[j] and self.positions[j] == cell
                                for j in range(self.n_agents))
                    feats.extend([
                        0.0 if inside else 1.0,
                        1.0 if inside and self.is_cliff(cell) else 0.0,
                        1.0 if cell == self.goal else 0.0,
                        1.0 if other else 0.0,
                    ])
            feats.extend([r0 / (self.height - 1), c0 / (self.width - 1),
                          1.0 if self.done[i] else 0.0])
            obs[i] = feats
        return obs

    def global_state(self):
        s = []
        for (r, c), d in zip(self.positions, self.done):
            s.extend([r / (self.height - 1), c / (self.width - 1), 1.0 if d else 0.0])
        s.append(self.t / self.horizon)
        return np.array(s)

    # -- scripted reference policies ------------------------------------
    def scripted_path(self, kind):
        """Per-step action list for the 'risky' (corridor) or 'safe' (detour) route."""
        across = [RIGHT] * (self.width - 1)
        if kind == "risky":
            return across
        if kind == "safe":
            return [UP] + across + [DOWN]
        raise ValueError(f"unknown route {kind!r}")

    def scripted_return_distribution(self, kind) -> DiracMixture:
        """Exact team-return distribution of all agents following one route,
        by exhaustive expansion of every stochastic outcome."""
        path = self.scripted_path(kind)
        frontier = [(1.0, tuple([self.start] * self.n_agents),
                     tuple([False] * self.n_agents), 0.0)]
        finished = []
        for t in range(self.horizon):
            nxt = []
            for prob, pos, done, ret in frontier:
                a = path[t] if t < len(path) else STAY
                actions = [STAY if d else a for d in done]
                for p, npos, ndone, r, _ in self.transition_outcomes(pos, done, actions):
                    item = (prob * p, npos, ndone, ret + r)
                    (finished if all(ndone) else nxt).append(item)
            frontier = nxt
            if not frontier:
                break
        finished.extend(frontier)
        returns = {}
        for prob, _, _, ret in finished:
            key = round(ret, 12)
            returns[key] = returns.get(key, 0.0) + prob
        vals = sorted(returns)
        probs = np.array([returns[v] for v in vals])
        return DiracMixture(vals, probs / probs.sum())

    def _verify_risk_gap(self):
        risky = self.scripted_return_distribution("risky")
        safe = self.scripted_return_distribution("safe")
        gap = {
            "risky_mean": expectation(risky), "safe_mean": expectation(safe),
            "risky_cvar": cvar(risky, self.risk_alpha), "safe_cvar": cvar(safe, self.risk_alpha),
        }
        mean_order = gap["risky_mean"] > gap["safe_mean"]
        cvar_order = gap["risky_cvar"] > gap["safe_cvar"]
        if mean_order == cvar_order:
            raise ValueError(f"layout does not separate expectation and CVaR orderings: {gap}")
        return gap
