"""The episodic training loop: collect, store, update, evaluate."""
from __future__ import annotations

import time
from typing import Callable, Optional

import numpy as np

from ..agent import EpsilonSchedule
from ..config import RunConfig
from ..envs import make_env
from .buffer import ReplayBuffer
from .learner import Learner
from .runner import evaluate, run_episode


class TrainingRun:
    """Owns every stateful piece of one run; ``step_episode`` advances it by
    one collected episode (and at most one optimization step)."""

    def __init__(self, config: RunConfig, env=None):
        self.config = config
        self.env = make_env(config.env) if env is None else env
        self.eval_env = make_env(config.env) if env is None else env
        seeds = np.random.SeedSequence(config.seed).spawn(4)
        self.rng_init, self.rng_act, self.rng_buffer, self.rng_eval = (
            np.random.default_rng(s) for s in seeds)
        self.learner = Learner(self.env.spec, config, self.rng_init)
        self.buffer = ReplayBuffer(config.buffer_size)
        self.schedule = EpsilonSchedule(config.epsilon_start, config.epsilon_finish,
                                        config.epsilon_anneal_steps)
        self.t_env = 0
        self.episodes = 0
        self.last_eval_t = None
        self.recent: list[dict] = []
        self.started = time.perf_counter()

    @property
    def done(self):
        return self.t_env >= self.config.total_steps

    def eval_due(self):
        return self.last_eval_t is None or self.t_env - self.last_eval_t >= self.config.eval_interval

    def step_episode(self):
        cfg = self.config
        eps = self.schedule(self.t_env)
        stats = run_episode(self.env, self.learner, eps, self.rng_act,
                            seed=int(self.rng_act.integers(2**31)))
        self.buffer.add(stats.episode)
        self.t_env += stats.length
        self.episodes += 1
        if self.buffer.can_sample(cfg.batch_size):
            batch = self.buffer.sample(cfg.batch_size, self.rng_buffer)
            self.recent.append(self.learner.train_step(batch))
        return stats

    def evaluate(self) -> dict:
        """Evaluate, update the QR gate and return one metrics record."""
        cfg = self.config
        res = evaluate(self.eval_env, self.learner, cfg.eval_episodes, self.rng_eval,
                       cfg.n_levels)
        self.learner.gate.observe(res.success_rate)
        self.last_eval_t = self.t_env

        def avg(key):
            vals = [r[key] for r in self.recent if r[key] is not None]
            return float(np.mean(vals)) if vals else None

        record = {
            "step": self.t_env,
            "episode": self.episodes,
            "train_steps": self.learner.train_steps,
            "epsilon": float(self.schedule(self.t_env)),
            "td_loss": avg("td_loss"),
            "qr_loss": avg("qr_loss"),
            "grad_norm": avg("grad_norm"),
            "eval_success_rate": res.success_rate,
            "eval_mean_return": res.mean_return,
            "alpha_hist": res.alpha_hist,
            "eval_first_joint_actions": res.joint_actions,
            "qr_armed": self.learner.gate.armed,
        }
        if cfg.log_wall_time:
            record["wall_time"] = time.perf_counter() - self.started
        self.recent = []
        return record

    def run(self, on_record: Optional[Callable[[dict], None]] = None):
        records = []

        def emit():
            rec = self.evaluate()
            records.append(rec)
            if on_record is not None:
                on_record(rec)

        while not self.done:
            if self.eval_due():
                emit()
            self.step_episode()
        emit()
        return records
