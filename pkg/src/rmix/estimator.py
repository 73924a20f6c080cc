"""scikit-learn style facade over a training run.

``fit`` trains on the configured environment (there is no X/y dataset in
reinforcement learning, so both are ignored), ``predict`` maps first-step
observations to greedy joint actions, and ``score`` is the greedy
evaluation success rate.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .config import RunConfig
from .trainer import TrainingRun, evaluate


class RMIXEstimator(BaseEstimator):
    def __init__(self, algorithm="rmix", alpha=None, env=None, seed=0, total_steps=100_000,
                 options=None):
        self.algorithm = algorithm
        self.alpha = alpha
        self.env = env
        self.seed = seed
        self.total_steps = total_steps
        self.options = options

    def _config(self):
        extra = dict(self.options or {})
        env = {"name": "matrix"} if self.env is None else dict(self.env)
        return RunConfig(algorithm=self.algorithm, alpha=self.alpha, env=env, seed=self.seed,
                         total_steps=self.total_steps, **extra)

    def fit(self, X=None, y=None):
        run = TrainingRun(self._config())
        self.history_ = run.run()
        self.learner_ = run.learner
        self.env_ = run.eval_env
        self.n_agents_ = run.env.spec.n_agents
        self.n_features_in_ = run.env.spec.obs_dim
        return self

    def predict(self, X):
        """Greedy joint actions for observations of shape (n, N, obs_dim),
        each treated as the first step of an episode with all actions available."""
        check_is_fitted(self, "learner_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            X = X[None]
        spec = self.env_.spec
        if X.shape[1:] != (spec.n_agents, spec.obs_dim):
            raise ValueError(f"expected observations of shape (n, {spec.n_agents}, "
                             f"{spec.obs_dim}), got {X.shape}")
        out = np.empty((X.shape[0], spec.n_agents), dtype=np.int64)
        last = np.full(spec.n_agents, -1)
        for i, obs in enumerate(X):
            values, _, _, _ = self.learner_.policy_values(obs, last, self.learner_.initial_hidden())
            out[i] = values.argmax(axis=1)
        return out

    def score(self, X=None, y=None, episodes=32, seed=0):
        check_is_fitted(self, "learner_")
        res = evaluate(self.env_, self.learner_, episodes, np.random.default_rng(seed),
                       self.learner_.config.n_levels)
        return res.success_rate
