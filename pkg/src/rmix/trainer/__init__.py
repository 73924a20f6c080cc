"""Replay storage, losses, the centralized learner and the training loop."""
from .buffer import BufferUnderfull, EpisodeBatch, EpisodeBuilder, ReplayBuffer
from .learner import Learner, QrGate, TargetBundle, sync_target
from .loop import TrainingRun
from .losses import (
    huber, masked_mse, quantile_huber, quantile_midpoints, quantile_regression_loss,
    td_target,
)
from .runner import EvalResult, EpisodeStats, evaluate, run_episode

__all__ = [
    "BufferUnderfull", "EpisodeBatch", "EpisodeBuilder", "ReplayBuffer", "Learner",
    "QrGate", "TargetBundle", "sync_target", "TrainingRun", "huber", "masked_mse",
    "quantile_huber", "quantile_midpoints", "quantile_regression_loss", "td_target",
    "EvalResult", "EpisodeStats", "evaluate", "run_episode",
]
