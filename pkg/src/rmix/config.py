"""Run configuration with defaults taken from the published hyper-parameters."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

ALGORITHMS = ("rmix", "rmix-static", "rdn", "qmix-baseline", "vdn-baseline")
_ALIASES = {"rmix-static-alpha": "rmix-static", "rmix-static-α": "rmix-static",
            "qmix": "qmix-baseline", "vdn": "vdn-baseline"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    algorithm: str = "rmix"
    alpha: Optional[float] = None
    env: dict = field(default_factory=lambda: {"name": "matrix"})
    seed: int = 0
    total_steps: int = 100_000

    n_atoms: int = 35
    n_levels: int = 10
    gamma: float = 0.99
    lr: float = 5e-4
    batch_size: int = 32
    buffer_size: int = 5000
    target_update_interval: int = 200
    grad_clip: float = 10.0

    epsilon_start: float = 1.0
    epsilon_finish: float = 0.05
    epsilon_anneal_steps: int = 50_000

    eval_interval: int = 10_000
    eval_episodes: int = 32

    qr_period: int = 50
    qr_threshold: float = 0.35
    qr_kappa: float = 1.0

    rnn_hidden_dim: int = 64
    predictor_hidden_dim: int = 64
    chunk_dim: int = 4
    mixing_embed_dim: int = 32
    hypernet_embed_dim: int = 64

    checkpoint_interval: int = 0  # 0: checkpoint at every evaluation
    log_wall_time: bool = False

    def __post_init__(self):
        self.algorithm = _ALIASES.get(self.algorithm, self.algorithm)
        self.validate()

    # -- derived settings -----------------------------------------------
    @property
    def mixer(self) -> str:
        return "additive" if self.algorithm in ("rdn", "vdn-baseline") else "monotonic"

    @property
    def static_alpha(self) -> Optional[float]:
        """Fixed risk level, or None when the predictor chooses it."""
        if self.algorithm in ("qmix-baseline", "vdn-baseline"):
            return 1.0
        return self.alpha

    @property
    def use_qr(self) -> bool:
        return self.algorithm in ("rmix", "rmix-static", "rdn")

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.algorithm == "rmix-static" and self.alpha is None:
            raise ConfigError("rmix-static needs an alpha")
        if self.alpha is not None and not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        positive = ("n_atoms", "n_levels", "batch_size", "buffer_size", "target_update_interval",
                    "eval_interval", "eval_episodes", "qr_period", "rnn_hidden_dim",
                    "predictor_hidden_dim", "chunk_dim", "mixing_embed_dim",
                    "hypernet_embed_dim", "total_steps")
        for name in positive:
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.lr <= 0 or self.grad_clip <= 0 or self.qr_kappa <= 0:
            raise ConfigError("lr, grad_clip and qr_kappa must be positive")
        for name in ("epsilon_start", "epsilon_finish", "qr_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.epsilon_anneal_steps < 0 or self.checkpoint_interval < 0:
            raise ConfigError("epsilon_anneal_steps and checkpoint_interval must be >= 0")
        if self.buffer_size < self.batch_size:
            raise ConfigError("buffer_size must be at least batch_size")
        if not isinstance(self.env, dict) or "name" not in self.env:
            raise ConfigError("env section needs a 'name'")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in dataclasses.fields(cls)]
