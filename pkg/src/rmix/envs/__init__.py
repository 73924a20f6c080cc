"""Desk-scale cooperative environments with controllable risk structure."""
from .base import Env, EnvSpec, StepResult, UnavailableActionError
from .gridworld import RiskyGridworld
from .matrix_game import RISKY, SAFE, RiskyMatrixGame, oracle_policy_values

_REGISTRY = {"matrix": RiskyMatrixGame, "gridworld": RiskyGridworld}


def make_env(params: dict) -> Env:
    """Build an environment from a config section ``{"name": ..., **kwargs}``."""
    params = dict(params)
    name = params.pop("name")
    if name not in _REGISTRY:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(_REGISTRY)}")
    try:
        return _REGISTRY[name](**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name!r}: {exc}") from None


__all__ = ["Env", "EnvSpec", "StepResult", "UnavailableActionError", "RiskyGridworld",
           "RiskyMatrixGame", "oracle_policy_values", "make_env", "SAFE", "RISKY"]
