"""Config files, flag overrides and ``RMIX_*`` environment overrides.

A config file is flat YAML with one nested ``env`` section::

    algorithm: rmix-static
    alpha: 0.5
    seed: 3
    total_steps: 3000
    env:
      name: matrix

Resolution order, later wins: dataclass defaults, file, environment
variables, explicit overrides (CLI flags). Environment variables are
``RMIX_<FIELD>`` for top-level fields (``RMIX_LR=1e-3``) and
``RMIX_ENV__<KEY>`` for the env section (``RMIX_ENV__WIDTH=6``). Their
values are parsed as YAML scalars.
"""
from __future__ import annotations

import dataclasses
import os
import typing
from pathlib import Path

import yaml

from ..config import ConfigError, RunConfig

ENV_PREFIX = "RMIX_"

_HINTS = typing.get_type_hints(RunConfig)


def _coerce(name, value):
    hint = _HINTS[name]
    if name == "env":
        if not isinstance(value, dict):
            raise ConfigError(f"field 'env': expected a mapping, got {type(value).__name__}")
        return dict(value)
    optional = typing.get_origin(hint) is typing.Union and type(None) in typing.get_args(hint)
    if optional:
        if value is None:
            return None
        hint = next(a for a in typing.get_args(hint) if a is not type(None))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"field {name!r}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"field {name!r}: expected an integer, got {value!r}")
        return int(value)
    if hint is float:
        if isinstance(value, str):
            # YAML 1.1 reads "1e-3" (no dot) as a string
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"field {name!r}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"field {name!r}: expected a string, got {value!r}")
        return value
    return value


def load_config_file(path) -> dict:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: parse error{where}: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out: dict = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        value = yaml.safe_load(raw) if raw != "" else None
        if name.startswith("env__"):
            out.setdefault("env", {})[name[len("env__"):]] = value
        else:
            out[name] = value
    return out


def _merge(base: dict, update: dict):
    for key, value in update.items():
        if key == "env" and isinstance(value, dict) and isinstance(base.get("env"), dict):
            base["env"] = {**base["env"], **value}
        else:
            base[key] = value


def resolve_config(*layers: dict) -> RunConfig:
    """Merge raw key-value layers over the defaults and validate."""
    known = set(RunConfig.field_names())
    merged: dict = {"env": dict(RunConfig().env)}
    for layer in layers:
        unknown = sorted(set(layer) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        _merge(merged, layer)
    kwargs = {name: _coerce(name, value) for name, value in merged.items()}
    return RunConfig(**kwargs)


def parse_config(path=None, overrides=None, environ=None) -> RunConfig:
    """Fully resolved config from an optional file, environment and overrides.

    ``overrides`` entries whose value is None are ignored, so argparse
    namespaces can be passed through directly.
    """
    file_layer = load_config_file(path) if path is not None else {}
    flags = {k: v for k, v in (overrides or {}).items() if v is not None}
    return resolve_config(file_layer, env_overrides(environ), flags)


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(dataclasses.asdict(config), sort_keys=True)
