"""Single-file checkpoints.

A checkpoint is one uncompressed ``.npz`` archive. Every array key follows
``Learner.state_dict`` naming (``live.*``, ``target.*``, ``optim.td.*``,
``optim.qr.*``, ``counters.*``, ``gate.armed``) and one extra member,
``__meta__``, holds UTF-8 JSON bytes::

    {"format": "rmix-checkpoint", "version": 1,
     "config": {...RunConfig fields...},
     "env_spec": {...EnvSpec fields...},
     "progress": {"t_env": ..., "episodes": ...}}

Writes go to a temporary file in the same directory followed by an atomic
rename, so a crash never leaves a truncated checkpoint behind.
"""
from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..config import RunConfig
from ..envs import make_env
from ..trainer import Learner

FORMAT = "rmix-checkpoint"
VERSION = 1
META_KEY = "__meta__"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, learner: Learner, config: RunConfig, progress=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"format": FORMAT, "version": VERSION, "config": config.to_dict(),
            "env_spec": dataclasses.asdict(learner.spec), "progress": progress or {}}
    arrays = {k: np.asarray(v) for k, v in learner.state_dict().items()}
    arrays[META_KEY] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".ckpt-", suffix=".npz")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_checkpoint(path):
    """(arrays, meta) without building any networks."""
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"{path}: not a readable checkpoint ({exc})") from None
    if META_KEY not in arrays:
        raise CheckpointError(f"{path}: missing metadata")
    meta = json.loads(arrays.pop(META_KEY).tobytes().decode())
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path}: unexpected format {meta.get('format')!r}")
    if meta.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported version {meta.get('version')}")
    return arrays, meta


def load_checkpoint(path, env=None):
    """Rebuild (learner, config, env, meta) from a checkpoint.

    When ``env`` is given its spec must match the one stored in the file.
    """
    arrays, meta = read_checkpoint(path)
    config = RunConfig(**meta["config"])
    env = make_env(config.env) if env is None else env
    if dataclasses.asdict(env.spec) != meta["env_spec"]:
        raise CheckpointError(f"{path}: environment {dataclasses.asdict(env.spec)} does not "
                              f"match checkpoint {meta['env_spec']}")
    learner = Learner(env.spec, config, np.random.default_rng(0))
    try:
        learner.load_state_dict(arrays)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    return learner, config, env, meta
