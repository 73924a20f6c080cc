"""Run orchestration: training with artifacts, checkpoint evaluation, alpha
traces and the bias probe."""
from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path

import numpy as np

from ..config import RunConfig
from ..trainer import TrainingRun, evaluate, run_episode
from ..trainer.theory import ProbeMDP, bias_probe
from .checkpoint import load_checkpoint, save_checkpoint
from .config_io import dump_config
from .metrics import MetricsWriter

log = logging.getLogger("rmix")

PROBE_ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 11))


class RunError(RuntimeError):
    pass


def _write_json(path, obj):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    tmp.replace(path)


def run_training(config: RunConfig, out_dir, env=None) -> dict:
    """Train, writing ``metrics.jsonl``, ``metrics.csv``, ``config.yaml``,
    ``checkpoint.npz`` and ``summary.json`` under ``out_dir``.

    If anything fails (including KeyboardInterrupt) the latest state is
    checkpointed and the summary records the failure before re-raising.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_config(config))
    run = TrainingRun(config, env)
    ckpt_path = out / "checkpoint.npz"
    summary = {"config": config.to_dict(), "status": "running"}
    last_ckpt = [0]

    def checkpoint():
        save_checkpoint(ckpt_path, run.learner, config,
                        {"t_env": run.t_env, "episodes": run.episodes})
        last_ckpt[0] = run.t_env

    with MetricsWriter(out) as writer:
        def on_record(rec):
            writer.write(rec)
            if config.checkpoint_interval == 0:
                checkpoint()
            log.info("step %d success %.3f return %.3f", rec["step"],
                     rec["eval_success_rate"], rec["eval_mean_return"])

        try:
            records = []
            while not run.done:
                if run.eval_due():
                    records.append(run.evaluate())
                    on_record(records[-1])
                run.step_episode()
                if (config.checkpoint_interval
                        and run.t_env - last_ckpt[0] >= config.checkpoint_interval):
                    checkpoint()
            records.append(run.evaluate())
            on_record(records[-1])
            checkpoint()
        except BaseException as exc:
            checkpoint()
            summary.update(status="failed", error=f"{type(exc).__name__}: {exc}",
                           t_env=run.t_env, episodes=run.episodes)
            _write_json(out / "summary.json", summary)
            if isinstance(exc, Exception):
                raise RunError(f"training failed at step {run.t_env}: {exc}") from exc
            raise

    final = records[-1]
    summary.update(status="ok", t_env=run.t_env, episodes=run.episodes,
                   train_steps=run.learner.train_steps,
                   final_success_rate=final["eval_success_rate"],
                   final_mean_return=final["eval_mean_return"],
                   final_joint_actions=final["eval_first_joint_actions"],
                   n_records=len(records))
    _write_json(out / "summary.json", summary)
    return summary


def evaluate_checkpoint(path, episodes=32, seed=0) -> dict:
    learner, config, env, meta = load_checkpoint(path)
    res = evaluate(env, learner, episodes, np.random.default_rng(seed), config.n_levels)
    return {"checkpoint": str(path), "episodes": episodes, "seed": seed,
            "success_rate": res.success_rate, "mean_return": res.mean_return,
            "alpha_hist": res.alpha_hist, "joint_actions": res.joint_actions,
            "train_steps": learner.train_steps}


def dump_alpha_trace(path, seed=0, env=None):
    """Replay one greedy episode; rows of (step, alpha per agent, reward)."""
    learner, _, env, _ = load_checkpoint(path, env)
    stats = run_episode(env, learner, 0.0, np.random.default_rng(seed), seed=seed)
    n = env.spec.n_agents
    header = ["step"] + [f"alpha_agent{i}" for i in range(n)] + ["reward"]
    rows = [[t] + list(alphas) + [reward]
            for t, (alphas, reward) in enumerate(zip(stats.alphas, stats.rewards))]
    return header, rows


def trace_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def probe_bias(config: RunConfig, n_samples=100_000, alphas=PROBE_ALPHAS, noise=2.0) -> dict:
    """Bias estimates on a random probe MDP drawn from the config seed."""
    rng = np.random.default_rng(config.seed)
    probe = ProbeMDP.random(rng, noise=noise, gamma=config.gamma)
    est = bias_probe(probe, alphas, n_samples, config.n_atoms, rng)
    return {"alphas": list(alphas), "mean": [est[a][0] for a in alphas],
            "stderr": [est[a][1] for a in alphas], "n_samples": n_samples}
