import csv
import io
import json

import numpy as np
import pytest

from rmix.config import ConfigError, RunConfig
from rmix.harness import (
    CheckpointError, MetricsError, dump_alpha_trace, emit_plots, evaluate_checkpoint,
    load_checkpoint, moving_average, parse_config, probe_bias, read_metrics, run_training,
    save_checkpoint, trace_to_csv,
)
from rmix.harness.cli import main
from rmix.envs import RiskyGridworld
from rmix.trainer import Learner
from rmix.trainer.theory import ProbeMDP, bias_probe

TINY = """\
algorithm: {algorithm}
seed: 1
total_steps: 80
eval_interval: 40
eval_episodes: 4
batch_size: 4
buffer_size: 16
n_atoms: 7
rnn_hidden_dim: 8
predictor_hidden_dim: 8
mixing_embed_dim: 4
hypernet_embed_dim: 8
"""


def write(path, text):
    path.write_text(text)
    return path


# -- config ---------------------------------------------------------------

def test_empty_config_gives_published_defaults(tmp_path):
    cfg = parse_config(write(tmp_path / "c.yaml", ""), environ={})
    assert (cfg.n_atoms, cfg.n_levels, cfg.gamma, cfg.lr) == (35, 10, 0.99, 5e-4)
    assert (cfg.batch_size, cfg.buffer_size, cfg.target_update_interval) == (32, 5000, 200)
    assert (cfg.epsilon_start, cfg.epsilon_finish, cfg.epsilon_anneal_steps) == (1.0, 0.05, 50_000)
    assert (cfg.eval_interval, cfg.eval_episodes) == (10_000, 32)
    assert (cfg.qr_period, cfg.qr_threshold, cfg.grad_clip) == (50, 0.35, 10.0)
    assert cfg == RunConfig()


def test_static_alpha_mode(tmp_path):
    cfg = parse_config(write(tmp_path / "c.yaml", "algorithm: rmix-static-alpha\nalpha: 0.3\n"),
                       environ={})
    assert cfg.algorithm == "rmix-static" and cfg.static_alpha == 0.3
    learner = Learner(RiskyGridworld().spec, cfg)
    assert learner.predictor is None


def test_invalid_values_rejected(tmp_path):
    with pytest.raises(ConfigError, match="n_levels"):
        parse_config(write(tmp_path / "c.yaml", "n_levels: 0\n"), environ={})
    with pytest.raises(ConfigError, match="alpha"):
        parse_config(write(tmp_path / "c.yaml", "algorithm: rmix-static\nalpha: 1.5\n"), environ={})
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config(write(tmp_path / "c.yaml", "learning_rate: 0.1\n"), environ={})
    with pytest.raises(ConfigError, match="'batch_size'"):
        parse_config(write(tmp_path / "c.yaml", "batch_size: lots\n"), environ={})


def test_parse_error_reports_line(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        parse_config(write(tmp_path / "c.yaml", "seed: 1\nlr: : 2\nbatch_size: 4\n"), environ={})


def test_env_section_and_overrides(tmp_path):
    path = write(tmp_path / "c.yaml", "seed: 1\nlr: 0.01\nenv:\n  name: gridworld\n  width: 5\n")
    env = {"RMIX_LR": "0.002", "RMIX_ENV__HORIZON": "10", "OTHER": "x"}
    cfg = parse_config(path, overrides={"seed": 7, "total_steps": None}, environ=env)
    assert cfg.seed == 7 and cfg.lr == 0.002
    assert cfg.env == {"name": "gridworld", "width": 5, "horizon": 10}
    with pytest.raises(ConfigError, match="unknown"):
        parse_config(path, environ={"RMIX_NOPE": "1"})


def test_exponent_floats_without_dot(tmp_path):
    path = write(tmp_path / "c.yaml", "lr: 5e-4\n")
    assert parse_config(path, environ={"RMIX_GAMMA": "9e-1"}).lr == 5e-4
    with pytest.raises(ConfigError, match="'lr'"):
        parse_config(path, environ={"RMIX_LR": "fast"})


# -- runs, checkpoints, traces ------------------------------------------------

@pytest.fixture(scope="module")
def tiny_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    cfg_path = write(root / "c.yaml", TINY.format(algorithm="rmix"))
    cfg = parse_config(cfg_path, environ={})
    out = {}
    for name in ("a", "b"):
        run_training(cfg, root / name)
        out[name] = root / name
    static = parse_config(write(root / "s.yaml", TINY.format(algorithm="rmix-static") +
                                "alpha: 0.3\n"), environ={})
    run_training(static, root / "static")
    out["static"] = root / "static"
    out["config"] = cfg_path
    return out


def test_run_artifacts(tiny_runs):
    d = tiny_runs["a"]
    for name in ("metrics.jsonl", "metrics.csv", "checkpoint.npz", "summary.json", "config.yaml"):
        assert (d / name).exists()
    summary = json.loads((d / "summary.json").read_text())
    assert summary["status"] == "ok" and summary["t_env"] >= 80
    records = read_metrics(d / "metrics.jsonl")
    assert [r["step"] for r in records] == sorted(r["step"] for r in records)
    rows = list(csv.DictReader(io.StringIO((d / "metrics.csv").read_text())))
    assert len(rows) == len(records)
    for rec in records:
        for key in ("step", "episode", "td_loss", "qr_loss", "eval_success_rate",
                    "eval_mean_return", "alpha_hist", "grad_norm"):
            assert key in rec
        assert sum(rec["alpha_hist"]) > 0


def test_metrics_byte_identical(tiny_runs):
    for name in ("metrics.jsonl", "metrics.csv"):
        assert (tiny_runs["a"] / name).read_bytes() == (tiny_runs["b"] / name).read_bytes()


def test_checkpoint_round_trip(tiny_runs, tmp_path):
    learner, cfg, env, meta = load_checkpoint(tiny_runs["a"] / "checkpoint.npz")
    assert meta["version"] == 1 and meta["progress"]["t_env"] >= 80
    path = save_checkpoint(tmp_path / "again.npz", learner, cfg, meta["progress"])
    again, _, _, _ = load_checkpoint(path)
    a, b = learner.state_dict(), again.state_dict()
    assert set(a) == set(b) and all(np.array_equal(a[k], b[k]) for k in a)


def test_checkpoint_env_mismatch(tiny_runs):
    with pytest.raises(CheckpointError, match="does not match"):
        load_checkpoint(tiny_runs["a"] / "checkpoint.npz", env=RiskyGridworld())


def test_bad_checkpoint_file(tmp_path):
    bad = write(tmp_path / "bad.npz", "not an archive")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)


def test_interrupted_run_leaves_loadable_checkpoint(tmp_path, monkeypatch):
    cfg = parse_config(write(tmp_path / "c.yaml", TINY.format(algorithm="rmix")), environ={})
    from rmix.trainer import loop

    calls = {"n": 0}
    original = loop.TrainingRun.step_episode

    def flaky(self):
        calls["n"] += 1
        if calls["n"] == 30:
            raise KeyboardInterrupt
        return original(self)

    monkeypatch.setattr(loop.TrainingRun, "step_episode", flaky)
    with pytest.raises(KeyboardInterrupt):
        run_training(cfg, tmp_path / "run")
    learner, _, _, meta = load_checkpoint(tmp_path / "run" / "checkpoint.npz")
    assert meta["progress"]["t_env"] == 29
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    assert summary["status"] == "failed" and "KeyboardInterrupt" in summary["error"]
    assert read_metrics(tmp_path / "run" / "metrics.jsonl")


def test_evaluate_checkpoint(tiny_runs):
    res = evaluate_checkpoint(tiny_runs["a"] / "checkpoint.npz", episodes=5)
    assert 0.0 <= res["success_rate"] <= 1.0
    assert sum(res["joint_actions"].values()) == 5


def test_trace_schema_and_codomain(tiny_runs):
    header, rows = dump_alpha_trace(tiny_runs["a"] / "checkpoint.npz", seed=3)
    assert header == ["step", "alpha_agent0", "alpha_agent1", "reward"]
    levels = {k / 10 for k in range(1, 11)}
    assert rows and all(len(r) == 4 and set(r[1:3]) <= levels for r in rows)
    text = trace_to_csv(header, rows)
    assert text.splitlines()[0] == "step,alpha_agent0,alpha_agent1,reward"


def test_static_trace_is_constant(tiny_runs):
    _, rows = dump_alpha_trace(tiny_runs["static"] / "checkpoint.npz")
    assert {a for r in rows for a in r[1:3]} == {0.3}


# -- plots --------------------------------------------------------------------

def test_moving_average_window():
    assert moving_average([1, 2, 3, 4, 5, 6], 5).tolist() == [1, 1.5, 2, 2.5, 3, 4]


def test_plot_single_file_no_band(tiny_runs, tmp_path):
    out = emit_plots([tiny_runs["a"] / "metrics.jsonl"], tmp_path / "one.svg")
    svg = out.read_text()
    assert svg.startswith("<svg") and svg.count('class="mean"') == 2
    assert 'class="band"' not in svg


def test_plot_band_is_one_std(tmp_path):
    paths = []
    for seed, shift in enumerate([0.0, 0.2, 0.4, 0.6, 0.8]):
        d = tmp_path / f"s{seed}"
        d.mkdir()
        recs = [{"step": 10 * i, "eval_success_rate": shift * 0 + 0.1 * i,
                 "eval_mean_return": shift} for i in range(6)]
        (d / "metrics.jsonl").write_text("".join(json.dumps(r) + "\n" for r in recs))
        paths.append(d / "metrics.jsonl")
    from rmix.harness.plots import aggregate
    runs = [read_metrics(p) for p in paths]
    _, mean, std = aggregate(runs, "eval_mean_return")
    assert np.allclose(mean, 0.4) and np.allclose(std, np.std([0.0, 0.2, 0.4, 0.6, 0.8]))
    svg = emit_plots(paths, tmp_path / "five.svg", labels=["x"] * 5).read_text()
    assert svg.count('class="band"') == 2


def test_plot_bytes_deterministic(tiny_runs, tmp_path):
    files = [tiny_runs["a"] / "metrics.jsonl", tiny_runs["static"] / "metrics.jsonl"]
    a = emit_plots(files, tmp_path / "a.svg").read_bytes()
    b = emit_plots(files, tmp_path / "b.svg").read_bytes()
    assert a == b


def test_plot_rejects_bad_input(tmp_path):
    with pytest.raises(MetricsError):
        emit_plots([], tmp_path / "x.svg")
    bad = write(tmp_path / "m.jsonl", "{not json\n")
    with pytest.raises(MetricsError):
        emit_plots([bad], tmp_path / "x.svg")
    empty = write(tmp_path / "e.jsonl", "")
    with pytest.raises(MetricsError):
        emit_plots([empty], tmp_path / "x.svg")


# -- bias probe and CLI -----------------------------------------------------

def test_bias_probe_exact_atoms_zero_at_alpha_one():
    probe = ProbeMDP.random(np.random.default_rng(0))
    est = bias_probe(probe, [1.0], n_samples=2000, exact_atoms=True)
    assert abs(est[1.0][0]) < 1e-12


def test_probe_bias_report(tiny_runs):
    cfg = parse_config(tiny_runs["config"], environ={})
    rep = probe_bias(cfg, n_samples=5000)
    assert rep["alphas"][-1] == 1.0 and len(rep["mean"]) == 10


def test_cli_end_to_end(tiny_runs, tmp_path, capsys):
    cfg = tiny_runs["config"]
    out = tmp_path / "cli"
    assert main(["train", "--config", str(cfg), "--seed", "1", "--out", str(out)]) == 0
    assert (out / "metrics.jsonl").read_bytes() == (tiny_runs["a"] / "metrics.jsonl").read_bytes()
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(out / "checkpoint.npz"), "--episodes", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["episodes"] == 3
    assert main(["trace", "--checkpoint", str(out / "checkpoint.npz")]) == 0
    assert capsys.readouterr().out.startswith("step,alpha_agent0")
    assert main(["plot", str(out / "metrics.jsonl"), "--out", str(tmp_path / "p.svg")]) == 0
    assert (tmp_path / "p.svg").exists()
    capsys.readouterr()
    assert main(["probe-bias", "--config", str(cfg), "--samples", "2000"]) == 0
    assert len(json.loads(capsys.readouterr().out)["mean"]) == 10


def test_cli_reports_config_errors(tmp_path, capsys):
    bad = write(tmp_path / "c.yaml", "n_levels: 0\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "n_levels" in capsys.readouterr().err


def test_matrix_smoke_run_within_budget(tmp_path):
    import time

    cfg = parse_config(None, {"total_steps": 2000, "eval_interval": 1000}, environ={})
    start = time.process_time()
    summary = run_training(cfg, tmp_path / "smoke")
    assert summary["status"] == "ok"
    assert time.process_time() - start < 60.0
