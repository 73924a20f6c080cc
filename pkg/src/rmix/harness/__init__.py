"""Config parsing, run orchestration, checkpoints, metrics, traces and plots."""
from .checkpoint import CheckpointError, load_checkpoint, read_checkpoint, save_checkpoint
from .config_io import dump_config, env_overrides, parse_config, resolve_config
from .metrics import MetricsError, MetricsWriter, read_metrics
from .plots import emit_plots, moving_average
from .run import (
    RunError, dump_alpha_trace, evaluate_checkpoint, probe_bias, run_training, trace_to_csv,
)

__all__ = [
    "CheckpointError", "load_checkpoint", "read_checkpoint", "save_checkpoint", "dump_config",
    "env_overrides", "parse_config", "resolve_config", "MetricsError", "MetricsWriter",
    "read_metrics", "emit_plots", "moving_average", "RunError", "dump_alpha_trace",
    "evaluate_checkpoint", "probe_bias", "run_training", "trace_to_csv",
]
