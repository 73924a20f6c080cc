"""Metrics stream: one JSON object per line plus a CSV mirror."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

COLUMNS = ["step", "episode", "train_steps", "epsilon", "td_loss", "qr_loss", "grad_norm",
           "eval_success_rate", "eval_mean_return", "qr_armed", "alpha_hist",
           "eval_first_joint_actions", "wall_time"]


class MetricsError(ValueError):
    pass


def check_finite(record, where="record"):
    for key, value in record.items():
        if isinstance(value, bool) or value is None or isinstance(value, str):
            continue
        if isinstance(value, (int, float)):
            if not math.isfinite(value):
                raise MetricsError(f"{where}: {key} is not finite ({value})")
        elif isinstance(value, dict):
            check_finite(value, f"{where}.{key}")
        elif isinstance(value, (list, tuple)):
            check_finite({str(i): v for i, v in enumerate(value)}, f"{where}.{key}")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, list):
        return ";".join(str(v) for v in value)
    if isinstance(value, dict):
        return ";".join(f"{k}:{v}" for k, v in value.items())
    return value


class MetricsWriter:
    """Appends records in step order; both files are flushed after every record."""

    def __init__(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.jsonl_path = out_dir / "metrics.jsonl"
        self.csv_path = out_dir / "metrics.csv"
        self._jsonl = open(self.jsonl_path, "w", newline="\n")
        self._csv_fh = open(self.csv_path, "w", newline="")
        self._csv = csv.writer(self._csv_fh, lineterminator="\n")
        self._csv.writerow(COLUMNS)
        self.last_step = None

    def write(self, record: dict):
        check_finite(record)
        if self.last_step is not None and record["step"] < self.last_step:
            raise MetricsError("metrics records must be appended in step order")
        self.last_step = record["step"]
        self._jsonl.write(json.dumps(record, sort_keys=True) + "\n")
        self._jsonl.flush()
        self._csv.writerow([_cell(record.get(c)) for c in COLUMNS])
        self._csv_fh.flush()

    def close(self):
        self._jsonl.close()
        self._csv_fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> list[dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MetricsError(f"{path}: {exc}") from None
    if path.suffix == ".csv":
        rows = list(csv.DictReader(io.StringIO(text)))
        out = []
        for i, row in enumerate(rows):
            try:
                out.append({"step": int(row["step"]),
                            "eval_success_rate": float(row["eval_success_rate"]),
                            "eval_mean_return": float(row["eval_mean_return"])})
            except (KeyError, ValueError) as exc:
                raise MetricsError(f"{path}: row {i + 2} malformed ({exc})") from None
    else:
        out = []
        for i, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rec["step"], rec["eval_success_rate"], rec["eval_mean_return"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise MetricsError(f"{path}: line {i + 1} malformed ({exc})") from None
            out.append(rec)
    if not out:
        raise MetricsError(f"{path}: no records")
    return out
