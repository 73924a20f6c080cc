"""Learning curves as standalone SVG, written by hand."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .metrics import MetricsError, read_metrics

PANELS = (("eval_success_rate", "evaluation success rate"),
          ("eval_mean_return", "evaluation mean return"))
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT, PAD = 420, 300, 48


def moving_average(values, window=5):
    """Trailing mean over up to ``window`` points."""
    values = np.asarray(values, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def aggregate(runs, key, window=5):
    """Across-run mean and population std of smoothed curves.

    Runs are aligned by record index and truncated to the shortest; the x
    coordinate is the mean step at each index.
    """
    n = min(len(r) for r in runs)
    if n == 0:
        raise MetricsError("empty metrics run")
    steps = np.mean([[rec["step"] for rec in r[:n]] for r in runs], axis=0)
    curves = np.array([moving_average([rec[key] for rec in r[:n]], window) for r in runs])
    std = curves.std(axis=0) if len(runs) > 1 else None
    return steps, curves.mean(axis=0), std


def _fmt(v):
    return f"{v:.2f}"


def _panel(series, key, title, x0):
    """SVG group for one metric; ``series`` maps label -> list of runs."""
    aggs = {label: aggregate(runs, key) for label, runs in series.items()}
    xs = np.concatenate([a[0] for a in aggs.values()])
    lows = np.concatenate([a[1] - (a[2] if a[2] is not None else 0) for a in aggs.values()])
    highs = np.concatenate([a[1] + (a[2] if a[2] is not None else 0) for a in aggs.values()])
    xmin, xmax = float(xs.min()), float(xs.max())
    ymin, ymax = float(lows.min()), float(highs.max())
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5

    def px(x):
        return x0 + PAD + (x - xmin) / (xmax - xmin) * (WIDTH - 2 * PAD)

    def py(y):
        return HEIGHT - PAD - (y - ymin) / (ymax - ymin) * (HEIGHT - 2 * PAD)

    out = [f'<g class="panel" data-metric="{key}">',
           f'<rect x="{x0 + PAD}" y="{PAD}" width="{WIDTH - 2 * PAD}" '
           f'height="{HEIGHT - 2 * PAD}" fill="none" stroke="#444"/>',
           f'<text x="{x0 + WIDTH / 2:.1f}" y="{PAD / 2:.1f}" text-anchor="middle">{title}</text>',
           f'<text x="{x0 + PAD}" y="{HEIGHT - PAD / 3:.1f}" font-size="10">{xmin:g}</text>',
           f'<text x="{x0 + WIDTH - PAD}" y="{HEIGHT - PAD / 3:.1f}" font-size="10" '
           f'text-anchor="end">{xmax:g} steps</text>',
           f'<text x="{x0 + PAD - 4}" y="{HEIGHT - PAD}" font-size="10" '
           f'text-anchor="end">{ymin:.3g}</text>',
           f'<text x="{x0 + PAD - 4}" y="{PAD + 10}" font-size="10" '
           f'text-anchor="end">{ymax:.3g}</text>']
    for i, (label, (steps, mean, std)) in enumerate(aggs.items()):
        color = COLORS[i % len(COLORS)]
        if std is not None:
            upper = [f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(steps, mean + std)]
            lower = [f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(steps[::-1], (mean - std)[::-1])]
            out.append(f'<polygon class="band" points="{" ".join(upper + lower)}" '
                       f'fill="{color}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(steps, mean))
        out.append(f'<polyline class="mean" data-label="{label}" points="{pts}" '
                   f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{x0 + WIDTH - PAD - 4}" y="{PAD + 14 * (i + 1)}" font-size="10" '
                   f'text-anchor="end" fill="{color}">{label}</text>')
    out.append("</g>")
    return out


def _label_for(path: Path):
    summary = path.parent / "summary.json"
    if summary.exists():
        try:
            cfg = json.loads(summary.read_text())["config"]
            alg = cfg["algorithm"]
            return f"{alg} a={cfg['alpha']}" if alg == "rmix-static" else alg
        except (KeyError, ValueError):
            pass
    return "run"


def emit_plots(metric_paths, out_path, labels=None):
    """Write an SVG with success-rate and return panels.

    Files sharing a label (by default the algorithm recorded next to the
    metrics file) are treated as seeds of one curve and drawn as mean with a
    one-standard-deviation band.
    """
    paths = [Path(p) for p in metric_paths]
    if not paths:
        raise MetricsError("need at least one metrics file")
    labels = [_label_for(p) for p in paths] if labels is None else list(labels)
    series: dict = {}
    for path, label in zip(paths, labels):
        series.setdefault(label, []).append(read_metrics(path))
    body = []
    for i, (key, title) in enumerate(PANELS):
        body += _panel(series, key, title, i * WIDTH)
    svg = "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH * len(PANELS)}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH * len(PANELS)} {HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>", ""])
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(svg)
    return out_path
