"""Static line charts of metrics CSVs: mean line with a +/- 1 std band.

CSVs whose filenames differ only by a ``seed<k>`` suffix are aggregated as
seeds of one run. Mismatched x-grids across seeds are aligned by linear
interpolation onto the coarsest grid (the member with the fewest rows).
"""

from __future__ import annotations

import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import MetricsRow, read_metrics
from .errors import ConfigurationError

PLOT_MODES = ("vs_env_steps", "vs_grad_steps")

_SEED_SUFFIX = re.compile(r"(_?seed\d+)(_resume_from_\d+)?$")


def run_label(path) -> str:
    stem = Path(path).stem
    label = _SEED_SUFFIX.sub("", stem)
    return label or stem


def _x_values(rows: list[MetricsRow], mode: str) -> np.ndarray:
    if mode == "vs_env_steps":
        return np.array([r.env_step for r in rows], dtype=float)
    return np.array([r.critic_updates_total + r.policy_updates_total for r in rows], dtype=float)


def emit_plots(csv_paths, mode: str, out_path) -> Path:
    """Render one chart from the given CSVs; returns the written path."""
    if mode not in PLOT_MODES:
        raise ConfigurationError(f"unknown plot mode {mode!r}; valid: {PLOT_MODES}")
    paths = [Path(p) for p in csv_paths]
    if not paths:
        raise ConfigurationError("no CSV paths given")
    problems = [str(p) for p in paths if not p.is_file()]
    if problems:
        raise ConfigurationError(f"missing CSV files: {problems}")

    groups: dict[str, list[list[MetricsRow]]] = {}
    for p in paths:
        rows = read_metrics(p)
        if not rows:
            raise ConfigurationError(f"empty CSV (header only): {p}")
        groups.setdefault(run_label(p), []).append(rows)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, members in sorted(groups.items()):
        coarsest = min(members, key=len)
        grid = _x_values(coarsest, mode)
        ys = np.stack(
            [np.interp(grid, _x_values(rows, mode), [r.eval_return_mean for r in rows]) for rows in members]
        )
        mean = ys.mean(axis=0)
        std = ys.std(axis=0)
        (line,) = ax.plot(grid, mean, label=label)
        if len(members) > 1:
            ax.fill_between(grid, mean - std, mean + std, color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("environment steps" if mode == "vs_env_steps" else "gradient updates (critics + policy)")
    ax.set_ylabel("evaluation return")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format=out_path.suffix.lstrip(".") or "svg")
    plt.close(fig)
    return out_path
