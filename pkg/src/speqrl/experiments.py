"""Multi-seed experiment execution: run directories, checkpoints, summaries.

A run directory always contains the resolved config echo, the code version,
per-seed metrics CSVs, per-seed final checkpoints, and summary.json. Re-running
the echoed config reproduces the CSVs bit-identically except for the wall_ms
column (wall-clock time is the one inherently non-reproducible field).
"""

from __future__ import annotations

import json
import multiprocessing
import os
import traceback
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .agent import Agent
from .checkpoint import capture_run, config_digest, load_checkpoint, restore_run, save_checkpoint
from .config import ExperimentConfig, format_config
from .diagnostics import MetricsWriter, read_metrics
from .envs import make_env
from .errors import ConfigurationError, NumericError
from .replay import ReplayBuffer
from .rng import RngStream
from .schedule import (
    Counters,
    EvalSettings,
    TrainingRun,
    budget_warmup_correction,
    counted_updates,
    grad_budget,
    make_run_rngs,
)

OUT_ROOT_ENV_VAR = "SPEQRL_OUT_ROOT"


def resolve_out_dir(out_dir: str) -> Path:
    path = Path(out_dir)
    root = os.environ.get(OUT_ROOT_ENV_VAR)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


@dataclass
class SeedResult:
    seed: int
    csv_path: str
    final_eval_return: float
    counters: Counters | None
    counted_updates: int
    error: str | None = None


@dataclass
class ExperimentSummary:
    run_name: str
    out_dir: str
    results: list[SeedResult]
    final_return_mean: float
    final_return_std: float
    budget_closed_form: int
    budget_warmup_correction: int
    partial: bool


def build_run(cfg: ExperimentConfig, seed: int, sink=None, **kwargs) -> TrainingRun:
    env = make_env(cfg.env_name)
    eval_env = make_env(cfg.env_name)
    dtype = np.float64 if cfg.precision == "float64" else np.float32
    agent = Agent(env.spec.obs_dim, env.spec.act_dim, cfg.agent, RngStream(seed, "init"), dtype)
    buffer = ReplayBuffer(cfg.schedule.total_env_steps, env.spec.obs_dim, env.spec.act_dim, dtype)
    settings = EvalSettings(cfg.eval_interval, cfg.eval_episodes, cfg.bias_interval, cfg.bias_points)
    return TrainingRun(cfg.schedule, agent, env, buffer, make_run_rngs(seed), sink, settings, eval_env=eval_env, **kwargs)


def _seed_paths(out_dir: Path, seed: int) -> tuple[Path, Path]:
    return out_dir / "metrics" / f"seed{seed}.csv", out_dir / "checkpoints" / f"seed{seed}_final.ckpt"


def run_seed(cfg: ExperimentConfig, seed: int, out_dir: Path) -> SeedResult:
    """One independent, fully seeded schedule run; writes CSV and checkpoints."""
    csv_path, final_ckpt = _seed_paths(out_dir, seed)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    final_ckpt.parent.mkdir(parents=True, exist_ok=True)
    digest = config_digest(format_config(cfg))

    def hook(run: TrainingRun) -> None:
        if cfg.checkpoint_interval > 0 and run.m % cfg.checkpoint_interval == 0:
            save_checkpoint(
                out_dir / "checkpoints" / f"seed{seed}_step{run.m}.ckpt", capture_run(run, digest)
            )

    with MetricsWriter(csv_path) as sink:
        run = build_run(cfg, seed, sink, step_hook=hook)
        try:
            counters = run.run()
        except NumericError:
            save_checkpoint(out_dir / "checkpoints" / f"seed{seed}_diagnostic.ckpt", capture_run(run, digest))
            raise
    save_checkpoint(final_ckpt, capture_run(run, digest))
    rows = read_metrics(csv_path)
    final_return = rows[-1].eval_return_mean if rows else float("nan")
    counted = counted_updates(counters, run.agent.n_critics, "critics_plus_policy")
    return SeedResult(seed, str(csv_path), final_return, counters, counted)


def _run_seed_entry(args) -> SeedResult:
    cfg, seed, out_dir = args
    try:
        return run_seed(cfg, seed, Path(out_dir))
    except Exception:
        return SeedResult(seed, "", float("nan"), None, 0, error=traceback.format_exc(limit=5))


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentSummary:
    """Run every seed of one config, write provenance files, return the summary."""
    out_dir = resolve_out_dir(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config_resolved.txt").write_text(format_config(cfg))
    (out_dir / "version.txt").write_text(f"speqrl {__version__}\n")

    jobs = [(cfg, seed, str(out_dir)) for seed in cfg.seeds]
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(min(workers, len(jobs))) as pool:
            results = pool.map(_run_seed_entry, jobs)
    else:
        results = [_run_seed_entry(job) for job in jobs]

    ok = [r for r in results if r.error is None]
    finals = np.array([r.final_eval_return for r in ok]) if ok else np.array([float("nan")])
    mc = cfg.agent.n_critics
    summary = ExperimentSummary(
        run_name=cfg.run_name,
        out_dir=str(out_dir),
        results=results,
        final_return_mean=float(finals.mean()),
        final_return_std=float(finals.std()),
        budget_closed_form=grad_budget(cfg.schedule, mc, "critics_plus_policy"),
        budget_warmup_correction=budget_warmup_correction(cfg.schedule, mc, "critics_plus_policy"),
        partial=len(ok) < len(results),
    )
    (out_dir / "summary.json").write_text(json.dumps(_summary_dict(summary), indent=2) + "\n")
    return summary


def _summary_dict(summary: ExperimentSummary) -> dict:
    d = asdict(summary)
    d["version"] = __version__
    return d


def resume_from_checkpoint(cfg: ExperimentConfig, ckpt_path, out_csv=None) -> SeedResult:
    """Continue a checkpointed run to total_env_steps, appending later metric rows
    to a fresh CSV. The continuation is step-for-step identical to what an
    uninterrupted run would have produced (wall_ms aside)."""
    digest = config_digest(format_config(cfg))
    data = load_checkpoint(ckpt_path, expected_digest=digest)
    if not data.rng_states:
        raise ConfigurationError("checkpoint carries no rng streams")
    seed = next(iter(data.rng_states.values()))[0]

    ckpt_path = Path(ckpt_path)
    if out_csv is None:
        start = data.scalars["m"]
        out_csv = ckpt_path.parent / f"seed{seed}_resume_from_{start}.csv"
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)

    with MetricsWriter(out_csv) as sink:
        run = build_run(cfg, seed, sink)
        restore_run(run, data)
        counters = run.run()
    rows = read_metrics(out_csv)
    final_return = rows[-1].eval_return_mean if rows else float("nan")
    counted = counted_updates(counters, run.agent.n_critics, "critics_plus_policy")
    return SeedResult(seed, str(out_csv), final_return, counters, counted)
