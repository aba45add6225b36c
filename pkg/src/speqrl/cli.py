"""Command-line interface: run / plot / budget / resume."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import format_config, parse_config
from .errors import ConfigurationError
from .experiments import resolve_out_dir, resume_from_checkpoint, run_experiment
from .plots import PLOT_MODES, emit_plots
from .presets import PRESET_NAMES, preset
from .schedule import COUNTING_MODES, budget_warmup_correction, grad_budget


def _load_config(path: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from None
    return parse_config(text)


def _cmd_run(args) -> int:
    if args.preset:
        configs = preset(args.preset)
    else:
        configs = [_load_config(args.config)]
    if args.emit_only:
        for cfg in configs:
            out_dir = resolve_out_dir(cfg.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            path = out_dir / "config_resolved.txt"
            path.write_text(format_config(cfg))
            print(f"wrote {path}")
        return 0
    for cfg in configs:
        summary = run_experiment(cfg, workers=args.workers)
        failed = [r.seed for r in summary.results if r.error is not None]
        status = f"PARTIAL (failed seeds: {failed})" if summary.partial else "ok"
        print(
            f"{summary.run_name}: final return {summary.final_return_mean:.1f} "
            f"+/- {summary.final_return_std:.1f} over {len(summary.results)} seeds, "
            f"counted updates {[r.counted_updates for r in summary.results if r.error is None]} [{status}]"
        )
        print(f"  outputs in {summary.out_dir}")
    return 0


def _cmd_budget(args) -> int:
    cfg = _load_config(args.config)
    mc = cfg.agent.n_critics
    total = grad_budget(cfg.schedule, mc, args.counting)
    correction = budget_warmup_correction(cfg.schedule, mc, args.counting)
    print(f"schedule: {cfg.schedule.algo}  critics: {mc}  counting: {args.counting}")
    print(f"closed-form gradient updates: {total} ({total / 1e6:.4g}M)")
    print(f"simulated run (warmup-corrected): {total - correction}")
    return 0


def _cmd_plot(args) -> int:
    out = emit_plots(args.csvs, args.mode, args.out)
    print(f"wrote {out}")
    return 0


def _cmd_resume(args) -> int:
    config_path = args.config
    if config_path is None:
        ckpt = Path(args.checkpoint)
        for candidate in (ckpt.parent / "config_resolved.txt", ckpt.parent.parent / "config_resolved.txt"):
            if candidate.is_file():
                config_path = candidate
                break
        if config_path is None:
            raise ConfigurationError("no config_resolved.txt found near the checkpoint; pass --config")
    cfg = _load_config(config_path)
    result = resume_from_checkpoint(cfg, args.checkpoint, args.out_csv)
    print(f"resumed seed {result.seed}: final return {result.final_eval_return:.1f}, metrics in {result.csv_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="speqrl", description="Off-policy RL schedules with offline critic stabilization")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a config or a named preset (all seeds)")
    src = run_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a key = value config file")
    src.add_argument("--preset", choices=PRESET_NAMES, help="named desk-scale experiment design")
    run_p.add_argument("--workers", type=int, default=1, help="parallel seed processes")
    run_p.add_argument("--emit-only", action="store_true", help="write resolved configs without running")
    run_p.set_defaults(fn=_cmd_run)

    budget_p = sub.add_parser("budget", help="closed-form gradient-update count for a config")
    budget_p.add_argument("--config", required=True)
    budget_p.add_argument("--counting", choices=COUNTING_MODES, default="critics_plus_policy")
    budget_p.set_defaults(fn=_cmd_budget)

    plot_p = sub.add_parser("plot", help="render metrics CSVs to a vector-graphics chart")
    plot_p.add_argument("csvs", nargs="+", help="metrics CSV files; seeds grouped by filename")
    plot_p.add_argument("--mode", choices=PLOT_MODES, required=True)
    plot_p.add_argument("--out", required=True, help="output image path (.svg)")
    plot_p.set_defaults(fn=_cmd_plot)

    resume_p = sub.add_parser("resume", help="continue a checkpointed run to completion")
    resume_p.add_argument("--checkpoint", required=True)
    resume_p.add_argument("--config", help="resolved config path (default: search near the checkpoint)")
    resume_p.add_argument("--out-csv", help="where to write the continuation metrics")
    resume_p.set_defaults(fn=_cmd_resume)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
