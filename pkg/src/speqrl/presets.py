"""Desk-scale experiment presets.

All presets run on the pendulum at a laptop-sized scale: 30k env steps,
stabilization every F = 2,000 steps (so F/M = 1/15) for N = 5,000 updates,
warmup 1,000 uniform-random steps, 5 seeds each. The equal-budget preset
sizes every baseline so its counted updates match the default schedule's to
within one env step's worth.
"""

from __future__ import annotations

from dataclasses import replace

from .agent import AgentConfig
from .config import ExperimentConfig
from .errors import ConfigurationError
from .schedule import ScheduleConfig, counted_updates, expected_counters, per_step_updates

DESK_SEEDS = (1, 2, 3, 4, 5)
DESK_ENV = "pendulum"
DESK_STEPS = 30_000
DESK_PERIOD = 2_000
DESK_LENGTH = 5_000
DESK_WARMUP = 1_000
DESK_HIDDEN = (64, 64)
DESK_DROPOUT = 0.01


def _desk_config(
    run_name: str,
    preset: str,
    *,
    algo: str = "speq",
    variant: str = "dropout_q",
    n_critics: int = 2,
    subset_k: int = 2,
    utd: int = 1,
    reuse: int = 1,
    length: int = DESK_LENGTH,
    period: int = DESK_PERIOD,
    warmup: int = DESK_WARMUP,
    steps: int = DESK_STEPS,
    mode: str = "critic_only",
    cap: int | None = None,
) -> ExperimentConfig:
    dropout = DESK_DROPOUT if variant == "dropout_q" else 0.0
    schedule = ScheduleConfig(
        algo=algo,
        total_env_steps=steps,
        stabilization_period=period,
        stabilization_length=length if algo == "speq" else 0,
        utd=utd,
        reuse=reuse,
        warmup_random_steps=warmup,
        stabilization_mode=mode,
        budget_cap=cap,
    )
    agent = AgentConfig(
        hidden_sizes=DESK_HIDDEN,
        dropout_rate=dropout,
        variant=variant,
        n_critics=n_critics,
        target_subset_k=subset_k,
    )
    return ExperimentConfig(
        env_name=DESK_ENV,
        run_name=run_name,
        seeds=DESK_SEEDS,
        out_dir=f"runs/{preset}/{run_name}",
        schedule=schedule,
        agent=agent,
        bias_interval=0,
    )


def desk_speq(preset: str = "baselines") -> ExperimentConfig:
    return _desk_config("speq", preset)


def _speq_budget_cap() -> int:
    cfg = desk_speq().schedule
    return counted_updates(expected_counters(cfg, 2), 2, "critics_plus_policy")


def _budget_matched(run_name: str, preset: str, cap: int, **kwargs) -> ExperimentConfig:
    per_step = per_step_updates(
        ScheduleConfig(
            algo=kwargs.get("algo", "utd_k"),
            total_env_steps=1,
            utd=kwargs.get("utd", 1),
            reuse=kwargs.get("reuse", 1),
        ),
        kwargs.get("n_critics", 2),
        "critics_plus_policy",
    )
    steps = DESK_WARMUP + cap // per_step
    return _desk_config(run_name, preset, steps=steps, cap=cap, length=0, **kwargs)


def preset(name: str) -> list[ExperimentConfig]:
    """Emit the full config set for a named experiment design (5 seeds each)."""
    if name == "baselines":
        return [
            desk_speq("baselines"),
            _desk_config("sac_utd1", "baselines", algo="utd_k", variant="double_q", utd=1, length=0),
            _desk_config("smr_sac", "baselines", algo="smr", variant="double_q", utd=1, reuse=5, length=0),
            _desk_config("droq_utd20", "baselines", algo="utd_k", variant="dropout_q", utd=20, length=0),
            _desk_config(
                "redq_utd20", "baselines", algo="utd_k", variant="ensemble_q", n_critics=20, utd=20, length=0
            ),
            _desk_config(
                "smr_redq", "baselines", algo="smr", variant="ensemble_q", n_critics=20, utd=20, reuse=5, length=0
            ),
        ]
    if name == "vary_N":
        return [
            replace(
                desk_speq("vary_N"),
                run_name=f"speq_N{n}",
                out_dir=f"runs/vary_N/speq_N{n}",
                schedule=replace(desk_speq().schedule, stabilization_length=n),
            )
            for n in (0, 1_250, 2_500, 5_000, 10_000)
        ]
    if name == "vary_F":
        return [
            _desk_config(f"speq_F{f}", "vary_F", period=f, warmup=f // 2)
            for f in (1_000, 2_000, 10_000, 20_000)
        ]
    if name == "utd_sweep":
        configs = [desk_speq("utd_sweep")]
        configs += [
            _desk_config(f"droq_utd{u}", "utd_sweep", algo="utd_k", variant="dropout_q", utd=u, length=0)
            for u in (2, 3, 9, 20)
        ]
        return configs
    if name == "equal_budget":
        cap = _speq_budget_cap()
        return [
            desk_speq("equal_budget"),
            _budget_matched("sac_utd1_capped", "equal_budget", cap, algo="utd_k", variant="double_q", utd=1),
            _budget_matched("smr_sac_capped", "equal_budget", cap, algo="smr", variant="double_q", utd=1, reuse=5),
            _budget_matched("droq_utd20_capped", "equal_budget", cap, algo="utd_k", variant="dropout_q", utd=20),
            _budget_matched(
                "redq_utd20_capped", "equal_budget", cap, algo="utd_k", variant="ensemble_q", n_critics=20, utd=20
            ),
            _budget_matched(
                "smr_redq_capped", "equal_budget", cap, algo="smr", variant="ensemble_q", n_critics=20, utd=20, reuse=5
            ),
        ]
    if name == "ablation_regularizer":
        return [
            desk_speq("ablation_regularizer"),
            _desk_config("speq_no_dropout", "ablation_regularizer", variant="double_q"),
            _desk_config("speq_ensemble", "ablation_regularizer", variant="ensemble_q", n_critics=20),
        ]
    if name == "ablation_policy":
        return [
            desk_speq("ablation_policy"),
            _desk_config("speq_policy_only", "ablation_policy", mode="policy_only"),
            _desk_config("speq_policy_and_critic", "ablation_policy", mode="both"),
        ]
    raise ConfigurationError(
        "unknown preset "
        f"{name!r}; valid: baselines, vary_N, vary_F, utd_sweep, equal_budget, ablation_regularizer, ablation_policy"
    )


PRESET_NAMES = (
    "baselines",
    "vary_N",
    "vary_F",
    "utd_sweep",
    "equal_budget",
    "ablation_regularizer",
    "ablation_policy",
)
