"""Experiment configuration: a flat key = value document with dotted keys.

Lines are ``key = value``; ``#`` starts a comment; unknown keys are rejected
by name. Every field has a documented default, and the fully resolved config
echoes back through :func:`format_config` so a run directory always carries
the exact settings that produced it (the echo re-parses to an identical
config).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .agent import CRITIC_VARIANTS, AgentConfig
from .envs import ENV_REGISTRY
from .errors import ConfigurationError
from .schedule import ALGOS, COUNTING_MODES, STABILIZATION_MODES, ScheduleConfig

PRECISIONS = ("float32", "float64")


@dataclass
class ExperimentConfig:
    env_name: str = "pendulum"
    run_name: str = ""
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    out_dir: str = ""
    schedule: ScheduleConfig = field(default_factory=lambda: ScheduleConfig(algo="speq", total_env_steps=30_000))
    agent: AgentConfig = field(default_factory=AgentConfig)
    eval_interval: int = 1_000
    eval_episodes: int = 10
    bias_interval: int = 5_000
    bias_points: int = 64
    checkpoint_interval: int = 0
    precision: str = "float32"

    def __post_init__(self):
        if self.env_name not in ENV_REGISTRY:
            raise ConfigurationError(f"env: unknown environment {self.env_name!r}; valid: {sorted(ENV_REGISTRY)}")
        if not self.seeds:
            raise ConfigurationError("seeds: must list at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("seeds: must be pairwise distinct")
        if self.precision not in PRECISIONS:
            raise ConfigurationError(f"precision: {self.precision!r} not in {PRECISIONS}")
        if not self.run_name:
            self.run_name = f"{self.schedule.algo}_{self.env_name}"
        if not self.out_dir:
            self.out_dir = f"runs/{self.run_name}"


# key -> (kind, default-as-string). Defaults here are the desk-scale ones the
# harness documents; "auto" markers resolve against other keys.
_SCHEMA: dict[str, tuple[str, str]] = {
    "env": ("env", "pendulum"),
    "algo": ("algo", "speq"),
    "run_name": ("str", ""),
    "seeds": ("int_list", "1,2,3,4,5"),
    "out_dir": ("str", ""),
    "total_env_steps": ("int", "30000"),
    "stabilization_period": ("int", "2000"),
    "stabilization_length": ("int", "5000"),
    "utd": ("int", "1"),
    "reuse": ("int", "1"),
    "warmup_random_steps": ("int", "auto"),  # auto -> stabilization_period // 2
    "stabilization_mode": ("stab_mode", "critic_only"),
    "stabilize_alpha": ("bool", "false"),
    "budget_cap": ("int", "0"),  # 0 -> uncapped
    "eval_interval": ("int", "1000"),
    "eval_episodes": ("int", "10"),
    "bias_interval": ("int", "5000"),
    "bias_points": ("int", "64"),
    "checkpoint_interval": ("int", "0"),
    "precision": ("precision", "float32"),
    "agent.variant": ("variant", "dropout_q"),
    "agent.n_critics": ("int", "2"),
    "agent.target_subset_k": ("int", "2"),
    "agent.gamma": ("float", "0.99"),
    "agent.rho": ("float", "0.995"),
    "agent.lr": ("float", "0.0003"),
    "agent.batch_size": ("int", "256"),
    "agent.hidden_sizes": ("int_list", "64,64"),
    "agent.dropout_rate": ("float", "0.01"),
    "agent.dropout_in_targets": ("bool", "true"),
    "agent.target_entropy": ("entropy", "auto"),
}

_TAGS = {
    "env": sorted(ENV_REGISTRY),
    "algo": list(ALGOS),
    "stab_mode": list(STABILIZATION_MODES),
    "precision": list(PRECISIONS),
    "variant": list(CRITIC_VARIANTS),
}


def _convert(key: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind == "int_list":
            return tuple(int(p) for p in raw.split(",") if p.strip())
        if kind == "entropy":
            return None if raw.lower() == "auto" else float(raw)
        if kind in _TAGS:
            if raw not in _TAGS[kind]:
                raise ConfigurationError(f"{key}: invalid value {raw!r}; valid: {_TAGS[kind]}")
            return raw
    except ConfigurationError:
        raise
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {raw!r} as {kind}") from None
    raise ConfigurationError(f"internal: unknown schema kind {kind}")


def parse_config_dict(pairs: dict[str, str]) -> ExperimentConfig:
    for key in pairs:
        if key not in _SCHEMA:
            raise ConfigurationError(f"unknown config key {key!r}; valid keys: {', '.join(_SCHEMA)}")
    values = {}
    for key, (kind, default) in _SCHEMA.items():
        raw = pairs.get(key, default)
        if key == "warmup_random_steps" and raw == "auto":
            period = values["stabilization_period"]
            values[key] = period // 2
            continue
        values[key] = _convert(key, kind, raw)

    schedule = ScheduleConfig(
        algo=values["algo"],
        total_env_steps=values["total_env_steps"],
        stabilization_period=values["stabilization_period"],
        stabilization_length=values["stabilization_length"],
        utd=values["utd"],
        reuse=values["reuse"],
        warmup_random_steps=values["warmup_random_steps"],
        stabilization_mode=values["stabilization_mode"],
        stabilize_alpha=values["stabilize_alpha"],
        budget_cap=values["budget_cap"] or None,
    )
    agent = AgentConfig(
        gamma=values["agent.gamma"],
        rho=values["agent.rho"],
        lr=values["agent.lr"],
        batch_size=values["agent.batch_size"],
        hidden_sizes=values["agent.hidden_sizes"],
        dropout_rate=values["agent.dropout_rate"],
        variant=values["agent.variant"],
        n_critics=values["agent.n_critics"],
        target_subset_k=values["agent.target_subset_k"],
        dropout_in_targets=values["agent.dropout_in_targets"],
        target_entropy=values["agent.target_entropy"],
    )
    return ExperimentConfig(
        env_name=values["env"],
        run_name=values["run_name"],
        seeds=values["seeds"],
        out_dir=values["out_dir"],
        schedule=schedule,
        agent=agent,
        eval_interval=values["eval_interval"],
        eval_episodes=values["eval_episodes"],
        bias_interval=values["bias_interval"],
        bias_points=values["bias_points"],
        checkpoint_interval=values["checkpoint_interval"],
        precision=values["precision"],
    )


def parse_config(text: str) -> ExperimentConfig:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if "#" in line:
            line = line[: line.index("#")]
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key in pairs:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = raw.strip()
    return parse_config_dict(pairs)


def format_config(cfg: ExperimentConfig) -> str:
    """Canonical echo: every key explicit, schema order. Re-parses to an equal config."""
    s, a = cfg.schedule, cfg.agent
    values = {
        "env": cfg.env_name,
        "algo": s.algo,
        "run_name": cfg.run_name,
        "seeds": ",".join(str(x) for x in cfg.seeds),
        "out_dir": cfg.out_dir,
        "total_env_steps": s.total_env_steps,
        "stabilization_period": s.stabilization_period,
        "stabilization_length": s.stabilization_length,
        "utd": s.utd,
        "reuse": s.reuse,
        "warmup_random_steps": s.warmup_random_steps,
        "stabilization_mode": s.stabilization_mode,
        "stabilize_alpha": "true" if s.stabilize_alpha else "false",
        "budget_cap": s.budget_cap or 0,
        "eval_interval": cfg.eval_interval,
        "eval_episodes": cfg.eval_episodes,
        "bias_interval": cfg.bias_interval,
        "bias_points": cfg.bias_points,
        "checkpoint_interval": cfg.checkpoint_interval,
        "precision": cfg.precision,
        "agent.variant": a.variant,
        "agent.n_critics": a.n_critics,
        "agent.target_subset_k": a.target_subset_k,
        "agent.gamma": repr(a.gamma),
        "agent.rho": repr(a.rho),
        "agent.lr": repr(a.lr),
        "agent.batch_size": a.batch_size,
        "agent.hidden_sizes": ",".join(str(x) for x in a.hidden_sizes),
        "agent.dropout_rate": repr(a.dropout_rate),
        "agent.dropout_in_targets": "true" if a.dropout_in_targets else "false",
        "agent.target_entropy": "auto" if a.target_entropy is None else repr(a.target_entropy),
    }
    return "\n".join(f"{key} = {values[key]}" for key in _SCHEMA) + "\n"
