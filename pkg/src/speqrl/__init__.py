"""speqrl: off-policy actor-critic training schedules with offline critic
stabilization, exact gradient-budget accounting, and desk-scale environments."""

__version__ = "0.1.0"

from .agent import Agent, AgentConfig
from .config import ExperimentConfig, format_config, parse_config
from .envs import make_env
from .errors import ConfigurationError, NumericError, StateError
from .replay import ReplayBuffer, Transition
from .rng import RngStream
from .schedule import Counters, ScheduleConfig, grad_budget, run_smr, run_speq, run_utd

__all__ = [
    "Agent",
    "AgentConfig",
    "ConfigurationError",
    "Counters",
    "ExperimentConfig",
    "NumericError",
    "ReplayBuffer",
    "RngStream",
    "ScheduleConfig",
    "StateError",
    "Transition",
    "format_config",
    "grad_budget",
    "make_env",
    "parse_config",
    "run_smr",
    "run_speq",
    "run_utd",
    "__version__",
]
