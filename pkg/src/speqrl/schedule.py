"""Training-loop orchestration and exact gradient-budget accounting.

Three schedules share one loop:

  speq   one critic update per env step; every F steps (after warmup) the
         single update is replaced by a block of N consecutive critic-only
         updates on the then-frozen replay buffer, then the usual single
         policy update follows. N = 0 degenerates exactly to utd_k with
         utd = 1.
  utd_k  ``utd`` critic updates per env step, fresh batch each.
  smr    like utd_k, but each sampled batch is reused for ``reuse``
         consecutive critic updates with targets recomputed every time.

Every schedule performs exactly one policy (+ temperature) update per
post-warmup env step, always on a freshly sampled batch. During warmup all
actions are uniform random and no updates run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import diagnostics
from .errors import ConfigurationError, StateError
from .replay import ReplayBuffer, Transition
from .rng import RngStream

ALGOS = ("speq", "utd_k", "smr")
STABILIZATION_MODES = ("critic_only", "policy_only", "both")
COUNTING_MODES = ("critics_plus_policy", "critics_only")


@dataclass
class ScheduleConfig:
    algo: str
    total_env_steps: int
    stabilization_period: int = 10_000  # F
    stabilization_length: int = 0  # N
    utd: int = 1
    reuse: int = 1
    warmup_random_steps: int = 0
    stabilization_mode: str = "critic_only"
    stabilize_alpha: bool = False  # temperature stays frozen inside phases by default
    budget_cap: int | None = None  # stop once counted updates would exceed this

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigurationError(f"unknown algo {self.algo!r}; valid: {ALGOS}")
        if self.total_env_steps < 1:
            raise ConfigurationError("total_env_steps must be >= 1")
        if self.stabilization_period < 1:
            raise ConfigurationError("stabilization_period must be >= 1")
        if self.stabilization_length < 0:
            raise ConfigurationError("stabilization_length must be >= 0")
        if self.utd < 1 or self.reuse < 1:
            raise ConfigurationError("utd and reuse must be >= 1")
        if self.warmup_random_steps < 0:
            raise ConfigurationError("warmup_random_steps must be >= 0")
        if self.stabilization_mode not in STABILIZATION_MODES:
            raise ConfigurationError(
                f"unknown stabilization_mode {self.stabilization_mode!r}; valid: {STABILIZATION_MODES}"
            )
        if self.algo == "speq":
            if self.utd != 1:
                raise ConfigurationError("speq keeps a one-to-one online ratio: utd must be 1")
            if self.reuse != 1:
                raise ConfigurationError("speq does not reuse batches: reuse must be 1")
            if self.stabilization_length > 0 and self.stabilization_period > self.total_env_steps:
                raise ConfigurationError("stabilization_period must be <= total_env_steps when N > 0")
        if self.algo == "utd_k" and self.reuse != 1:
            raise ConfigurationError("utd_k uses each batch once: reuse must be 1 (use smr for reuse)")


@dataclass
class Counters:
    env_steps: int = 0
    critic_updates_per_network: int = 0
    policy_updates: int = 0
    alpha_updates: int = 0
    stabilization_phases_completed: int = 0
    buffer_version_at_phase_start: int = -1


@dataclass
class PhaseRecord:
    env_step: int
    version_start: int
    version_end: int
    critic_updates: int
    policy_updates: int


def should_stabilize(m: int, period: int, warmup: int) -> bool:
    """True iff step m triggers an offline stabilization phase."""
    return m % period == 0 and m > warmup


# -- budget accounting ---------------------------------------------------------


def per_step_updates(cfg: ScheduleConfig, m_critics: int, counting: str = "critics_plus_policy") -> int:
    """Counted updates of one ordinary (non-trigger) post-warmup env step."""
    total = cfg.utd * cfg.reuse * m_critics
    if counting == "critics_plus_policy":
        total += 1
    return total


def grad_budget(cfg: ScheduleConfig, m_critics: int, counting: str = "critics_plus_policy") -> int:
    """Closed-form counted updates for a full run, with warmup treated as zero.

    utd_k/smr: M * utd * reuse * m_critics (+ M policy updates).
    speq:      M * m_critics (+ M) + floor(M / F) * N * m_critics.
    """
    if counting not in COUNTING_MODES:
        raise ConfigurationError(f"unknown counting mode {counting!r}; valid: {COUNTING_MODES}")
    m = cfg.total_env_steps
    if cfg.algo in ("utd_k", "smr"):
        return m * per_step_updates(cfg, m_critics, counting)
    phases = m // cfg.stabilization_period if cfg.stabilization_length > 0 else 0
    total = m * m_critics + phases * cfg.stabilization_length * m_critics
    if counting == "critics_plus_policy":
        total += m
    return total


def budget_warmup_correction(cfg: ScheduleConfig, m_critics: int, counting: str = "critics_plus_policy") -> int:
    """Exact difference between grad_budget and a simulated run's counters.

    Three effects: (1) the first ``warmup`` steps run no updates; (2) for speq,
    a trigger step performs N updates in place of (not in addition to) the
    single online update, while the closed form counts both; (3) triggers that
    would land inside the warmup window never fire.
    """
    warm = min(cfg.warmup_random_steps, cfg.total_env_steps)
    correction = warm * per_step_updates(cfg, m_critics, counting)
    if cfg.algo == "speq" and cfg.stabilization_length > 0:
        phases_budget = cfg.total_env_steps // cfg.stabilization_period
        phases_fired = phases_budget - warm // cfg.stabilization_period
        correction += phases_fired * m_critics  # replaced single updates on fired triggers
        correction += (phases_budget - phases_fired) * cfg.stabilization_length * m_critics  # suppressed phases
    return correction


def expected_counters(cfg: ScheduleConfig, m_critics: int) -> Counters:
    """Closed-form prediction of a full run's Counters (no simulation)."""
    m = cfg.total_env_steps
    warm = min(cfg.warmup_random_steps, m)
    update_steps = m - warm
    c = Counters(env_steps=m, policy_updates=update_steps, alpha_updates=update_steps)
    if cfg.algo == "speq" and cfg.stabilization_length > 0:
        phases = m // cfg.stabilization_period - warm // cfg.stabilization_period
        c.stabilization_phases_completed = phases
        if cfg.stabilization_mode == "critic_only":
            c.critic_updates_per_network = (update_steps - phases) + phases * cfg.stabilization_length
        elif cfg.stabilization_mode == "policy_only":
            c.critic_updates_per_network = update_steps - phases
            c.policy_updates += phases * cfg.stabilization_length
            if cfg.stabilize_alpha:
                c.alpha_updates += phases * cfg.stabilization_length
        else:  # both
            c.critic_updates_per_network = (update_steps - phases) + phases * cfg.stabilization_length
            c.policy_updates += phases * cfg.stabilization_length
            if cfg.stabilize_alpha:
                c.alpha_updates += phases * cfg.stabilization_length
    else:
        c.critic_updates_per_network = update_steps * cfg.utd * cfg.reuse
    return c


def counted_updates(counters: Counters, m_critics: int, counting: str = "critics_plus_policy") -> int:
    total = counters.critic_updates_per_network * m_critics
    if counting == "critics_plus_policy":
        total += counters.policy_updates
    return total


# -- the training loop -----------------------------------------------------------


@dataclass
class EvalSettings:
    eval_interval: int = 1_000
    eval_episodes: int = 10
    bias_interval: int = 0  # 0 disables the Monte-Carlo bias probe
    bias_points: int = 64


def make_run_rngs(seed: int) -> dict[str, RngStream]:
    return {name: RngStream(seed, name) for name in ("env", "explore", "batch", "update", "eval", "bias")}


class TrainingRun:
    """One seeded schedule execution with explicit, checkpointable state."""

    def __init__(
        self,
        cfg: ScheduleConfig,
        agent,
        env,
        buffer: ReplayBuffer,
        rngs: dict[str, RngStream],
        sink: Callable[[diagnostics.MetricsRow], None] | None = None,
        eval_settings: EvalSettings | None = None,
        eval_env=None,
        phase_observer: Callable[[PhaseRecord], None] | None = None,
        step_hook: Callable[["TrainingRun"], None] | None = None,
    ):
        self.cfg = cfg
        self.agent = agent
        self.env = env
        self.buffer = buffer
        self.rngs = rngs
        self.sink = sink
        self.eval_settings = eval_settings or EvalSettings()
        self.eval_env = eval_env
        self.phase_observer = phase_observer
        self.step_hook = step_hook
        self.counters = Counters()
        self.m = 0
        self.state, self.obs = env.reset(rngs["env"])
        self.halted_by_budget = False
        self.last_emitted_step = 0
        self._start = time.perf_counter()

    # -- helpers ---------------------------------------------------------------

    def _wall_ms(self) -> float:
        return (time.perf_counter() - self._start) * 1000.0

    def _sample(self):
        return self.buffer.sample_uniform(self.agent.batch_size, self.rngs["batch"])

    def _critic_step(self, batch=None) -> None:
        batch = batch if batch is not None else self._sample()
        self.agent.update_critics(batch, self.rngs["update"])
        self.counters.critic_updates_per_network += 1

    def _policy_step(self, update_alpha: bool) -> None:
        self.agent.update_actor(self._sample(), self.rngs["update"], update_alpha=update_alpha)
        self.counters.policy_updates += 1
        if update_alpha:
            self.counters.alpha_updates += 1

    def _stabilization_phase(self) -> None:
        cfg = self.cfg
        version_start = self.buffer.version
        self.counters.buffer_version_at_phase_start = version_start
        critic_before = self.counters.critic_updates_per_network
        policy_before = self.counters.policy_updates
        for _ in range(cfg.stabilization_length):
            if cfg.stabilization_mode in ("critic_only", "both"):
                self._critic_step()
            if cfg.stabilization_mode in ("policy_only", "both"):
                self._policy_step(update_alpha=cfg.stabilize_alpha)
        if self.buffer.version != version_start:
            raise StateError(
                f"replay buffer changed during stabilization phase at step {self.m} "
                f"(version {version_start} -> {self.buffer.version})"
            )
        self.counters.stabilization_phases_completed += 1
        if self.phase_observer is not None:
            self.phase_observer(
                PhaseRecord(
                    env_step=self.m,
                    version_start=version_start,
                    version_end=self.buffer.version,
                    critic_updates=self.counters.critic_updates_per_network - critic_before,
                    policy_updates=self.counters.policy_updates - policy_before,
                )
            )

    def _planned_step_updates(self) -> int:
        """Counted (critics_plus_policy) updates the next step would perform."""
        cfg = self.cfg
        mc = self.agent.n_critics
        m_next = self.m + 1
        if m_next <= cfg.warmup_random_steps:
            return 0
        if cfg.algo == "speq" and cfg.stabilization_length > 0 and should_stabilize(m_next, cfg.stabilization_period, cfg.warmup_random_steps):
            n = cfg.stabilization_length
            mode = cfg.stabilization_mode
            critic = n if mode in ("critic_only", "both") else 0
            policy = n if mode in ("policy_only", "both") else 0
            return critic * mc + policy + 1
        return per_step_updates(cfg, mc, "critics_plus_policy")

    def budget_exhausted(self) -> bool:
        if self.cfg.budget_cap is None:
            return False
        counted = counted_updates(self.counters, self.agent.n_critics, "critics_plus_policy")
        return counted + self._planned_step_updates() > self.cfg.budget_cap

    # -- main loop ---------------------------------------------------------------

    def step(self) -> None:
        cfg = self.cfg
        self.m += 1
        m = self.m
        in_warmup = m <= cfg.warmup_random_steps

        if in_warmup:
            action = self.rngs["explore"].uniform(-1.0, 1.0, self.env.spec.act_dim)
        else:
            action = self.agent.act(self.obs, self.rngs["explore"])
        result = self.env.step(self.state, action)
        self.buffer.push(Transition(self.obs, action, result.reward, result.obs, result.terminal))
        if result.terminal or result.truncated:
            self.state, self.obs = self.env.reset(self.rngs["env"])
        else:
            self.state, self.obs = result.state, result.obs
        self.counters.env_steps = m

        if not in_warmup:
            if cfg.algo == "speq" and cfg.stabilization_length > 0 and should_stabilize(m, cfg.stabilization_period, cfg.warmup_random_steps):
                self._stabilization_phase()
            elif cfg.algo == "smr":
                for _ in range(cfg.utd):
                    batch = self._sample()
                    for _ in range(cfg.reuse):
                        self._critic_step(batch)
            else:  # speq off-trigger and utd_k share the same plan
                for _ in range(cfg.utd):
                    self._critic_step()
            self._policy_step(update_alpha=True)

        es = self.eval_settings
        if self.sink is not None and es.eval_interval > 0 and m % es.eval_interval == 0:
            self._emit_row()
        if self.step_hook is not None:
            self.step_hook(self)

    def run(self) -> Counters:
        while self.m < self.cfg.total_env_steps:
            if self.budget_exhausted():
                self.halted_by_budget = True
                break
            self.step()
        if self.sink is not None and self.eval_settings.eval_interval > 0 and self.last_emitted_step < self.m:
            self._emit_row()
        return self.counters

    # -- metrics ---------------------------------------------------------------

    def _emit_row(self) -> None:
        es = self.eval_settings
        eval_env = self.eval_env if self.eval_env is not None else self.env
        policy = lambda obs: self.agent.act(obs, deterministic=True)
        ret_mean, ret_std = diagnostics.evaluate_policy(eval_env, policy, es.eval_episodes, self.rngs["eval"])
        bias_mean = float("nan")
        bias_norm = float("nan")
        if es.bias_interval > 0 and self.m % es.bias_interval == 0:
            est = diagnostics.agent_bias_estimate(
                self.agent, eval_env, es.bias_points, self.agent.config.gamma, self.rngs["bias"]
            )
            bias_mean = est.mean_bias
            bias_norm = est.normalized_mean
        row = diagnostics.MetricsRow(
            env_step=self.m,
            critic_updates_total=self.counters.critic_updates_per_network * self.agent.n_critics,
            policy_updates_total=self.counters.policy_updates,
            eval_return_mean=ret_mean,
            eval_return_std=ret_std,
            q_bias_mean=bias_mean,
            q_bias_normalized=bias_norm,
            critic_loss=self.agent.last_critic_loss,
            actor_loss=self.agent.last_actor_loss,
            alpha=self.agent.alpha,
            wall_ms=self._wall_ms(),
        )
        self.sink(row)
        self.last_emitted_step = self.m


def _run(cfg: ScheduleConfig, agent, env, buffer, rngs, sink, **kwargs):
    run = TrainingRun(cfg, agent, env, buffer, rngs, sink, **kwargs)
    counters = run.run()
    return agent, counters


def run_speq(cfg: ScheduleConfig, agent, env, buffer, rngs, sink=None, **kwargs):
    if cfg.algo != "speq":
        raise ConfigurationError(f"run_speq needs algo='speq', got {cfg.algo!r}")
    return _run(cfg, agent, env, buffer, rngs, sink, **kwargs)


def run_utd(cfg: ScheduleConfig, agent, env, buffer, rngs, sink=None, **kwargs):
    if cfg.algo != "utd_k":
        raise ConfigurationError(f"run_utd needs algo='utd_k', got {cfg.algo!r}")
    return _run(cfg, agent, env, buffer, rngs, sink, **kwargs)


def run_smr(cfg: ScheduleConfig, agent, env, buffer, rngs, sink=None, **kwargs):
    if cfg.algo != "smr":
        raise ConfigurationError(f"run_smr needs algo='smr', got {cfg.algo!r}")
    return _run(cfg, agent, env, buffer, rngs, sink, **kwargs)
