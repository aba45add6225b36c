"""Policy evaluation, Monte-Carlo Q-bias estimation, and the metrics stream."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigurationError
from .rng import RngStream

CSV_HEADER = (
    "env_step,critic_updates_total,policy_updates_total,eval_return_mean,eval_return_std,"
    "q_bias_mean,q_bias_normalized,critic_loss,actor_loss,alpha,wall_ms"
)


@dataclass
class MetricsRow:
    env_step: int
    critic_updates_total: int
    policy_updates_total: int
    eval_return_mean: float
    eval_return_std: float
    q_bias_mean: float
    q_bias_normalized: float
    critic_loss: float
    actor_loss: float
    alpha: float
    wall_ms: float

    def to_csv_line(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            parts.append(str(int(v)) if f.type == "int" else repr(float(v)))
        return ",".join(parts)

    @classmethod
    def from_csv_line(cls, line: str) -> "MetricsRow":
        parts = line.strip().split(",")
        names = [f.name for f in fields(cls)]
        if len(parts) != len(names):
            raise ConfigurationError(f"metrics row has {len(parts)} fields, expected {len(names)}")
        kwargs = {}
        for f, raw in zip(fields(cls), parts):
            kwargs[f.name] = int(raw) if f.type == "int" else float(raw)
        return cls(**kwargs)


@dataclass
class BiasEstimate:
    mean_bias: float
    std_bias: float
    normalized_mean: float
    n_points: int


def evaluate_policy(env, policy, n_episodes: int, rng: RngStream) -> tuple[float, float]:
    """Mean and population std of undiscounted returns under a deterministic policy.

    ``policy`` maps an observation to an action; episodes run to terminal or
    truncation. Touches only the passed env and rng, nothing else.
    """
    if n_episodes < 1:
        raise ConfigurationError("n_episodes must be >= 1")
    returns = np.empty(n_episodes)
    for e in range(n_episodes):
        state, obs = env.reset(rng)
        total = 0.0
        while True:
            result = env.step(state, policy(obs))
            total += result.reward
            if result.terminal or result.truncated:
                break
            state, obs = result.state, result.obs
        returns[e] = total
    return float(returns.mean()), float(returns.std())


def estimate_bias(
    env,
    policy,
    q_fn,
    n_points: int,
    horizon: int,
    gamma: float,
    rng: RngStream,
    burnin_max: int | None = None,
) -> BiasEstimate:
    """Monte-Carlo Q-bias: mean over sampled (s, a) of q_fn(s, a) - G(s, a).

    Each point comes from an independent fresh rollout: reset, walk a uniform
    number of burn-in steps under ``policy``, record (s, a), then keep rolling
    for up to ``horizon`` steps accumulating the discounted return. Tails are
    truncated at the horizon or the episode end, with no bootstrap.

    ``policy(obs, rng) -> action`` is the stochastic behavior policy;
    ``q_fn(s_batch, a_batch) -> (B,) predictions`` is the critic under test.
    """
    if n_points < 1:
        raise ConfigurationError("n_points must be >= 1")
    if horizon < 1 or gamma**horizon >= 1e-3:
        raise ConfigurationError(
            f"horizon {horizon} too short: gamma^horizon = {gamma**horizon:.2e} must be < 1e-3"
        )
    if burnin_max is None:
        burnin_max = env.spec.max_episode_len // 4
    obs_list, act_list, returns = [], [], np.empty(n_points)
    for i in range(n_points):
        state, obs = env.reset(rng)
        burnin = int(rng.integers(burnin_max + 1))
        for _ in range(burnin):
            result = env.step(state, policy(obs, rng))
            if result.terminal or result.truncated:
                state, obs = env.reset(rng)
            else:
                state, obs = result.state, result.obs
        action = policy(obs, rng)
        obs_list.append(np.asarray(obs, dtype=np.float64))
        act_list.append(np.asarray(action, dtype=np.float64))
        g = 0.0
        discount = 1.0
        for _ in range(horizon):
            result = env.step(state, action)
            g += discount * result.reward
            discount *= gamma
            if result.terminal or result.truncated:
                break
            state, obs = result.state, result.obs
            action = policy(obs, rng)
        returns[i] = g
    preds = np.asarray(q_fn(np.stack(obs_list), np.stack(act_list)), dtype=np.float64).reshape(-1)
    if preds.shape != (n_points,):
        raise ConfigurationError(f"q_fn returned shape {preds.shape}, expected ({n_points},)")
    bias = preds - returns
    mean_bias = float(bias.mean())
    std_bias = float(bias.std(ddof=1)) if n_points > 1 else 0.0
    denom = max(abs(float(returns.mean())), 1e-6)
    return BiasEstimate(mean_bias, std_bias, mean_bias / denom, n_points)


def bias_horizon(gamma: float) -> int:
    """Smallest horizon with gamma^horizon < 1e-3."""
    if gamma <= 0.0:
        return 1
    return int(math.ceil(math.log(1e-3) / math.log(gamma))) + 1


def agent_bias_estimate(agent, env, n_points: int, gamma: float, rng: RngStream) -> BiasEstimate:
    """Bias of the agent's critics (mean over the ensemble) under its own stochastic policy."""

    def policy(obs, r):
        return agent.act(obs, r)

    def q_fn(s, a):
        return agent.q_values(s, a).mean(axis=0)

    return estimate_bias(env, policy, q_fn, n_points, bias_horizon(gamma), gamma, rng)


class MetricsWriter:
    """Appends CSV rows, header once, flush per row."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w")
        self._fh.write(CSV_HEADER + "\n")
        self._fh.flush()

    def __call__(self, row: MetricsRow) -> None:
        self._fh.write(row.to_csv_line() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_metrics(path, rows) -> None:
    with MetricsWriter(path) as w:
        for row in rows:
            w(row)


def read_metrics(path) -> list[MetricsRow]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ConfigurationError(f"unexpected metrics header in {path}")
        return [MetricsRow.from_csv_line(line) for line in fh if line.strip()]
