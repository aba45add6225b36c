"""Soft actor-critic mechanics: squashed-Gaussian policy, critic variants,
entropy-temperature tuning, and the update rules every training schedule calls.

Critic variants:
  double_q    two plain critics, min over both targets (no regularization)
  dropout_q   two critics with dropout + layer norm in the hidden blocks
  ensemble_q  M plain critics, min over a fresh random K-subset of targets

All gradients here are assembled by hand against the cached forwards; they are
exact for the sampled noise, so finite differences with frozen noise reproduce
them to stencil accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericError
from .nets import MlpParams, backward, copy_params, forward, init_mlp, param_arrays
from .optim import AdamState, adam_init, adam_step, polyak_update
from .replay import Batch
from .rng import RngStream

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

CRITIC_VARIANTS = ("double_q", "dropout_q", "ensemble_q")


@dataclass
class AgentConfig:
    gamma: float = 0.99
    rho: float = 0.995
    lr: float = 3e-4
    batch_size: int = 256
    hidden_sizes: tuple[int, ...] = (256, 256)
    dropout_rate: float = 0.01
    variant: str = "dropout_q"
    n_critics: int = 2
    target_subset_k: int = 2
    dropout_in_targets: bool = True
    target_entropy: float | None = None  # None -> -act_dim

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigurationError(f"rho must be in [0, 1], got {self.rho}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.variant not in CRITIC_VARIANTS:
            raise ConfigurationError(f"unknown critic variant {self.variant!r}; valid: {CRITIC_VARIANTS}")
        if self.variant in ("double_q", "dropout_q") and self.n_critics != 2:
            raise ConfigurationError(f"{self.variant} uses exactly 2 critics, got {self.n_critics}")
        if self.variant == "ensemble_q" and not 2 <= self.target_subset_k <= self.n_critics:
            raise ConfigurationError(
                f"ensemble_q needs 2 <= target_subset_k <= n_critics, got K={self.target_subset_k}, M={self.n_critics}"
            )


@dataclass
class Actor:
    net: MlpParams  # gaussian_pair head: (mean, raw log_std) halves
    act_dim: int
    log_std_min: float = LOG_STD_MIN
    log_std_max: float = LOG_STD_MAX


@dataclass
class CriticEnsemble:
    online: list[MlpParams]
    targets: list[MlpParams]
    variant: str
    subset_k: int
    dropout_rate: float

    @property
    def n_critics(self) -> int:
        return len(self.online)


@dataclass
class EntropyTemp:
    log_alpha: np.ndarray  # 0-d array so Adam can update it in place
    target_entropy: float
    optimizer: AdamState

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha))


def build_actor(obs_dim: int, act_dim: int, cfg: AgentConfig, rng: RngStream, dtype=np.float32) -> Actor:
    # plain relu trunk; regularization is a critic-side concern
    net = init_mlp(obs_dim, cfg.hidden_sizes, 2 * act_dim, rng, output_head="gaussian_pair", dtype=dtype)
    return Actor(net, act_dim)


def build_critics(obs_dim: int, act_dim: int, cfg: AgentConfig, rng: RngStream, dtype=np.float32) -> CriticEnsemble:
    regularized = cfg.variant == "dropout_q"
    online = [
        init_mlp(
            obs_dim + act_dim,
            cfg.hidden_sizes,
            1,
            rng,
            dropout_rate=cfg.dropout_rate if regularized else 0.0,
            layer_norm=regularized,
            dtype=dtype,
        )
        for _ in range(cfg.n_critics)
    ]
    targets = [copy_params(p) for p in online]
    return CriticEnsemble(online, targets, cfg.variant, cfg.target_subset_k, cfg.dropout_rate if regularized else 0.0)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _policy_heads(actor: Actor, obs: np.ndarray):
    out, cache = forward(actor.net, obs)
    if out.ndim == 1:
        out = out[None, :]
    d = actor.act_dim
    mean = out[:, :d]
    log_raw = out[:, d:]
    log_std = np.clip(log_raw, actor.log_std_min, actor.log_std_max)
    clamp_mask = (log_raw > actor.log_std_min) & (log_raw < actor.log_std_max)
    return mean, log_std, clamp_mask, cache


def _tanh_gauss_log_prob(xi: np.ndarray, u: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """log pi(tanh(u)) for u = mean + exp(log_std) * xi, summed over action dims.

    The tanh change-of-variables term log(1 - tanh(u)^2) is computed through
    the softplus identity 2 * (log 2 - u - softplus(-2u)), which is exact and
    stable for large |u|.
    """
    gauss = -0.5 * xi**2 - _LOG_SQRT_2PI - log_std
    squash = 2.0 * (np.log(2.0) - u - _softplus(-2.0 * u))
    return (gauss - squash).sum(axis=1)


def sample_action(
    actor: Actor,
    obs: np.ndarray,
    rng: RngStream | None = None,
    deterministic: bool = False,
):
    """Draw an action; returns (action, log_prob) with log_prob None when deterministic.

    Works on a single observation or a batch; actions are strictly inside
    (-1, 1) by tanh squashing.
    """
    obs = np.asarray(obs)
    single = obs.ndim == 1
    batch = obs[None, :] if single else obs
    mean, log_std, _, _ = _policy_heads(actor, batch)
    if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(log_std)):
        raise NumericError("policy head produced non-finite outputs")
    if deterministic:
        action = np.tanh(mean)
        return (action[0] if single else action), None
    if rng is None:
        raise ConfigurationError("stochastic sample_action needs an RngStream")
    xi = rng.normal(mean.shape, dtype=actor.net.dtype)
    u = mean + np.exp(log_std) * xi
    action = np.tanh(u)
    log_prob = _tanh_gauss_log_prob(xi, u, log_std)
    if single:
        return action[0], float(log_prob[0])
    return action, log_prob


def action_log_prob(actor: Actor, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Evaluate log pi(action | obs) for given squashed actions (quadrature checks)."""
    obs = np.asarray(obs)
    single = obs.ndim == 1
    batch = obs[None, :] if single else obs
    act = np.asarray(action, dtype=np.float64)
    act = act[None, :] if act.ndim == 1 else act
    mean, log_std, _, _ = _policy_heads(actor, batch)
    u = np.arctanh(np.clip(act, -1.0 + 1e-15, 1.0 - 1e-15))
    xi = (u - mean) / np.exp(log_std)
    lp = _tanh_gauss_log_prob(xi, u, log_std)
    return float(lp[0]) if single else lp


def _target_subset(critics: CriticEnsemble, rng: RngStream) -> list[int]:
    if critics.variant == "ensemble_q":
        perm = rng.permutation(critics.n_critics)
        return list(perm[: critics.subset_k])
    return list(range(critics.n_critics))


def critic_targets(
    batch: Batch,
    critics: CriticEnsemble,
    actor: Actor,
    alpha: float,
    gamma: float,
    rng: RngStream,
) -> np.ndarray:
    """Entropy-regularized bootstrap targets y = r + gamma (1 - terminal) (min Q_bar - alpha log pi).

    The min runs over all targets for double_q/dropout_q and over a fresh
    uniform K-subset per batch for ensemble_q. For dropout_q the target
    forwards run in train mode, so dropout is active inside the bootstrap.
    """
    a_next, log_pi_next = sample_action(actor, batch.s_next, rng)
    x_next = np.concatenate([batch.s_next, a_next], axis=1)
    use_dropout = critics.variant == "dropout_q" and critics.dropout_rate > 0.0
    q_min = None
    for j in _target_subset(critics, rng):
        q_j, _ = forward(critics.targets[j], x_next, train=use_dropout, rng=rng)
        q_j = q_j[:, 0]
        q_min = q_j if q_min is None else np.minimum(q_min, q_j)
    dtype = critics.targets[0].dtype
    not_done = 1.0 - batch.terminal.astype(dtype)
    return batch.r.astype(dtype) + gamma * not_done * (q_min - alpha * log_pi_next.astype(dtype))


def critic_update(
    critics: CriticEnsemble,
    batch: Batch,
    y: np.ndarray,
    opts: list[AdamState],
    rho: float,
    rng: RngStream,
) -> list[float]:
    """One Adam step per online critic on MSE to ``y`` (fresh dropout masks per
    critic), then Polyak-update every target. Returns per-critic losses."""
    if len(opts) != critics.n_critics:
        raise ConfigurationError("one Adam state per critic required")
    x = np.concatenate([batch.s, batch.a], axis=1)
    inv_b = 1.0 / len(batch)
    losses = []
    for j, net in enumerate(critics.online):
        q, cache = forward(net, x, train=True, rng=rng)
        resid = q[:, 0] - y
        loss = float(np.mean(resid**2))
        if not np.isfinite(loss):
            raise NumericError(f"critic {j} TD loss non-finite")
        grads, _ = backward(cache, (2.0 * inv_b) * resid[:, None])
        adam_step(opts[j], param_arrays(net), grads)
        losses.append(loss)
    for j in range(critics.n_critics):
        polyak_update(param_arrays(critics.targets[j]), param_arrays(critics.online[j]), rho)
    return losses


def actor_update(
    actor: Actor,
    critics: CriticEnsemble,
    temp: EntropyTemp,
    batch: Batch,
    opt: AdamState,
    rng: RngStream,
    update_alpha: bool = True,
) -> tuple[float, float | None]:
    """Reparameterized policy step against min over all online critics (eval
    mode, no dropout), then a temperature step on log_alpha toward
    target_entropy. Critic parameters are never touched."""
    s = batch.s
    b = s.shape[0]
    d = actor.act_dim
    mean, log_std, clamp_mask, cache_a = _policy_heads(actor, s)
    dtype = actor.net.dtype
    xi = rng.normal((b, d), dtype=dtype)
    sigma = np.exp(log_std)
    u = mean + sigma * xi
    a = np.tanh(u)
    log_pi = _tanh_gauss_log_prob(xi, u, log_std)
    alpha = temp.alpha

    x = np.concatenate([s, a], axis=1)
    q_all = np.empty((critics.n_critics, b), dtype=dtype)
    caches = []
    for j, net in enumerate(critics.online):
        q_j, cache_j = forward(net, x)
        q_all[j] = q_j[:, 0]
        caches.append(cache_j)
    winner = np.argmin(q_all, axis=0)
    q_min = q_all[winner, np.arange(b)]
    actor_loss = float(np.mean(alpha * log_pi - q_min))
    if not np.isfinite(actor_loss):
        raise NumericError("actor loss non-finite")

    obs_dim = s.shape[1]
    dq_da = np.zeros((b, d), dtype=dtype)
    inv_b = 1.0 / b
    for j in range(critics.n_critics):
        sel = winner == j
        if not np.any(sel):
            continue
        out_grad = np.where(sel, -inv_b, 0.0).astype(dtype)[:, None]
        _, input_grad = backward(caches[j], out_grad)
        dq_da += input_grad[:, obs_dim:]

    # d log pi / du = 2 tanh(u) with the Gaussian noise xi held fixed
    dl_du = (alpha * inv_b) * (2.0 * np.tanh(u)) + dq_da * (1.0 - a**2)
    dl_dlog_std = (-alpha * inv_b) + dl_du * (sigma * xi)
    dl_dlog_std = dl_dlog_std * clamp_mask
    head_grad = np.concatenate([dl_du, dl_dlog_std], axis=1)
    grads, _ = backward(cache_a, head_grad)
    adam_step(opt, param_arrays(actor.net), grads)

    alpha_loss = None
    if update_alpha:
        # d/d log_alpha of mean(-log_alpha * (log_pi + target_entropy))
        err = float(np.mean(log_pi + temp.target_entropy))
        alpha_loss = float(-temp.log_alpha * err)
        adam_step(temp.optimizer, [temp.log_alpha], [np.asarray(-err, dtype=np.float64)])
    return actor_loss, alpha_loss


def q_eval(critics: CriticEnsemble, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Deterministic eval-mode predictions from every online critic.

    Returns shape (M,) for a single (s, a) pair or (M, B) for batches.
    """
    s = np.asarray(s)
    single = s.ndim == 1
    sb = s[None, :] if single else s
    ab = np.asarray(a)
    ab = ab[None, :] if ab.ndim == 1 else ab
    x = np.concatenate([sb, ab], axis=1)
    out = np.empty((critics.n_critics, x.shape[0]))
    for j, net in enumerate(critics.online):
        q, _ = forward(net, x)
        out[j] = q[:, 0]
    return out[:, 0] if single else out


class Agent:
    """Stateful bundle of actor, critic ensemble, temperature, and optimizers.

    Exposes exactly the update entry points schedules need and tracks exact
    per-network update counts.
    """

    def __init__(self, obs_dim: int, act_dim: int, config: AgentConfig, init_rng: RngStream, dtype=np.float32):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.config = config
        self.dtype = dtype
        self.actor = build_actor(obs_dim, act_dim, config, init_rng, dtype)
        self.critics = build_critics(obs_dim, act_dim, config, init_rng, dtype)
        target_entropy = -float(act_dim) if config.target_entropy is None else config.target_entropy
        self.temp = EntropyTemp(
            log_alpha=np.zeros((), dtype=np.float64),
            target_entropy=target_entropy,
            optimizer=adam_init([np.zeros(())], lr=config.lr),
        )
        self.actor_opt = adam_init(param_arrays(self.actor.net), lr=config.lr)
        self.critic_opts = [adam_init(param_arrays(net), lr=config.lr) for net in self.critics.online]
        self.critic_update_counts = [0] * config.n_critics
        self.policy_updates = 0
        self.alpha_updates = 0
        self.last_critic_loss = float("nan")
        self.last_actor_loss = float("nan")
        self.last_alpha_loss = float("nan")

    @property
    def n_critics(self) -> int:
        return self.critics.n_critics

    @property
    def batch_size(self) -> int:
        return self.config.batch_size

    @property
    def alpha(self) -> float:
        return self.temp.alpha

    def act(self, obs: np.ndarray, rng: RngStream | None = None, deterministic: bool = False) -> np.ndarray:
        action, _ = sample_action(self.actor, obs, rng, deterministic)
        return action

    def update_critics(self, batch: Batch, rng: RngStream) -> float:
        y = critic_targets(batch, self.critics, self.actor, self.alpha, self.config.gamma, rng)
        losses = critic_update(self.critics, batch, y, self.critic_opts, self.config.rho, rng)
        for j in range(self.n_critics):
            self.critic_update_counts[j] += 1
        self.last_critic_loss = float(np.mean(losses))
        return self.last_critic_loss

    def update_actor(self, batch: Batch, rng: RngStream, update_alpha: bool = True) -> tuple[float, float | None]:
        actor_loss, alpha_loss = actor_update(
            self.actor, self.critics, self.temp, batch, self.actor_opt, rng, update_alpha
        )
        self.policy_updates += 1
        self.last_actor_loss = actor_loss
        if update_alpha:
            self.alpha_updates += 1
            self.last_alpha_loss = alpha_loss
        return actor_loss, alpha_loss

    def q_values(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        return q_eval(self.critics, s, a)

    # -- checkpoint plumbing ---------------------------------------------------

    def named_arrays(self) -> dict[str, np.ndarray]:
        """All mutable float state in a fixed order (views, not copies)."""
        out: dict[str, np.ndarray] = {}
        for i, arr in enumerate(param_arrays(self.actor.net)):
            out[f"actor/p{i}"] = arr
        for j, net in enumerate(self.critics.online):
            for i, arr in enumerate(param_arrays(net)):
                out[f"critic{j}/p{i}"] = arr
        for j, net in enumerate(self.critics.targets):
            for i, arr in enumerate(param_arrays(net)):
                out[f"target{j}/p{i}"] = arr
        out["log_alpha"] = self.temp.log_alpha
        for name, state in self._opt_states():
            for i, arr in enumerate(state.first_moment):
                out[f"{name}/m{i}"] = arr
            for i, arr in enumerate(state.second_moment):
                out[f"{name}/v{i}"] = arr
        return out

    def _opt_states(self) -> list[tuple[str, AdamState]]:
        states = [("opt_actor", self.actor_opt)]
        states += [(f"opt_critic{j}", opt) for j, opt in enumerate(self.critic_opts)]
        states.append(("opt_alpha", self.temp.optimizer))
        return states

    def counter_scalars(self) -> dict[str, int]:
        out = {f"agent/critic_updates{j}": c for j, c in enumerate(self.critic_update_counts)}
        out["agent/policy_updates"] = self.policy_updates
        out["agent/alpha_updates"] = self.alpha_updates
        for name, state in self._opt_states():
            out[f"agent/{name}/step_count"] = state.step_count
        return out

    def restore_counters(self, scalars: dict[str, int]) -> None:
        for j in range(self.n_critics):
            self.critic_update_counts[j] = scalars[f"agent/critic_updates{j}"]
        self.policy_updates = scalars["agent/policy_updates"]
        self.alpha_updates = scalars["agent/alpha_updates"]
        for name, state in self._opt_states():
            state.step_count = scalars[f"agent/{name}/step_count"]
