"""Adam and Polyak (exponential moving average) updates over parameter lists."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, NumericError


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_init(arrays: Sequence[np.ndarray], lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    if lr <= 0:
        raise ConfigurationError(f"lr must be positive, got {lr}")
    return AdamState(
        first_moment=[np.zeros_like(a) for a in arrays],
        second_moment=[np.zeros_like(a) for a in arrays],
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(state: AdamState, arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
    """One bias-corrected Adam step, applied in place to ``arrays``.

    Non-finite gradients reject the whole step: state and parameters stay
    untouched and a NumericError is raised.
    """
    if len(arrays) != len(state.first_moment) or len(grads) != len(arrays):
        raise ConfigurationError("Adam state/parameter/gradient structure mismatch")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient, Adam step rejected")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    step_size = state.lr / corr1
    for p, m, v, g in zip(arrays, state.first_moment, state.second_moment, grads):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        denom = np.sqrt(v / corr2)
        denom += state.epsilon
        p -= step_size * (m / denom)


def polyak_update(target: Sequence[np.ndarray], online: Sequence[np.ndarray], rho: float) -> None:
    """target <- rho * target + (1 - rho) * online, in place."""
    if not 0.0 <= rho <= 1.0:
        raise ConfigurationError(f"rho must be in [0, 1], got {rho}")
    if len(target) != len(online):
        raise ConfigurationError("target/online parameter structure mismatch")
    for t, o in zip(target, online):
        if t.shape != o.shape:
            raise ConfigurationError(f"shape mismatch {t.shape} vs {o.shape}")
        t *= rho
        t += (1.0 - rho) * o
