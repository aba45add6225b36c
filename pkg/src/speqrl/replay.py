"""Bounded FIFO replay buffer with uniform mini-batch sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError, StateError
from .rng import RngStream


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    terminal: bool


@dataclass
class Batch:
    s: np.ndarray  # (B, obs_dim)
    a: np.ndarray  # (B, act_dim)
    r: np.ndarray  # (B,)
    s_next: np.ndarray  # (B, obs_dim)
    terminal: np.ndarray  # (B,) float 0/1
    indices: np.ndarray  # (B,) source slots, int64

    def __len__(self) -> int:
        return self.s.shape[0]


class ReplayBuffer:
    """Ring of transitions; once full, the oldest entry is overwritten first.

    ``version`` counts pushes monotonically. Schedules use it to assert the
    buffer really is fixed across an offline stabilization block.
    """

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, dtype=np.float32):
        if capacity < 1:
            raise ConfigurationError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self._s = np.zeros((capacity, obs_dim), dtype)
        self._a = np.zeros((capacity, act_dim), dtype)
        self._r = np.zeros(capacity, dtype)
        self._s_next = np.zeros((capacity, obs_dim), dtype)
        self._terminal = np.zeros(capacity, dtype)
        self.write_index = 0
        self.size = 0
        self.version = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        s = np.asarray(t.s, dtype=np.float64)
        a = np.asarray(t.a, dtype=np.float64)
        s_next = np.asarray(t.s_next, dtype=np.float64)
        if s.shape != (self.obs_dim,) or s_next.shape != (self.obs_dim,):
            raise ConfigurationError("observation shape mismatch on push")
        if a.shape != (self.act_dim,):
            raise ConfigurationError("action shape mismatch on push")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(a)) and np.isfinite(t.r) and np.all(np.isfinite(s_next))):
            raise NumericError("non-finite transition rejected")
        if np.any(np.abs(a) > 1.0):
            raise ConfigurationError("action outside [-1, 1] rejected")
        i = self.write_index
        self._s[i] = s
        self._a[i] = a
        self._r[i] = t.r
        self._s_next[i] = s_next
        self._terminal[i] = 1.0 if t.terminal else 0.0
        self.write_index = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.version += 1

    def sample_uniform(self, batch_size: int, rng: RngStream) -> Batch:
        """batch_size independent uniform draws (with replacement) over stored slots."""
        if self.size == 0:
            raise StateError("cannot sample from an empty buffer")
        if batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
        idx = rng.integers(self.size, size=batch_size)
        return Batch(
            s=self._s[idx],
            a=self._a[idx],
            r=self._r[idx],
            s_next=self._s_next[idx],
            terminal=self._terminal[idx],
            indices=idx.astype(np.int64),
        )

    # checkpoint plumbing: raw storage access keeps serialization dumb
    def state_arrays(self) -> dict[str, np.ndarray]:
        return {
            "s": self._s,
            "a": self._a,
            "r": self._r,
            "s_next": self._s_next,
            "terminal": self._terminal,
        }

    def restore_counters(self, write_index: int, size: int, version: int) -> None:
        self.write_index = write_index
        self.size = size
        self.version = version
