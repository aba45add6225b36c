"""Named, seeded, replayable random streams.

Every source of randomness in a run is an :class:`RngStream` identified by
(seed, stream_id). Streams with the same identity produce bit-identical
sequences; streams with different ids are keyed through SHA-256 and never
overlap. The full generator state is exposed as a flat tuple of integers so
checkpoints can restore a stream mid-sequence exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


def _derive_key(seed: int, stream_id: str) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}:{stream_id}".encode()).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


@dataclass
class RngStream:
    """A deterministic draw sequence backed by a Philox generator.

    ``counter`` counts completed draw calls; it is bookkeeping (the generator
    state itself is what gets serialized) but makes stream positions visible
    in logs and checkpoints.
    """

    seed: int
    stream_id: str
    counter: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._gen = np.random.Generator(np.random.Philox(key=_derive_key(self.seed, self.stream_id)))

    # -- draws ---------------------------------------------------------------

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        self.counter += 1
        return self._gen.uniform(low, high, size)

    def normal(self, size=None, dtype=np.float64) -> np.ndarray:
        self.counter += 1
        return self._gen.standard_normal(size, dtype=dtype)

    def random(self, size=None, dtype=np.float64) -> np.ndarray:
        self.counter += 1
        return self._gen.random(size, dtype=dtype)

    def integers(self, n: int, size=None) -> np.ndarray:
        """Uniform integers in [0, n)."""
        self.counter += 1
        return self._gen.integers(0, n, size=size)

    def permutation(self, n: int) -> np.ndarray:
        self.counter += 1
        return self._gen.permutation(n)

    # -- state ---------------------------------------------------------------

    def clone(self) -> "RngStream":
        """Copy that will replay exactly the same future draws."""
        other = RngStream(self.seed, self.stream_id)
        other.set_state(self.get_state())
        return other

    def get_state(self) -> tuple[int, ...]:
        """Flat integer snapshot: (counter, philox counter x4, key x2, buffer x4, buffer_pos, has_uint32, uinteger)."""
        s = self._gen.bit_generator.state
        parts = [self.counter]
        parts += [int(x) for x in s["state"]["counter"]]
        parts += [int(x) for x in s["state"]["key"]]
        parts += [int(x) for x in s["buffer"]]
        parts += [int(s["buffer_pos"]), int(s["has_uint32"]), int(s["uinteger"])]
        return tuple(parts)

    def set_state(self, state: tuple[int, ...]) -> None:
        if len(state) != 14:
            raise ValueError(f"RngStream state must have 14 integers, got {len(state)}")
        self.counter = int(state[0])
        self._gen.bit_generator.state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.array(state[1:5], dtype=np.uint64),
                "key": np.array(state[5:7], dtype=np.uint64),
            },
            "buffer": np.array(state[7:11], dtype=np.uint64),
            "buffer_pos": int(state[11]),
            "has_uint32": int(state[12]),
            "uinteger": int(state[13]),
        }
