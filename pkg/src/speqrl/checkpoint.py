"""Bit-exact binary checkpoints.

Little-endian layout: magic "SPEQCKPT", format version, the SHA-256 digest of
the resolved config text, a precision tag, then length-prefixed named float
arrays, named integer scalars, and named RNG stream states. A resumed run
restores every array, counter, environment state, and RNG position exactly,
so it continues the same trajectory an uninterrupted run would have taken.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StateError

MAGIC = b"SPEQCKPT"
FORMAT_VERSION = 1

_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1, np.dtype(np.int64): 2}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def config_digest(text: str) -> bytes:
    return hashlib.sha256(text.encode()).digest()


@dataclass
class CheckpointData:
    config_digest: bytes
    precision: int  # bytes per float in the training nets: 4 or 8
    arrays: dict[str, np.ndarray]
    scalars: dict[str, int]
    rng_states: dict[str, tuple[int, tuple[int, ...]]]  # id -> (seed, 14-int state)
    has_buffer: bool
    format_version: int = FORMAT_VERSION


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise StateError("checkpoint truncated")
    return data


def _write_name(fh, name: str) -> None:
    raw = name.encode()
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)


def _read_name(fh) -> str:
    (n,) = struct.unpack("<H", _read_exact(fh, 2))
    return _read_exact(fh, n).decode()


def save_checkpoint(path, data: CheckpointData) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", data.format_version))
        if len(data.config_digest) != 32:
            raise ConfigurationError("config digest must be 32 bytes")
        fh.write(data.config_digest)
        fh.write(struct.pack("<BB", data.precision, 1 if data.has_buffer else 0))

        fh.write(struct.pack("<I", len(data.arrays)))
        for name, arr in data.arrays.items():
            arr = np.ascontiguousarray(arr)
            if arr.dtype not in _DTYPE_CODES:
                raise ConfigurationError(f"array {name!r} has unsupported dtype {arr.dtype}")
            _write_name(fh, name)
            fh.write(struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())

        fh.write(struct.pack("<I", len(data.scalars)))
        for name, value in data.scalars.items():
            _write_name(fh, name)
            fh.write(struct.pack("<q", int(value)))

        fh.write(struct.pack("<I", len(data.rng_states)))
        for name, (seed, state) in data.rng_states.items():
            _write_name(fh, name)
            fh.write(struct.pack("<q", seed))
            if len(state) != 14:
                raise ConfigurationError(f"rng state for {name!r} must have 14 integers")
            fh.write(struct.pack("<14Q", *state))


def load_checkpoint(path, expected_digest: bytes | None = None) -> CheckpointData:
    with open(path, "rb") as fh:
        if _read_exact(fh, 8) != MAGIC:
            raise StateError("not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != FORMAT_VERSION:
            raise StateError(f"unsupported checkpoint format version {version}")
        digest = _read_exact(fh, 32)
        if expected_digest is not None and digest != expected_digest:
            raise ConfigurationError("checkpoint config digest does not match the supplied config")
        precision, has_buffer = struct.unpack("<BB", _read_exact(fh, 2))

        (n_arrays,) = struct.unpack("<I", _read_exact(fh, 4))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(n_arrays):
            name = _read_name(fh)
            code, ndim = struct.unpack("<BB", _read_exact(fh, 2))
            if code not in _CODE_DTYPES:
                raise StateError(f"unknown dtype code {code} for array {name!r}")
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
            dtype = _CODE_DTYPES[code]
            raw = _read_exact(fh, int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if ndim else dtype.itemsize)
            arrays[name] = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype).reshape(shape)

        (n_scalars,) = struct.unpack("<I", _read_exact(fh, 4))
        scalars: dict[str, int] = {}
        for _ in range(n_scalars):
            name = _read_name(fh)
            (value,) = struct.unpack("<q", _read_exact(fh, 8))
            scalars[name] = value

        (n_streams,) = struct.unpack("<I", _read_exact(fh, 4))
        rng_states: dict[str, tuple[int, tuple[int, ...]]] = {}
        for _ in range(n_streams):
            name = _read_name(fh)
            (seed,) = struct.unpack("<q", _read_exact(fh, 8))
            state = struct.unpack("<14Q", _read_exact(fh, 112))
            rng_states[name] = (seed, state)

        trailing = fh.read(1)
        if trailing:
            raise StateError("checkpoint has trailing bytes")
    return CheckpointData(digest, precision, arrays, scalars, rng_states, bool(has_buffer), version)


# -- training-run capture/restore ------------------------------------------------


def capture_run(run, digest: bytes, include_buffer: bool = True) -> CheckpointData:
    """Snapshot a TrainingRun into checkpoint data."""
    arrays: dict[str, np.ndarray] = {}
    arrays.update(run.agent.named_arrays())
    arrays["env/physics"] = np.asarray(run.state.physics, dtype=np.float64)
    arrays["env/obs"] = np.asarray(run.obs, dtype=np.float64)
    if include_buffer:
        for name, arr in run.buffer.state_arrays().items():
            arrays[f"buffer/{name}"] = arr

    c = run.counters
    scalars = {
        "m": run.m,
        "last_emitted_step": run.last_emitted_step,
        "env/steps_elapsed": run.state.steps_elapsed,
        "counters/env_steps": c.env_steps,
        "counters/critic_updates_per_network": c.critic_updates_per_network,
        "counters/policy_updates": c.policy_updates,
        "counters/alpha_updates": c.alpha_updates,
        "counters/stabilization_phases_completed": c.stabilization_phases_completed,
        "counters/buffer_version_at_phase_start": c.buffer_version_at_phase_start,
        "buffer/write_index": run.buffer.write_index,
        "buffer/size": run.buffer.size,
        "buffer/version": run.buffer.version,
    }
    scalars.update(run.agent.counter_scalars())
    rng_states = {name: (stream.seed, stream.get_state()) for name, stream in run.rngs.items()}
    precision = 8 if run.agent.dtype == np.float64 else 4
    return CheckpointData(digest, precision, arrays, scalars, rng_states, include_buffer)


def restore_run(run, data: CheckpointData) -> None:
    """Write checkpoint state back into a freshly built TrainingRun."""
    if not data.has_buffer:
        raise StateError("checkpoint was saved without buffer contents; cannot resume training from it")
    targets = run.agent.named_arrays()
    for name, arr in targets.items():
        if name not in data.arrays:
            raise StateError(f"checkpoint missing array {name!r}")
        src = data.arrays[name]
        if src.shape != arr.shape:
            raise StateError(f"checkpoint array {name!r} shape {src.shape} != expected {arr.shape}")
        arr[...] = src.astype(arr.dtype)

    run.state.physics = data.arrays["env/physics"].copy()
    run.state.steps_elapsed = data.scalars["env/steps_elapsed"]
    run.obs = data.arrays["env/obs"].copy()

    for name, arr in run.buffer.state_arrays().items():
        src = data.arrays[f"buffer/{name}"]
        if src.shape != arr.shape:
            raise StateError(f"buffer array {name!r} shape mismatch: checkpoint {src.shape} vs {arr.shape}")
        arr[...] = src.astype(arr.dtype)
    run.buffer.restore_counters(
        data.scalars["buffer/write_index"], data.scalars["buffer/size"], data.scalars["buffer/version"]
    )

    c = run.counters
    c.env_steps = data.scalars["counters/env_steps"]
    c.critic_updates_per_network = data.scalars["counters/critic_updates_per_network"]
    c.policy_updates = data.scalars["counters/policy_updates"]
    c.alpha_updates = data.scalars["counters/alpha_updates"]
    c.stabilization_phases_completed = data.scalars["counters/stabilization_phases_completed"]
    c.buffer_version_at_phase_start = data.scalars["counters/buffer_version_at_phase_start"]
    run.m = data.scalars["m"]
    run.last_emitted_step = data.scalars["last_emitted_step"]
    run.agent.restore_counters(data.scalars)

    for name, stream in run.rngs.items():
        if name not in data.rng_states:
            raise StateError(f"checkpoint missing rng stream {name!r}")
        seed, state = data.rng_states[name]
        if seed != stream.seed:
            raise StateError(f"rng stream {name!r} seed mismatch")
        stream.set_state(state)
