"""Desk-scale continuous-control environments with a uniform episodic interface.

Both environments are pure: ``step`` maps (state, action) to a new state with
no hidden mutation, so states can be forked freely (rollout continuation,
checkpoints). Actions live in [-1, 1]^act_dim; out-of-range components are
clamped with a logged warning. ``terminal`` and ``truncated`` are reported
separately; neither environment has terminal states, so ``terminal`` is always
False and episodes end by truncation only. Critic targets must bootstrap
through truncation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError
from .rng import RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    act_dim: int
    max_episode_len: int
    dt: float


@dataclass
class EnvState:
    physics: np.ndarray
    steps_elapsed: int = 0


@dataclass
class StepResult:
    state: EnvState
    obs: np.ndarray
    reward: float
    terminal: bool
    truncated: bool


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    return np.pi - (np.pi - theta) % (2.0 * np.pi)


def _clamp_action(action, act_dim: int, name: str) -> np.ndarray:
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape != (act_dim,):
        raise ConfigurationError(f"{name}: action shape {a.shape} != ({act_dim},)")
    if np.any(np.abs(a) > 1.0):
        logger.warning("%s: action %s outside [-1, 1], clamping", name, a)
        a = np.clip(a, -1.0, 1.0)
    return a


class PendulumSwingUp:
    """Torque-limited rigid pendulum that must swing up and balance.

    Physics state is (theta, omega) with theta measured from upright.
    Dynamics: theta_dd = (3 g / 2 l) sin(theta) + 3 u / (m l^2) with
    g = 10, m = l = 1, torque u = 2 * action, integrated by semi-implicit
    Euler at dt = 0.05; omega is clipped to [-8, 8]. Observation is
    (cos theta, sin theta, omega). Reward, evaluated at the pre-step state, is
    -(wrapped_theta^2 + 0.1 omega^2 + 0.001 u^2), hence bounded by
    [-(pi^2 + 6.4 + 0.004), 0]. Episodes truncate after 200 steps.
    """

    spec = EnvSpec("pendulum", obs_dim=3, act_dim=1, max_episode_len=200, dt=0.05)
    gravity = 10.0
    mass = 1.0
    length = 1.0
    torque_scale = 2.0
    max_speed = 8.0
    reward_bounds = (-(np.pi**2 + 0.1 * 64.0 + 0.001 * 4.0), 0.0)

    def reset(self, rng: RngStream) -> tuple[EnvState, np.ndarray]:
        theta = float(rng.uniform(-np.pi, np.pi))
        omega = float(rng.uniform(-1.0, 1.0))
        state = EnvState(np.array([theta, omega]), 0)
        return state, self.observe(state)

    def observe(self, state: EnvState) -> np.ndarray:
        theta, omega = state.physics
        return np.array([np.cos(theta), np.sin(theta), omega])

    def step(self, state: EnvState, action) -> StepResult:
        a = _clamp_action(action, 1, self.spec.name)
        theta, omega = state.physics
        u = self.torque_scale * a[0]
        theta_w = wrap_angle(theta)
        reward = -(theta_w**2 + 0.1 * omega**2 + 0.001 * u**2)

        accel = (1.5 * self.gravity / self.length) * np.sin(theta) + 3.0 * u / (self.mass * self.length**2)
        omega_next = np.clip(omega + self.spec.dt * accel, -self.max_speed, self.max_speed)
        theta_next = theta + self.spec.dt * omega_next
        physics = np.array([theta_next, omega_next])
        if not np.all(np.isfinite(physics)):
            raise NumericError("pendulum physics went non-finite")

        new_state = EnvState(physics, state.steps_elapsed + 1)
        truncated = new_state.steps_elapsed >= self.spec.max_episode_len
        return StepResult(new_state, self.observe(new_state), float(reward), False, truncated)

    def mechanical_energy(self, state: EnvState) -> float:
        """Rod kinetic plus potential energy; conserved under zero torque."""
        theta, omega = state.physics
        inertia = self.mass * self.length**2 / 3.0
        return 0.5 * inertia * omega**2 + self.mass * self.gravity * (self.length / 2.0) * np.cos(theta)


class PointMassReach2D:
    """Force-controlled unit mass in the unit square steering to the center.

    Physics state is (px, py, vx, vy). Acceleration is action minus 0.1 * v
    damping, semi-implicit Euler at dt = 0.05. Walls clamp position into
    [0, 1]^2 and zero the velocity component that hit. Reward is the negative
    distance to the goal (0.5, 0.5) after the move, bounded by
    [-sqrt(0.5), 0]. Episodes truncate after 150 steps.
    """

    spec = EnvSpec("pointmass", obs_dim=4, act_dim=2, max_episode_len=150, dt=0.05)
    damping = 0.1
    goal = np.array([0.5, 0.5])
    reward_bounds = (-float(np.sqrt(0.5)), 0.0)

    def reset(self, rng: RngStream) -> tuple[EnvState, np.ndarray]:
        pos = rng.uniform(0.0, 1.0, 2)
        state = EnvState(np.array([pos[0], pos[1], 0.0, 0.0]), 0)
        return state, self.observe(state)

    def observe(self, state: EnvState) -> np.ndarray:
        return state.physics.copy()

    def step(self, state: EnvState, action) -> StepResult:
        a = _clamp_action(action, 2, self.spec.name)
        pos = state.physics[:2]
        vel = state.physics[2:]
        vel_next = vel + self.spec.dt * (a - self.damping * vel)
        pos_next = pos + self.spec.dt * vel_next
        for i in range(2):
            if pos_next[i] < 0.0:
                pos_next[i] = 0.0
                vel_next[i] = 0.0
            elif pos_next[i] > 1.0:
                pos_next[i] = 1.0
                vel_next[i] = 0.0
        physics = np.concatenate([pos_next, vel_next])
        if not np.all(np.isfinite(physics)):
            raise NumericError("point-mass physics went non-finite")

        reward = -float(np.linalg.norm(pos_next - self.goal))
        new_state = EnvState(physics, state.steps_elapsed + 1)
        truncated = new_state.steps_elapsed >= self.spec.max_episode_len
        return StepResult(new_state, self.observe(new_state), reward, False, truncated)


ENV_REGISTRY = {
    "pendulum": PendulumSwingUp,
    "pointmass": PointMassReach2D,
}


def make_env(name: str):
    try:
        return ENV_REGISTRY[name]()
    except KeyError:
        raise ConfigurationError(f"unknown environment {name!r}; valid names: {sorted(ENV_REGISTRY)}") from None
