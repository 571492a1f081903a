"""Pendulum and cart-pole swing-up with an optional action cost.

Both tasks are noiseless and stateless: an :class:`EnvState` is a value and
``step`` is a pure function of ``(state, action, cost)``. Angles use the
upright position as ``theta = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    action_dim: int
    action_low: tuple[float, ...]
    action_high: tuple[float, ...]
    dt: float
    max_episode_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not all(lo < hi for lo, hi in zip(self.action_low, self.action_high)):
            raise ValueError("action_low must be below action_high element-wise")


@dataclass(frozen=True)
class EnvState:
    x: tuple[float, ...]
    step_index: int = 0


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    next_state: EnvState


@dataclass(frozen=True)
class ActionCostConfig:
    K: float = 0.0

    def __post_init__(self):
        if not self.K >= 0:
            raise ValueError(f"action cost K must be non-negative, got {self.K}")


def wrap_angle(theta: float) -> float:
    """Equivalent angle in (-pi, pi]; odd multiples of pi map to +pi."""
    w = math.pi - math.fmod(math.pi - theta, 2.0 * math.pi)
    if w > math.pi:
        w -= 2.0 * math.pi
    elif w <= -math.pi:
        w += 2.0 * math.pi
    return w


def _check_action(action, dim: int) -> np.ndarray:
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape != (dim,):
        raise ValueError(f"expected an action of length {dim}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite action {a}")
    return a


# --- pendulum -------------------------------------------------------------

PENDULUM = EnvSpec("pendulum", 3, 1, (-2.0,), (2.0,), 0.05, 200)
_G, _M, _L = 9.81, 1.0, 1.0
_MAX_SPEED = 8.0


def pendulum_observation(state: EnvState) -> np.ndarray:
    theta, theta_dot = state.x
    return np.array([math.cos(theta), math.sin(theta), theta_dot])


def step_pendulum(state: EnvState, action, cost: ActionCostConfig = ActionCostConfig()) -> StepResult:
    u = float(np.clip(_check_action(action, 1), -2.0, 2.0)[0])
    theta, theta_dot = state.x
    th = wrap_angle(theta)
    reward = -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * u * u) - cost.K * abs(u)

    dt = PENDULUM.dt
    acc = 3.0 * _G / (2.0 * _L) * math.sin(theta) + 3.0 / (_M * _L * _L) * u
    new_dot = min(max(theta_dot + acc * dt, -_MAX_SPEED), _MAX_SPEED)
    new_theta = theta + new_dot * dt
    nxt = EnvState((new_theta, new_dot), state.step_index + 1)
    return StepResult(pendulum_observation(nxt), reward,
                      nxt.step_index >= PENDULUM.max_episode_steps, nxt)


def reset_pendulum(seed) -> EnvState:
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-math.pi, math.pi)
    theta_dot = rng.uniform(-1.0, 1.0)
    return EnvState((float(theta), float(theta_dot)), 0)


# --- cart-pole swing-up ---------------------------------------------------

CARTPOLE = EnvSpec("cartpole", 5, 1, (-10.0,), (10.0,), 0.02, 500)
CART_MASS, POLE_MASS, POLE_HALF_LENGTH, GRAVITY = 1.0, 0.1, 0.5, 9.81
TRACK_LIMIT = 2.4


def cartpole_derivatives(x: np.ndarray, force: float) -> np.ndarray:
    """Frictionless cart-pole equations of motion for ``(x, x_dot, theta, theta_dot)``."""
    _, x_dot, theta, theta_dot = x
    total = CART_MASS + POLE_MASS
    sin, cos = math.sin(theta), math.cos(theta)
    temp = (force + POLE_MASS * POLE_HALF_LENGTH * theta_dot ** 2 * sin) / total
    theta_acc = (GRAVITY * sin - cos * temp) / (
        POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos ** 2 / total))
    x_acc = temp - POLE_MASS * POLE_HALF_LENGTH * theta_acc * cos / total
    return np.array([x_dot, x_acc, theta_dot, theta_acc])


def _rk4(x: np.ndarray, force: float, dt: float) -> np.ndarray:
    k1 = cartpole_derivatives(x, force)
    k2 = cartpole_derivatives(x + 0.5 * dt * k1, force)
    k3 = cartpole_derivatives(x + 0.5 * dt * k2, force)
    k4 = cartpole_derivatives(x + dt * k3, force)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def cartpole_observation(state: EnvState) -> np.ndarray:
    x, x_dot, theta, theta_dot = state.x
    return np.array([x, x_dot, math.cos(theta), math.sin(theta), theta_dot])


def step_cartpole(state: EnvState, action, cost: ActionCostConfig = ActionCostConfig()) -> StepResult:
    u = float(np.clip(_check_action(action, 1), -10.0, 10.0)[0])
    reward = math.cos(state.x[2]) - cost.K * abs(u)
    nxt = _rk4(np.array(state.x), u, CARTPOLE.dt)
    # elastic wall
    if abs(nxt[0]) > TRACK_LIMIT:
        nxt[0] = math.copysign(2.0 * TRACK_LIMIT - abs(nxt[0]), nxt[0])
        nxt[1] = -nxt[1]
    new = EnvState(tuple(float(v) for v in nxt), state.step_index + 1)
    return StepResult(cartpole_observation(new), reward,
                      new.step_index >= CARTPOLE.max_episode_steps, new)


def reset_cartpole(seed) -> EnvState:
    rng = np.random.default_rng(seed)
    x, x_dot, dtheta, theta_dot = rng.uniform(-0.05, 0.05, size=4)
    return EnvState((float(x), float(x_dot), float(math.pi + dtheta), float(theta_dot)), 0)


# --- uniform interface ----------------------------------------------------

@dataclass(frozen=True)
class Env:
    spec: EnvSpec
    cost: ActionCostConfig = ActionCostConfig()

    def reset(self, seed) -> EnvState:
        return reset(self.spec, seed)

    def step(self, state: EnvState, action) -> StepResult:
        return _STEPS[self.spec.name](state, action, self.cost)

    def observe(self, state: EnvState) -> np.ndarray:
        return _OBSERVE[self.spec.name](state)


_STEPS = {"pendulum": step_pendulum, "cartpole": step_cartpole}
_OBSERVE = {"pendulum": pendulum_observation, "cartpole": cartpole_observation}
_RESETS = {"pendulum": reset_pendulum, "cartpole": reset_cartpole}
SPECS = {"pendulum": PENDULUM, "cartpole": CARTPOLE}


def reset(spec: EnvSpec, seed) -> EnvState:
    return _RESETS[spec.name](seed)


def make_env(name: str, action_cost: float = 0.0) -> Env:
    if name not in SPECS:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(SPECS)}")
    return Env(SPECS[name], ActionCostConfig(action_cost))
