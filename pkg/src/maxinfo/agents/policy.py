"""Tanh-squashed diagonal Gaussian policy.

Internally actions are kept in the normalised box ``(-1, 1)``; ``to_env``
maps them onto the environment's bounds. ``log_prob`` is the density of the
normalised action.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from ..approximator import MlpSpec, Trainable

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
TANH_EPS = 1e-6
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class Reparam:
    """Everything a reparameterised sample needs for its backward pass."""

    action: np.ndarray      # normalised, tanh(u)
    log_prob: np.ndarray    # (n,)
    noise: np.ndarray
    std: np.ndarray
    ls_active: np.ndarray   # log_std not clipped
    cache: tuple


class SquashedGaussianPolicy:

    def __init__(self, obs_dim: int, action_dim: int, hidden=(256, 256),
                 action_low=None, action_high=None, *, rng: np.random.Generator):
        self.action_dim = action_dim
        self.net = Trainable.create(MlpSpec((obs_dim, *hidden, 2 * action_dim)), rng)
        low = -np.ones(action_dim) if action_low is None else np.asarray(action_low, float)
        high = np.ones(action_dim) if action_high is None else np.asarray(action_high, float)
        self.center = (high + low) / 2.0
        self.scale = (high - low) / 2.0

    @property
    def params(self) -> np.ndarray:
        return self.net.params

    @params.setter
    def params(self, value: np.ndarray) -> None:
        self.net.params = value

    def copy(self) -> "SquashedGaussianPolicy":
        return copy.deepcopy(self)

    def to_env(self, normalised: np.ndarray) -> np.ndarray:
        # tanh saturates to exactly +-1 in float64; keep emitted actions strictly inside
        high = self.center + self.scale
        low = self.center - self.scale
        return np.clip(self.center + self.scale * normalised,
                       np.nextafter(low, high), np.nextafter(high, low))

    def distribution(self, obs):
        out = self.net(np.atleast_2d(obs))
        d = self.action_dim
        return out[:, :d], np.clip(out[:, d:], LOG_STD_MIN, LOG_STD_MAX)

    def rsample(self, obs, noise: np.ndarray) -> Reparam:
        out, cache = self.net.forward_cached(np.atleast_2d(obs))
        d = self.action_dim
        mean, raw_ls = out[:, :d], out[:, d:]
        log_std = np.clip(raw_ls, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        t = np.tanh(mean + std * noise)
        log_prob = (np.sum(-0.5 * noise ** 2 - log_std - _HALF_LOG_2PI, axis=1)
                    - np.sum(np.log(1.0 - t ** 2 + TANH_EPS), axis=1))
        active = (raw_ls >= LOG_STD_MIN) & (raw_ls <= LOG_STD_MAX)
        return Reparam(t, log_prob, noise, std, active, cache)

    def sample_normalised(self, obs, rng: np.random.Generator, deterministic: bool = False):
        obs = np.atleast_2d(obs)
        shape = (obs.shape[0], self.action_dim)
        noise = np.zeros(shape) if deterministic else rng.standard_normal(shape)
        rep = self.rsample(obs, noise)
        return rep.action, rep.log_prob

    def sample(self, obs, rng: np.random.Generator, deterministic: bool = False):
        """Environment-scale action and the log-density of its normalised form."""
        a, logp = self.sample_normalised(obs, rng, deterministic)
        return self.to_env(a), logp

    def grad(self, rep: Reparam, g_log_prob: np.ndarray, g_action: np.ndarray) -> np.ndarray:
        """Parameter gradient given upstream gradients on log_prob and the normalised action."""
        t = rep.action
        one_minus = 1.0 - t ** 2
        g_u = g_action * one_minus + g_log_prob[:, None] * (2.0 * t * one_minus / (one_minus + TANH_EPS))
        g_log_std = (-g_log_prob[:, None] + g_u * rep.std * rep.noise) * rep.ls_active
        return self.net.vjp(rep.cache, np.hstack([g_u, g_log_std]))[0]


def sample_action(policy: SquashedGaussianPolicy, s, rng: np.random.Generator,
                  deterministic: bool = False):
    """Sample one environment-scale action for a single observation."""
    a, logp = policy.sample(np.asarray(s, dtype=np.float64)[None, :], rng, deterministic)
    return a[0], float(logp[0])
