"""Ensemble models and the intrinsic rewards computed from them.

The main signal is the information-gain upper bound

    I_u(s, a) = sum_j log(1 + var_j(s, a) / sigma_noise**2)

where ``var_j`` is the population variance of the ensemble members'
predictions of ``(s' - s, r)`` along output dimension ``j``.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .approximator import MlpSpec, Trainable

INTRINSIC_KINDS = ("info_gain", "curiosity", "rnd")

STD_FLOOR = 1e-3
DIVISION_GUARD = 1e-8


def disagreement(predictions: np.ndarray) -> np.ndarray:
    """Population variance across members (axis 0) of stacked predictions."""
    predictions = np.asarray(predictions, dtype=np.float64)
    # shifting by the first member makes identical members give exactly zero
    d = predictions - predictions[0]
    return np.mean((d - d.mean(axis=0)) ** 2, axis=0)


def info_gain_upper(variance, sigma_noise: float):
    """Sum over the last axis of ``log(1 + variance / sigma_noise**2)``."""
    if sigma_noise <= 0:
        raise ValueError("sigma_noise must be positive")
    variance = np.asarray(variance, dtype=np.float64)
    return np.sum(np.log1p(variance / sigma_noise ** 2), axis=-1)


def info_gain_prediction_grad(predictions: np.ndarray, sigma_noise: float) -> np.ndarray:
    """d I_u / d predictions, same shape as ``predictions`` ``(P, n, d)``."""
    n_members = predictions.shape[0]
    d = predictions - predictions[0]
    centred = d - d.mean(axis=0)
    var = np.mean(centred ** 2, axis=0)
    return (2.0 / n_members) * centred / (sigma_noise ** 2 + var)


class Ensemble:
    """P independently initialised MLPs sharing one architecture."""

    def __init__(self, input_dim: int, output_dim: int, size: int = 5,
                 hidden: tuple[int, ...] = (256, 256), *, rng: np.random.Generator):
        if size < 1:
            raise ValueError("an ensemble needs at least one member")
        self.spec = MlpSpec((input_dim, *hidden, output_dim))
        self.members = [Trainable.create(self.spec, rng) for _ in range(size)]

    def __len__(self):
        return len(self.members)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.stack([m(x) for m in self.members])

    def fit_step(self, x: np.ndarray, y: np.ndarray, lr: float) -> float:
        """One Adam step per member on mean_b ||f(x_b) - y_b||^2; returns the member-mean loss."""
        n = x.shape[0]
        if n == 0:
            raise ValueError("cannot train on an empty batch")
        losses = []
        for m in self.members:
            pred, cache = m.forward_cached(x)
            err = pred - y
            losses.append(np.sum(err ** 2) / n)
            grad, _ = m.vjp(cache, 2.0 * err / n)
            m.step(grad, lr)
        return float(np.mean(losses))

    def info_gain_with_input_grad(self, x: np.ndarray, sigma_noise: float):
        """I_u at each row of ``x`` and its gradient with respect to ``x``."""
        outs = [m.forward_cached(x) for m in self.members]
        preds = np.stack([o[0] for o in outs])
        value = info_gain_upper(disagreement(preds), sigma_noise)
        dpred = info_gain_prediction_grad(preds, sigma_noise)
        grad_x = np.zeros_like(np.asarray(x, dtype=np.float64))
        for m, (_, cache), g in zip(self.members, outs, dpred):
            grad_x += m.vjp(cache, g, need_input=True, need_params=False)[1]
        return value, grad_x


def transition_targets(s, r, s_next) -> np.ndarray:
    """Regression targets ``[(s' - s), r]`` for the dynamics ensemble."""
    s = np.atleast_2d(s)
    s_next = np.atleast_2d(s_next)
    r = np.asarray(r, dtype=np.float64).reshape(-1, 1)
    return np.concatenate([s_next - s, r], axis=1)


class DynamicsEnsemble(Ensemble):
    """Predicts ``(s' - s, r)`` from ``(s, a)``."""

    def __init__(self, obs_dim: int, action_dim: int, size: int = 5,
                 hidden: tuple[int, ...] = (256, 256), sigma_noise: float = 1e-3,
                 *, rng: np.random.Generator):
        if sigma_noise <= 0:
            raise ValueError("sigma_noise must be positive")
        super().__init__(obs_dim + action_dim, obs_dim + 1, size, hidden, rng=rng)
        self.sigma_noise = sigma_noise

    def disagreement(self, s, a) -> np.ndarray:
        return disagreement(self.predict(np.hstack([np.atleast_2d(s), np.atleast_2d(a)])))

    def info_gain(self, s, a) -> np.ndarray:
        return info_gain_upper(self.disagreement(s, a), self.sigma_noise)

    def info_gain_and_action_grad(self, s, a):
        s, a = np.atleast_2d(s), np.atleast_2d(a)
        value, gx = self.info_gain_with_input_grad(np.hstack([s, a]), self.sigma_noise)
        return value, gx[:, s.shape[1]:]

    def train(self, s, a, r, s_next, lr: float) -> float:
        x = np.hstack([np.atleast_2d(s), np.atleast_2d(a)])
        return self.fit_step(x, transition_targets(s, r, s_next), lr)

    def curiosity(self, s, a, r, s_next) -> np.ndarray:
        """Member-mean, dimension-mean squared error against the realised transition."""
        x = np.hstack([np.atleast_2d(s), np.atleast_2d(a)])
        err = self.predict(x) - transition_targets(s, r, s_next)
        return np.mean(err ** 2, axis=(0, 2))


class RndPair:
    """Frozen random target network plus a predictor ensemble trained to match it."""

    def __init__(self, obs_dim: int, action_dim: int, size: int = 5,
                 hidden: tuple[int, ...] = (256, 256), embedding_dim: int = 8,
                 sigma_noise: float = 1e-3, *, rng: np.random.Generator):
        self.target = Trainable.create(
            MlpSpec((obs_dim + action_dim, *hidden, embedding_dim)), rng)
        self.predictors = Ensemble(obs_dim + action_dim, embedding_dim, size, hidden, rng=rng)
        self.sigma_noise = sigma_noise

    def disagreement(self, s, a) -> np.ndarray:
        return disagreement(self.predictors.predict(np.hstack([np.atleast_2d(s), np.atleast_2d(a)])))

    def info_gain(self, s, a) -> np.ndarray:
        return info_gain_upper(self.disagreement(s, a), self.sigma_noise)

    def info_gain_and_action_grad(self, s, a):
        s, a = np.atleast_2d(s), np.atleast_2d(a)
        value, gx = self.predictors.info_gain_with_input_grad(np.hstack([s, a]), self.sigma_noise)
        return value, gx[:, s.shape[1]:]

    def train(self, s, a, r, s_next, lr: float) -> float:
        x = np.hstack([np.atleast_2d(s), np.atleast_2d(a)])
        return self.predictors.fit_step(x, self.target(x), lr)


def make_intrinsic_model(kind: str, obs_dim: int, action_dim: int, size: int = 5,
                         hidden: tuple[int, ...] = (256, 256), sigma_noise: float = 1e-3,
                         *, rng: np.random.Generator):
    if kind in ("info_gain", "curiosity"):
        return DynamicsEnsemble(obs_dim, action_dim, size, hidden, sigma_noise, rng=rng)
    if kind == "rnd":
        return RndPair(obs_dim, action_dim, size, hidden, sigma_noise=sigma_noise, rng=rng)
    raise ValueError(f"unknown intrinsic kind {kind!r}; choose from {INTRINSIC_KINDS}")


def intrinsic_reward(kind: str, model, s, a, s_next=None, r=None) -> np.ndarray:
    """Per-transition intrinsic reward of the requested kind."""
    if kind in ("info_gain", "rnd"):
        return model.info_gain(s, a)
    if kind == "curiosity":
        if s_next is None or r is None:
            raise ValueError("curiosity needs the realised next state and reward")
        return model.curiosity(s, a, r, s_next)
    raise ValueError(f"unknown intrinsic kind {kind!r}; choose from {INTRINSIC_KINDS}")


class RunningNormalizer:
    """Running (population) standard deviation of every value seen so far."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    @property
    def var(self) -> float:
        return self.m2 / self.count if self.count else 0.0

    @property
    def std(self) -> float:
        return float(np.sqrt(self.var))

    def update(self, values) -> None:
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        n = values.size
        if n == 0:
            return
        # Chan et al. parallel merge of (count, mean, M2)
        b_mean = float(values.mean())
        b_m2 = float(np.sum((values - b_mean) ** 2))
        total = self.count + n
        delta = b_mean - self.mean
        self.mean += delta * n / total
        self.m2 += b_m2 + delta ** 2 * self.count * n / total
        self.count = total

    def scale(self, values):
        """Divide by the current floored std without updating."""
        return np.asarray(values, dtype=np.float64) / (max(self.std, STD_FLOOR) + DIVISION_GUARD)

    def normalize(self, values):
        self.update(values)
        return self.scale(values)


def target_info_gain(model, sample_actions: Callable, s, m: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo estimate of E_{a ~ target policy}[I_u(s, a)] per state.

    ``sample_actions(states, rng)`` must return actions in the model's action
    space, one row per state.
    """
    if m < 1:
        raise ValueError("need at least one action sample")
    s = np.atleast_2d(s)
    reps = np.repeat(s, m, axis=0)
    values = model.info_gain(reps, sample_actions(reps, rng))
    return values.reshape(s.shape[0], m).mean(axis=1)
