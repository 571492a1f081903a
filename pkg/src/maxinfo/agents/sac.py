"""Soft actor-critic updates with an optional information-gain bonus.

With temperatures ``alpha1`` (entropy) and ``alpha2`` (information gain):

    y        = r + gamma * (1 - done) * [min_k Qbar_k(s', a') - alpha1 log pi(a'|s') + alpha2 I(s', a')]
    J_pi     = E[alpha1 log pi(a|s) - alpha2 I(s, a) - min_k Q_k(s, a)]
    J(alpha1) = E[-alpha1 (log pi + target_entropy)]
    J(alpha2) = alpha2 (E_pi[I] - E_pibar[I])

Temperatures are optimised in log-space so they stay positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..approximator import AdamState, adam_step, polyak
from .critics import TwinCritics, update_critics
from .policy import SquashedGaussianPolicy


@dataclass
class Temperatures:
    log_alpha1: float = 0.0
    log_alpha2: float = 0.0
    target_entropy: float = -1.0
    opt1: AdamState = field(default_factory=lambda: AdamState.zeros(1))
    opt2: AdamState = field(default_factory=lambda: AdamState.zeros(1))

    @property
    def alpha1(self) -> float:
        return math.exp(self.log_alpha1)

    @property
    def alpha2(self) -> float:
        return math.exp(self.log_alpha2)


def soft_td_target(r, done, gamma: float, min_q_next, log_prob_next, alpha1: float,
                   bonus_next=None, alpha2: float = 0.0) -> np.ndarray:
    bracket = min_q_next - alpha1 * log_prob_next
    if bonus_next is not None:
        bracket = bracket + alpha2 * bonus_next
    return r + gamma * (1.0 - done) * bracket


def critic_target(r, s_next, done, policy: SquashedGaussianPolicy, critics: TwinCritics,
                  alpha1: float, gamma: float, rng: np.random.Generator,
                  bonus_fn: Optional[Callable] = None, alpha2: float = 0.0):
    """TD targets with a' freshly sampled from ``policy``.

    ``bonus_fn(s', a')`` returns the (already normalised) bonus entering the
    bracket. Returns ``(y, bonus_values)``.
    """
    a_next, logp_next = policy.sample_normalised(s_next, rng)
    bonus = None if bonus_fn is None else bonus_fn(s_next, a_next)
    y = soft_td_target(r, done, gamma, critics.target_min(s_next, a_next), logp_next,
                       alpha1, bonus, alpha2)
    return y, bonus


@dataclass
class PolicyUpdate:
    loss: float
    log_prob: np.ndarray
    intrinsic: Optional[np.ndarray]


def policy_loss_and_grad(policy: SquashedGaussianPolicy, critics: Sequence[TwinCritics],
                         alpha1: float, s, noise: np.ndarray,
                         intrinsic_fn: Optional[Callable] = None, alpha2: float = 0.0,
                         intrinsic_scale: float = 1.0):
    """Reparameterised policy loss, its parameter gradient, log-probs and raw bonus values.

    The objective subtracts the sum over ``critics`` of each pair's min-Q.
    ``intrinsic_fn(s, a)`` returns ``(I, dI/da)`` in normalised action space;
    the bonus enters the loss as ``alpha2 * intrinsic_scale * I``.
    """
    n = s.shape[0]
    rep = policy.rsample(s, noise)
    a = rep.action
    q_total = np.zeros(n)
    g_action = np.zeros_like(a)
    for c in critics:
        q, dq = c.min_with_action_grad(s, a)
        q_total += q
        g_action -= dq
    raw = None
    loss_terms = alpha1 * rep.log_prob - q_total
    if intrinsic_fn is not None:
        raw, d_raw = intrinsic_fn(s, a)
        w = alpha2 * intrinsic_scale
        loss_terms = loss_terms - w * raw
        g_action = g_action - w * d_raw
    g_logp = np.full(n, alpha1 / n)
    grad = policy.grad(rep, g_logp, g_action / n)
    return float(np.mean(loss_terms)), grad, rep.log_prob, raw


def update_policy(policy: SquashedGaussianPolicy, critics, alpha1: float, s, rng: np.random.Generator,
                  lr: float, intrinsic_fn: Optional[Callable] = None, alpha2: float = 0.0,
                  intrinsic_scale: float = 1.0) -> PolicyUpdate:
    """One Adam step on the policy loss; critics are read, never updated."""
    if isinstance(critics, TwinCritics):
        critics = [critics]
    noise = rng.standard_normal((s.shape[0], policy.action_dim))
    loss, grad, logp, raw = policy_loss_and_grad(policy, critics, alpha1, s, noise,
                                                 intrinsic_fn, alpha2, intrinsic_scale)
    policy.net.step(grad, lr)
    return PolicyUpdate(loss, logp, raw)


def update_temperatures(temps: Temperatures, log_prob, lr: float,
                        info_policy=None, info_target=None) -> tuple[float, float]:
    """Gradient step on J(alpha1) and, when both info terms are given, on J(alpha2)."""
    a1 = temps.alpha1
    g1 = -a1 * float(np.mean(np.asarray(log_prob) + temps.target_entropy))
    new, temps.opt1 = adam_step(temps.opt1, np.array([temps.log_alpha1]), np.array([g1]), lr)
    temps.log_alpha1 = float(new[0])
    if info_policy is not None and info_target is not None:
        a2 = temps.alpha2
        g2 = a2 * (float(np.mean(info_policy)) - float(np.mean(info_target)))
        new, temps.opt2 = adam_step(temps.opt2, np.array([temps.log_alpha2]), np.array([g2]), lr)
        temps.log_alpha2 = float(new[0])
    return temps.alpha1, temps.alpha2


def update_target_policy(target: SquashedGaussianPolicy, policy: SquashedGaussianPolicy,
                         tau: float) -> SquashedGaussianPolicy:
    target.params = polyak(target.params, policy.params, tau)
    return target


class ActorCritic:
    """Policy, twin critics, target policy and temperatures for one learner."""

    def __init__(self, obs_dim: int, action_dim: int, hidden=(256, 256),
                 init_alpha1: float = 1.0, init_alpha2: float = 1.0, *, rng: np.random.Generator):
        self.policy = SquashedGaussianPolicy(obs_dim, action_dim, hidden, rng=rng)
        self.critics = TwinCritics(obs_dim, action_dim, hidden, rng=rng)
        self.target_policy = self.policy.copy()
        self.temps = Temperatures(math.log(init_alpha1), math.log(init_alpha2),
                                  target_entropy=-float(action_dim))

    def soft_update(self, tau: float) -> None:
        self.critics.soft_update(tau)
        update_target_policy(self.target_policy, self.policy, tau)

    def update_critics(self, batch, rewards, gamma: float, lr: float, rng,
                       bonus_fn=None, alpha2: float = 0.0, episodic: bool = True):
        done = batch.done if episodic else np.zeros_like(batch.done)
        y, bonus = critic_target(rewards, batch.next_obs, done, self.policy, self.critics,
                                 self.temps.alpha1, gamma, rng, bonus_fn, alpha2)
        return update_critics(self.critics, batch.obs, batch.action, y, lr), bonus
