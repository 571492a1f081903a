from __future__ import annotations

import numpy as np

from ..approximator import MlpSpec, Trainable, forward, polyak


class TwinCritics:
    """Two Q-networks on ``concat(s, a)`` with polyak-averaged target copies."""

    def __init__(self, obs_dim: int, action_dim: int, hidden=(256, 256), *, rng: np.random.Generator):
        spec = MlpSpec((obs_dim + action_dim, *hidden, 1))
        self.online = [Trainable.create(spec, rng), Trainable.create(spec, rng)]
        self.target = [q.params.copy() for q in self.online]
        self.spec = spec

    def values(self, s, a) -> np.ndarray:
        x = np.hstack([s, a])
        return np.stack([q(x)[:, 0] for q in self.online])

    def target_min(self, s, a) -> np.ndarray:
        x = np.hstack([s, a])
        return np.minimum(forward(self.spec, self.target[0], x)[:, 0],
                          forward(self.spec, self.target[1], x)[:, 0])

    def min_with_action_grad(self, s, a):
        """min_k Q_k(s, a) and its gradient with respect to ``a`` (online nets)."""
        x = np.hstack([s, a])
        outs = [q.forward_cached(x) for q in self.online]
        q1, q2 = outs[0][0][:, 0], outs[1][0][:, 0]
        pick_first = q1 <= q2
        q_min = np.where(pick_first, q1, q2)
        grad = np.zeros_like(x)
        for k, sel in ((0, pick_first), (1, ~pick_first)):
            if sel.any():
                _, gx = self.online[k].vjp(outs[k][1], sel[:, None].astype(float),
                                          need_input=True, need_params=False)
                grad += gx
        return q_min, grad[:, s.shape[1]:]

    def soft_update(self, tau: float) -> None:
        self.target = [polyak(t, q.params, tau) for t, q in zip(self.target, self.online)]


def critic_loss_and_grads(critics: TwinCritics, s, a, y):
    """Per-critic losses 0.5 * mean (Q(s, a) - y)^2 and their parameter gradients."""
    x = np.hstack([s, a])
    n = x.shape[0]
    losses, grads = [], []
    for q in critics.online:
        pred, cache = q.forward_cached(x)
        err = pred[:, 0] - y
        losses.append(0.5 * np.mean(err ** 2))
        grads.append(q.vjp(cache, (err / n)[:, None])[0])
    return losses, grads


def update_critics(critics: TwinCritics, s, a, y, lr: float) -> float:
    """One Adam step per critic on its own loss; returns the mean loss."""
    losses, grads = critic_loss_and_grads(critics, s, a, y)
    for q, grad in zip(critics.online, grads):
        q.step(grad, lr)
    return float(np.mean(losses))
