"""Epsilon-greedy Gaussian-process bandit on a 1-D grid.

With probability ``eps_t = t**(2 alpha - 1)`` the learner samples the grid
point of largest posterior standard deviation, otherwise the point of largest
posterior mean. Ties go to the lowest grid index (``np.argmax`` semantics).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

VARIANCE_CLAMP = 1e-10


@dataclass(frozen=True)
class Kernel:
    kind: str = "rbf"
    lengthscale: float = 0.08

    def __post_init__(self):
        if self.kind != "rbf":
            raise ValueError(f"unsupported kernel {self.kind!r}")
        if not self.lengthscale > 0:
            raise ValueError("lengthscale must be positive")

    def __call__(self, a, b) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        return np.exp(-0.5 * ((a[:, None] - b[None, :]) / self.lengthscale) ** 2)


def make_grid(size: int = 256) -> np.ndarray:
    if size < 2:
        raise ValueError("the grid needs at least two points")
    return np.linspace(0.0, 1.0, size)


def standard_objective(grid, kernel: Kernel = Kernel()) -> np.ndarray:
    """0.8 k(x, 0.23) + 0.6 k(x, 0.61) - 0.4 k(x, 0.85)."""
    centres, weights = np.array([0.23, 0.61, 0.85]), np.array([0.8, 0.6, -0.4])
    return kernel(grid, centres) @ weights


def _clamp_variance(var: np.ndarray) -> np.ndarray:
    if np.any(var < -VARIANCE_CLAMP):
        raise FloatingPointError(f"posterior variance {var.min():.3e} is negative beyond tolerance")
    return np.maximum(var, 0.0)


@dataclass
class GpPosterior:
    X: np.ndarray
    y: np.ndarray
    noise_var: float
    kernel: Kernel
    chol: np.ndarray  # lower factor of K(X, X) + noise_var I
    weights: np.ndarray  # (K + noise_var I)^{-1} y

    def mean(self, x) -> np.ndarray:
        if self.X.size == 0:
            return np.zeros(np.atleast_1d(x).shape[0])
        return self.kernel(x, self.X) @ self.weights

    def variance(self, x) -> np.ndarray:
        x = np.atleast_1d(x)
        if self.X.size == 0:
            return np.ones(x.shape[0])
        Kxs = self.kernel(self.X, x)
        v = cho_solve((self.chol, True), Kxs)
        return _clamp_variance(1.0 - np.sum(Kxs * v, axis=0))

    def std(self, x) -> np.ndarray:
        return np.sqrt(self.variance(x))


def gp_fit(X, y, kernel: Kernel, noise_var: float) -> GpPosterior:
    """Exact GP posterior through a Cholesky factor of ``K + noise_var I``."""
    if not noise_var > 0:
        raise ValueError("noise variance must be positive")
    X = np.asarray(X, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape != y.shape:
        raise ValueError("X and y lengths differ")
    if X.size == 0:
        return GpPosterior(X, y, noise_var, kernel, np.zeros((0, 0)), np.zeros(0))
    A = kernel(X, X) + noise_var * np.eye(X.size)
    try:
        L, _ = cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("covariance factorisation failed") from exc
    L = np.tril(L)
    return GpPosterior(X, y, noise_var, kernel, L, cho_solve((L, True), y))


def epsilon(t: int, alpha: float) -> float:
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    return float(t) ** (2.0 * alpha - 1.0)


def eps_greedy_select(mean: np.ndarray, std: np.ndarray, t: int, alpha: float,
                      rng: np.random.Generator) -> tuple[int, bool]:
    """Grid index to play at round ``t`` and whether it was an exploration round."""
    if not 0.25 < alpha < 0.5:
        raise ValueError("alpha must lie in (1/4, 1/2)")
    explore = bool(rng.random() < epsilon(t, alpha))
    return int(np.argmax(std if explore else mean)), explore


class GridPosterior:
    """GP posterior over a fixed grid, updated one observation at a time.

    Conditioning on ``y = f(x_i) + noise`` is a rank-one update of the grid
    covariance, so each round costs O(M^2) instead of a refactorisation.
    """

    def __init__(self, grid, kernel: Kernel, noise_var: float):
        if not noise_var > 0:
            raise ValueError("noise variance must be positive")
        self.grid = np.asarray(grid, dtype=float)
        self.noise_var = noise_var
        self.cov = kernel(self.grid, self.grid)
        self.mu = np.zeros(self.grid.size)

    @property
    def variance(self) -> np.ndarray:
        return _clamp_variance(np.diag(self.cov).copy())

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def observe(self, i: int, y: float) -> None:
        col = self.cov[:, i].copy()
        denom = col[i] + self.noise_var
        self.mu += col * (y - self.mu[i]) / denom
        self.cov -= np.outer(col, col) / denom


@dataclass
class RegretTrace:
    chosen: np.ndarray  # grid indices
    explore: np.ndarray  # bool per round
    instant: np.ndarray

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.instant)

    def average(self, T: int) -> float:
        return float(self.cumulative[T - 1] / T)

    def to_csv(self) -> str:
        lines = ["t,instant_regret,cumulative_regret,chose_explore"]
        for t, (r, R, e) in enumerate(zip(self.instant, self.cumulative, self.explore), 1):
            lines.append(f"{t},{r!r},{R!r},{int(e)}")
        return "\n".join(lines) + "\n"


def run_bandit(objective, T: int, alpha: float, noise: float, kernel: Kernel = Kernel(),
               seed: int = 0, grid=None) -> RegretTrace:
    """Play ``T`` rounds against ``objective`` (values on ``grid``) with noise std ``noise``."""
    if T < 1:
        raise ValueError("T must be at least 1")
    objective = np.asarray(objective, dtype=float)
    grid = make_grid(objective.size) if grid is None else np.asarray(grid, dtype=float)
    rng = np.random.default_rng(seed)
    post = GridPosterior(grid, kernel, noise ** 2)
    best = objective.max()
    chosen = np.zeros(T, dtype=int)
    explore = np.zeros(T, dtype=bool)
    for t in range(1, T + 1):
        i, e = eps_greedy_select(post.mu, post.std, t, alpha, rng)
        post.observe(i, objective[i] + noise * rng.standard_normal())
        chosen[t - 1], explore[t - 1] = i, e
    return RegretTrace(chosen, explore, best - objective[chosen])


def regret_ratio(alpha: float = 0.4, seeds: int = 10, short: int = 200, long: int = 2000,
                 noise: float = 0.05, kernel: Kernel = Kernel(), grid_size: int = 256) -> float:
    """median_seeds(R_long / long) divided by median_seeds(R_short / short)."""
    grid = make_grid(grid_size)
    J = standard_objective(grid, kernel)
    traces = [run_bandit(J, long, alpha, noise, kernel, s, grid) for s in range(seeds)]
    return float(np.median([tr.average(long) for tr in traces])
                 / np.median([tr.average(short) for tr in traces]))


def exploit_hit_rate(trace: RegretTrace, objective, last: int = 50) -> float:
    """Fraction of the last ``last`` exploitation rounds that played the grid maximiser."""
    picks = trace.chosen[~trace.explore][-last:]
    return float(np.mean(picks == int(np.argmax(objective))))
