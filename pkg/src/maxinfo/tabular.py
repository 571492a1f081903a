"""Exact soft policy evaluation and improvement on small finite MDPs.

The soft value carries both an entropy term and a fixed exploration bonus:

    V(s)    = sum_a pi(a|s) [Q(s, a) - alpha1 log pi(a|s) + alpha2 b(s, a)]
    Q'(s,a) = r(s, a) + gamma sum_s' P(s'|s, a) V(s')

Improvement takes the row-wise softmax of ``(Q + alpha2 b) / alpha1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax, xlogy

ROW_TOL = 1e-12
EVAL_TOL = 1e-12
IMPROVE_TOL = 1e-10


@dataclass(frozen=True)
class FiniteMdp:
    P: np.ndarray  # (S, A, S)
    r: np.ndarray  # (S, A)
    gamma: float

    def __post_init__(self):
        S, A = self.r.shape
        if self.P.shape != (S, A, S):
            raise ValueError(f"transition tensor shape {self.P.shape} does not match rewards {self.r.shape}")
        if np.any(self.P < 0) or np.max(np.abs(self.P.sum(axis=2) - 1.0)) > ROW_TOL:
            raise ValueError("transition rows must be probability vectors")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")

    @property
    def n_states(self) -> int:
        return self.r.shape[0]

    @property
    def n_actions(self) -> int:
        return self.r.shape[1]


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int, gamma: float = 0.9) -> FiniteMdp:
    """Dirichlet(1) transition rows and rewards uniform on [-0.5, 0.5]."""
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    P /= P.sum(axis=2, keepdims=True)
    return FiniteMdp(P, rng.uniform(-0.5, 0.5, size=(n_states, n_actions)), gamma)


def _check_policy(pi: np.ndarray) -> None:
    if np.any(pi < 0) or np.max(np.abs(pi.sum(axis=1) - 1.0)) > ROW_TOL:
        raise ValueError("policy rows must be probability vectors")


def soft_state_value(pi, Q, alpha1: float, alpha2: float, bonus) -> np.ndarray:
    # xlogy gives 0 * log 0 = 0 for actions the policy never takes
    return np.sum(pi * (Q + alpha2 * bonus) - alpha1 * xlogy(pi, pi), axis=1)


def soft_bellman_apply(mdp: FiniteMdp, pi, Q, alpha1: float, alpha2: float, bonus) -> np.ndarray:
    """One exact application of the soft Bellman operator for ``pi``."""
    if alpha1 < 0 or alpha2 < 0:
        raise ValueError("temperatures must be non-negative")
    V = soft_state_value(pi, Q, alpha1, alpha2, bonus)
    return mdp.r + mdp.gamma * mdp.P @ V


def soft_policy_evaluate(mdp: FiniteMdp, pi, alpha1: float, alpha2: float, bonus,
                         tol: float = EVAL_TOL, Q0=None, max_iter: int = 100_000) -> np.ndarray:
    """Iterate the operator until successive iterates differ by at most ``tol`` in sup norm."""
    _check_policy(pi)
    Q = np.zeros_like(mdp.r) if Q0 is None else np.array(Q0, dtype=float)
    for _ in range(max_iter):
        Q_next = soft_bellman_apply(mdp, pi, Q, alpha1, alpha2, bonus)
        if np.max(np.abs(Q_next - Q)) <= tol:
            return Q_next
        Q = Q_next
    raise RuntimeError("policy evaluation did not converge")


def soft_policy_evaluate_exact(mdp: FiniteMdp, pi, alpha1: float, alpha2: float, bonus) -> np.ndarray:
    """Closed-form fixed point via one linear solve on state values."""
    S = mdp.n_states
    P_pi = np.einsum("sa,sat->st", pi, mdp.P)
    c = np.sum(pi * (mdp.r + alpha2 * bonus) - alpha1 * xlogy(pi, pi), axis=1)
    V = np.linalg.solve(np.eye(S) - mdp.gamma * P_pi, c)
    return mdp.r + mdp.gamma * mdp.P @ V


def soft_policy_improve(Q, alpha1: float, alpha2: float, bonus) -> np.ndarray:
    """Row-wise softmax of ``(Q + alpha2 * bonus) / alpha1``."""
    if alpha1 <= 0:
        raise ValueError("soft improvement needs alpha1 > 0")
    return softmax((np.asarray(Q) + alpha2 * np.asarray(bonus)) / alpha1, axis=1)


@dataclass
class IterationTrace:
    policies: list = field(default_factory=list)
    q_tables: list = field(default_factory=list)

    def __len__(self):
        return len(self.q_tables)


def soft_policy_iteration(mdp: FiniteMdp, alpha1: float, alpha2: float, bonus,
                          tol: float = IMPROVE_TOL, eval_tol: float = EVAL_TOL,
                          pi0=None, max_iter: int = 10_000):
    """Alternate exact evaluation and improvement until the policy stops moving.

    Stops once every row changes by less than ``tol`` in total variation.
    Returns ``(pi, Q, trace)``; the trace holds each evaluated policy and its Q.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pi = (np.full(mdp.r.shape, 1.0 / mdp.n_actions) if pi0 is None else np.array(pi0, dtype=float))
    trace = IterationTrace()
    Q = None
    for _ in range(max_iter):
        Q = soft_policy_evaluate(mdp, pi, alpha1, alpha2, bonus, eval_tol, Q0=Q)
        trace.policies.append(pi)
        trace.q_tables.append(Q)
        new_pi = soft_policy_improve(Q, alpha1, alpha2, bonus)
        change = 0.5 * np.max(np.sum(np.abs(new_pi - pi), axis=1))
        pi = new_pi
        if change < tol:
            return pi, Q, trace
    raise RuntimeError("soft policy iteration did not converge")


def soft_objective(mdp: FiniteMdp, pi, alpha1: float, alpha2: float, bonus, start=None) -> float:
    """Expected soft value under ``start`` (uniform over states by default)."""
    Q = soft_policy_evaluate_exact(mdp, pi, alpha1, alpha2, bonus)
    V = soft_state_value(pi, Q, alpha1, alpha2, bonus)
    start = np.full(mdp.n_states, 1.0 / mdp.n_states) if start is None else start
    return float(start @ V)


# --- verification sweep --------------------------------------------------------

@dataclass
class VerificationReport:
    n_mdps: int = 0
    n_iterations: int = 0
    monotone_failures: int = 0
    oracle_failures: int = 0
    worst_monotone_violation: float = 0.0
    worst_oracle_error: float = 0.0

    @property
    def passed(self) -> bool:
        return self.monotone_failures == 0 and self.oracle_failures == 0


def verify_lemmas(n_mdps: int = 100, seed: int = 0, gamma: float = 0.9,
                  monotone_tol: float = 1e-9, oracle_tol: float = 1e-10):
    """Run soft policy iteration on random MDPs and audit every iteration.

    Each MDP has up to 5 states and 4 actions, a non-negative bonus table and
    temperatures drawn from ``alpha1 in {0.1, 1}``, ``alpha2 in {0, 0.5}``.
    Returns the report and one row per MDP.
    """
    rng = np.random.default_rng(seed)
    report = VerificationReport()
    rows = []
    for k in range(n_mdps):
        S, A = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        mdp = random_mdp(rng, S, A, gamma)
        bonus = rng.uniform(0.0, 1.0, size=(S, A))
        alpha1 = float(rng.choice([0.1, 1.0]))
        alpha2 = float(rng.choice([0.0, 0.5]))
        _, _, trace = soft_policy_iteration(mdp, alpha1, alpha2, bonus)
        worst_mono, worst_oracle = 0.0, 0.0
        for pi, Q in zip(trace.policies, trace.q_tables):
            exact = soft_policy_evaluate_exact(mdp, pi, alpha1, alpha2, bonus)
            worst_oracle = max(worst_oracle, float(np.max(np.abs(Q - exact))))
        for Q_old, Q_new in zip(trace.q_tables, trace.q_tables[1:]):
            worst_mono = max(worst_mono, float(np.max(Q_old - Q_new)))
        report.n_mdps += 1
        report.n_iterations += len(trace)
        report.monotone_failures += worst_mono > monotone_tol
        report.oracle_failures += worst_oracle > oracle_tol
        report.worst_monotone_violation = max(report.worst_monotone_violation, worst_mono)
        report.worst_oracle_error = max(report.worst_oracle_error, worst_oracle)
        rows.append((k, S, A, alpha1, alpha2, len(trace), worst_mono, worst_oracle))
    return report, rows


def contraction_check(n_triples: int = 1000, seed: int = 0, gamma: float = 0.9,
                      alpha1: float = 1.0, alpha2: float = 0.5):
    """Largest ``||T Q1 - T Q2|| - gamma ||Q1 - Q2||`` over random triples (sup norms)."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_triples):
        S, A = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        mdp = random_mdp(rng, S, A, gamma)
        pi = rng.dirichlet(np.ones(A), size=S)
        bonus = rng.uniform(0.0, 1.0, size=(S, A))
        Q1 = rng.normal(scale=5.0, size=(S, A))
        Q2 = rng.normal(scale=5.0, size=(S, A))
        lhs = np.max(np.abs(soft_bellman_apply(mdp, pi, Q1, alpha1, alpha2, bonus)
                            - soft_bellman_apply(mdp, pi, Q2, alpha1, alpha2, bonus)))
        worst = max(worst, float(lhs - gamma * np.max(np.abs(Q1 - Q2))))
    return worst
