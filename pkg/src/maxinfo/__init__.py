"""Information-seeking soft actor-critic, with tabular and bandit companions."""

__version__ = "0.1.0"
