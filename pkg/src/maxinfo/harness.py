"""Run configuration, training loop with periodic evaluation, CSV logs and seed aggregation."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from . import seeding
from .agents import AgentConfig, make_agent
from .envs import Env, make_env, wrap_angle

LOG_COLUMNS = ("step", "episodic_return", "alpha1", "alpha2", "mean_intrinsic",
               "policy_entropy_estimate", "critic_loss")


# --- configuration ------------------------------------------------------------

def _agent_defaults() -> dict[str, Any]:
    cfg = AgentConfig()
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def default_config(command: str) -> dict[str, Any]:
    """Every key a subcommand accepts, with its default value."""
    if command == "train":
        d = {"env": "pendulum", "action_cost": 0.0, "seed": 0, "seeds": 1,
             "eval_every": 1000, "eval_episodes": 5, "out": "runs"}
        d.update(_agent_defaults())
        return d
    if command == "bandit":
        return {"alpha": 0.4, "horizon": 2000, "seeds": 10, "seed": 0, "noise": 0.05,
                "lengthscale": 0.08, "grid_size": 256, "out": "runs"}
    if command == "tabular":
        return {"mdps": 100, "seed": 0, "gamma": 0.9, "out": "runs"}
    raise ValueError(f"unknown command {command!r}")


# keys whose default is None but which hold floats when set
_OPTIONAL_FLOATS = {"alpha2_fixed"}
_OPTIONAL_INTS = {"eps_decay_steps"}


def parse_value(key: str, raw: str, default: Any) -> Any:
    """Convert the string ``raw`` to the type of ``default``; errors name the key."""
    text = raw.strip()
    try:
        if key in _OPTIONAL_FLOATS or key in _OPTIONAL_INTS:
            if text.lower() in ("none", ""):
                return None
            return float(text) if key in _OPTIONAL_FLOATS else int(text)
        if isinstance(default, bool):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(p) for p in text.strip("()").split(",") if p.strip())
        return text
    except ValueError:
        raise ValueError(f"malformed value {raw!r} for key {key!r}") from None


def format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    entries = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def parse_config(command: str, overrides: Optional[dict[str, str]] = None,
                 config_file=None) -> dict[str, Any]:
    """Defaults, then file entries, then ``overrides`` (command-line flags)."""
    config = default_config(command)
    layers = []
    if config_file is not None:
        layers.append(read_config_file(config_file))
    if overrides:
        layers.append(overrides)
    for layer in layers:
        for key, raw in layer.items():
            key = key.replace("-", "_")
            if key not in config:
                raise ValueError(f"unknown config key {key!r} for {command}")
            defaults = default_config(command)
            config[key] = raw if not isinstance(raw, str) else parse_value(key, raw, defaults[key])
    if command == "train":
        agent_config(config)  # validate before any work is done
    return config


def config_snapshot(config: dict[str, Any]) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in config.items())


def agent_config(config: dict[str, Any]) -> AgentConfig:
    names = {f.name for f in fields(AgentConfig)}
    return AgentConfig(**{k: v for k, v in config.items() if k in names})


# --- evaluation -----------------------------------------------------------------

@dataclass
class EvalResult:
    returns: np.ndarray
    tail_abs_angle: Optional[np.ndarray] = None

    @property
    def mean_return(self) -> float:
        return float(np.mean(self.returns))


def evaluate(agent, env: Env, episodes: int, rng: np.random.Generator, tail: int = 50) -> EvalResult:
    """Deterministic-policy episodes run in lockstep.

    For the pendulum, also reports the mean ``|wrap(theta)|`` over the last
    ``tail`` steps of each episode.
    """
    policy = agent.exploit_policy()
    states = [env.reset(int(rng.integers(2 ** 63))) for _ in range(episodes)]
    returns = np.zeros(episodes)
    horizon = env.spec.max_episode_steps
    angles = np.zeros((episodes, horizon))
    for t in range(horizon):
        obs = np.stack([env.observe(s) for s in states])
        a, _ = policy.sample_normalised(obs, rng, deterministic=True)
        actions = agent.center + agent.scale * a
        for i in range(episodes):
            res = env.step(states[i], actions[i])
            returns[i] += res.reward
            states[i] = res.next_state
            angles[i, t] = abs(wrap_angle(states[i].x[0] if env.spec.name == "pendulum"
                                          else states[i].x[2]))
    return EvalResult(returns, angles[:, -tail:].mean(axis=1))


# --- training runs ------------------------------------------------------------------

def run_name(config: dict[str, Any]) -> str:
    return f"{config['env']}-{config['algo']}-K{format_value(float(config['action_cost']))}-seed{config['seed']}"


def _fmt(v: float) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def run_experiment(config: dict[str, Any]) -> Path:
    """Train one seed, appending a log row every ``eval_every`` steps.

    Writes ``<name>.csv``, ``<name>.config`` (a re-runnable snapshot),
    ``<name>.final.json`` and the final policy parameters ``<name>.npz``.
    """
    config = dict(config)
    config["seeds"] = 1
    cfg = agent_config(config)
    env = make_env(config["env"], config["action_cost"])
    seed = int(config["seed"])
    agent = make_agent(env, cfg, seed)
    eval_rng = seeding.derive_rng(seed, seeding.EVAL)
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    name = run_name(config)
    (out / f"{name}.config").write_text(config_snapshot(config), encoding="utf-8")
    csv_path = out / f"{name}.csv"
    eval_every = int(config["eval_every"])
    if eval_every < 1:
        raise ValueError("eval_every must be positive")
    last_eval = None
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        state = agent.initial_state() if cfg.total_steps > 0 else None
        for step in range(1, cfg.total_steps + 1):
            state, stats = agent.train_step(state)
            if step % eval_every == 0:
                last_eval = evaluate(agent, env, int(config["eval_episodes"]), eval_rng)
                writer.writerow([step, _fmt(last_eval.mean_return), _fmt(stats.alpha1),
                                 _fmt(stats.alpha2), _fmt(stats.mean_intrinsic),
                                 _fmt(stats.entropy), _fmt(stats.critic_loss)])
                fh.flush()
    summary = {"steps": cfg.total_steps}
    if last_eval is not None:
        summary.update(final_return=last_eval.mean_return,
                       episode_returns=last_eval.returns.tolist(),
                       tail_abs_angle=last_eval.tail_abs_angle.tolist())
    (out / f"{name}.final.json").write_text(json.dumps(summary, indent=1), encoding="utf-8")
    np.savez(out / f"{name}.npz", policy=agent.exploit_policy().params)
    return csv_path


def max_workers() -> int:
    return max(1, int(os.environ.get("MAXINFO_THREADS", "1")))


def run_seeds(config: dict[str, Any]) -> list[Path]:
    """Run seeds ``seed .. seed + seeds - 1`` with at most ``MAXINFO_THREADS`` jobs at once."""
    configs = [dict(config, seed=int(config["seed"]) + i) for i in range(int(config["seeds"]))]
    if max_workers() == 1 or len(configs) == 1:
        return [run_experiment(c) for c in configs]
    with ProcessPoolExecutor(max_workers=max_workers()) as pool:
        return list(pool.map(run_experiment, configs))


# --- aggregation -------------------------------------------------------------------

def read_log(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, data


def aggregate_seeds(paths: Sequence, out_path=None, column: str = "episodic_return") -> str:
    """Per-step mean, median and standard error of ``column`` across seed logs.

    The standard error uses the sample standard deviation (n - 1) and is 0
    for a single file. Returns the CSV text, also written to ``out_path``.
    """
    if not paths:
        raise ValueError("no logs to aggregate")
    tables = [read_log(p) for p in paths]
    steps = tables[0][1][:, tables[0][0].index("step")]
    values = []
    for (header, data), path in zip(tables, paths):
        if not np.array_equal(data[:, header.index("step")], steps):
            raise ValueError(f"step grid of {path} does not match the first log")
        values.append(data[:, header.index(column)])
    # sorting per step makes the floating-point reductions independent of file order
    values = np.sort(np.array(values), axis=0)
    n = values.shape[0]
    mean = values.mean(axis=0)
    median = np.median(values, axis=0)
    stderr = values.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "mean", "median", "stderr", "n"])
    for s, a, b, c in zip(steps, mean, median, stderr):
        writer.writerow([int(s), _fmt(a), _fmt(b), _fmt(c), n])
    text = buf.getvalue()
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return text


def group_logs(directory) -> dict[str, list[Path]]:
    """Training logs in ``directory`` grouped by run name without the seed suffix."""
    groups: dict[str, list[Path]] = {}
    for p in sorted(Path(directory).glob("*-seed*.csv")):
        groups.setdefault(p.stem.rsplit("-seed", 1)[0], []).append(p)
    return groups
