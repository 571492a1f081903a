"""Agents that interact with an environment and learn from a shared replay buffer.

``MaxInfoSAC`` is the main algorithm; ``algo="sac"`` is the same agent with
the information-gain temperature pinned to zero and the model switched off.
The remaining agents are baselines built from the same pieces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .. import seeding
from ..envs import Env, EnvState
from ..intrinsic import (INTRINSIC_KINDS, RunningNormalizer, intrinsic_reward,
                         make_intrinsic_model, target_info_gain)
from .buffer import ReplayBuffer, Transition
from .sac import ActorCritic, soft_td_target, update_policy, update_temperatures
from .critics import update_critics

ALGOS = ("sac", "maxinfosac", "sac_intrinsic", "explore_exploit", "eps_maxinfo")
ALGO_ALIASES = {"explore_then_exploit": "explore_exploit"}


@dataclass
class AgentConfig:
    algo: str = "maxinfosac"
    gamma: float = 0.99
    lr: float = 3e-4
    batch_size: int = 256
    tau: float = 0.005
    warmup_steps: int = 1000
    updates_per_step: int = 1
    buffer_capacity: int = 100_000
    hidden: tuple = (256, 256)
    intrinsic: str = "info_gain"
    ensemble_size: int = 5
    model_hidden: tuple = (256, 256)
    sigma_noise: float = 1e-3
    init_alpha1: float = 1.0
    init_alpha2: float = 1.0
    # None: auto-tuned. A pinned 0 also switches the intrinsic model off.
    alpha2_fixed: Optional[float] = None
    total_steps: int = 30_000
    eps0: float = 1.0
    eps_decay_steps: Optional[int] = None
    switch_block: int = 32
    explore_fraction: float = 0.25

    def __post_init__(self):
        self.algo = ALGO_ALIASES.get(self.algo, self.algo)
        self.hidden = tuple(int(h) for h in self.hidden)
        self.model_hidden = tuple(int(h) for h in self.model_hidden)
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algo {self.algo!r}; choose from {ALGOS}")
        if self.intrinsic not in INTRINSIC_KINDS:
            raise ValueError(f"unknown intrinsic kind {self.intrinsic!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.batch_size < 1 or self.updates_per_step < 0:
            raise ValueError("batch_size must be >= 1 and updates_per_step >= 0")
        if self.algo == "maxinfosac" and self.intrinsic == "curiosity":
            raise ValueError("curiosity needs realised transitions and cannot be "
                             "evaluated at policy actions; use info_gain or rnd")
        if self.ensemble_size < 2 and self.intrinsic != "curiosity":
            raise ValueError("disagreement needs at least two ensemble members")

    @property
    def schedule(self) -> "EpsSchedule":
        decay = self.eps_decay_steps if self.eps_decay_steps is not None else self.total_steps
        return EpsSchedule(self.eps0, max(int(decay), 1), self.switch_block)


@dataclass(frozen=True)
class EpsSchedule:
    eps0: float = 1.0
    decay_steps: int = 30_000
    switch_block: int = 32

    def __post_init__(self):
        if not 0.0 <= self.eps0 <= 1.0:
            raise ValueError("eps0 must lie in [0, 1]")
        if self.switch_block < 1 or self.decay_steps < 1:
            raise ValueError("switch_block and decay_steps must be positive")

    def epsilon(self, step: int) -> float:
        return max(0.0, self.eps0 * (1.0 - step / self.decay_steps))


INTRINSIC_ACTOR, EXTRINSIC_ACTOR = "intrinsic_actor", "extrinsic_actor"


def eps_select(step: int, schedule: EpsSchedule, seed: int) -> str:
    """Actor driving data collection at ``step``.

    One Bernoulli draw per block of ``switch_block`` steps, with epsilon read
    at the block's first step; the draw depends only on ``(seed, block)``.
    """
    block = step // schedule.switch_block
    eps = schedule.epsilon(block * schedule.switch_block)
    u = np.random.default_rng([int(seed), block]).random()
    return INTRINSIC_ACTOR if u < eps else EXTRINSIC_ACTOR


def explore_then_exploit_mode(step: int, total_steps: int, fraction: float = 0.25) -> str:
    return INTRINSIC_ACTOR if step < int(round(fraction * total_steps)) else EXTRINSIC_ACTOR


@dataclass
class TrainStats:
    step: int
    episode_return: float
    alpha1: float
    alpha2: float
    critic_loss: float = math.nan
    policy_loss: float = math.nan
    mean_intrinsic: float = math.nan
    entropy: float = math.nan
    model_loss: float = math.nan
    mode: str = EXTRINSIC_ACTOR

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))


class Agent:
    """Environment interaction, warm-up and buffer handling shared by all agents."""

    def __init__(self, env: Env, config: AgentConfig, seed: int = 0):
        self.env = env
        self.config = config
        self.seed = seed
        spec = env.spec
        self.obs_dim, self.action_dim = spec.obs_dim, spec.action_dim
        low, high = np.array(spec.action_low), np.array(spec.action_high)
        self.center, self.scale = (high + low) / 2.0, (high - low) / 2.0
        self.env_rng = seeding.derive_rng(seed, seeding.ENV)
        self.act_rng = seeding.derive_rng(seed, seeding.ACT)
        self.buffer_rng = seeding.derive_rng(seed, seeding.BUFFER)
        self.init_rng = seeding.derive_rng(seed, seeding.INIT)
        self.update_rng = seeding.derive_rng(seed, seeding.UPDATE)
        self.model_rng = seeding.derive_rng(seed, seeding.MODEL)
        self.buffer = ReplayBuffer(self.obs_dim, self.action_dim, config.buffer_capacity)
        self.steps = 0
        self.episode_return = 0.0
        self.last = None

    # -- hooks -----------------------------------------------------------
    def explore_action(self, obs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exploit_policy(self):
        raise NotImplementedError

    def update(self) -> dict:
        raise NotImplementedError

    def mode(self, step: int) -> str:
        return EXTRINSIC_ACTOR

    def alphas(self) -> tuple[float, float]:
        raise NotImplementedError

    # -- interaction -------------------------------------------------------
    def initial_state(self) -> EnvState:
        return self.env.reset(int(self.env_rng.integers(2 ** 63)))

    def act(self, obs, deterministic: bool = True) -> np.ndarray:
        a, _ = self.exploit_policy().sample_normalised(obs, self.act_rng, deterministic)
        return self.center + self.scale * a[0]

    def train_step(self, state: EnvState):
        """One environment step followed by ``updates_per_step`` gradient steps."""
        cfg = self.config
        obs = self.env.observe(state)
        if self.steps < cfg.warmup_steps:
            a = self.act_rng.uniform(-1.0, 1.0, size=self.action_dim)
        else:
            a = self.explore_action(obs)
        res = self.env.step(state, self.center + self.scale * a)
        # the tasks are infinite-horizon; episode ends are truncations, not terminals
        self.buffer.add(Transition(obs, a, res.reward, res.observation, False))
        self.episode_return += res.reward
        stats = TrainStats(self.steps, self.episode_return, *self.alphas(), mode=self.mode(self.steps))
        self.steps += 1
        if res.done:
            next_state = self.initial_state()
            self.episode_return = 0.0
        else:
            next_state = res.next_state
        if self.steps >= cfg.warmup_steps and len(self.buffer) >= 1:
            for _ in range(cfg.updates_per_step):
                info = self.update()
                for k, v in info.items():
                    setattr(stats, k, v)
        self.last = stats
        return next_state, stats

    def sample_batch(self):
        return self.buffer.sample(self.config.batch_size, self.buffer_rng)


class MaxInfoSAC(Agent):

    def __init__(self, env: Env, config: AgentConfig, seed: int = 0, force_intrinsic: bool = False):
        super().__init__(env, config, seed)
        cfg = config
        self.ac = ActorCritic(self.obs_dim, self.action_dim, cfg.hidden,
                              cfg.init_alpha1, cfg.init_alpha2, rng=self.init_rng)
        self.alpha2_fixed = 0.0 if cfg.algo == "sac" else cfg.alpha2_fixed
        self.use_intrinsic = force_intrinsic or self.alpha2_fixed != 0.0
        self.model = None
        self.normalizer = RunningNormalizer()
        if self.use_intrinsic:
            self.model = make_intrinsic_model(cfg.intrinsic, self.obs_dim, self.action_dim,
                                              cfg.ensemble_size, cfg.model_hidden,
                                              cfg.sigma_noise, rng=self.model_rng)

    def alphas(self):
        a2 = self.ac.temps.alpha2 if self.alpha2_fixed is None else self.alpha2_fixed
        return self.ac.temps.alpha1, a2

    def explore_action(self, obs):
        a, _ = self.ac.policy.sample_normalised(obs, self.act_rng)
        return a[0]

    def exploit_policy(self):
        return self.ac.policy

    def update(self) -> dict:
        cfg = self.config
        ac = self.ac
        batch = self.sample_batch()
        alpha1, alpha2 = self.alphas()
        bonus_fn = policy_bonus = None
        scale = 1.0
        if self.use_intrinsic:
            bonus_fn = lambda s, a: self.normalizer.normalize(self.model.info_gain(s, a))
        critic_loss, _ = ac.update_critics(batch, batch.reward, cfg.gamma, cfg.lr, self.update_rng,
                                           bonus_fn, alpha2)
        if self.use_intrinsic:
            policy_bonus = self.model.info_gain_and_action_grad
            scale = float(self.normalizer.scale(1.0))
        pu = update_policy(ac.policy, ac.critics, alpha1, batch.obs, self.update_rng, cfg.lr,
                           policy_bonus, alpha2, scale)
        info_target = None
        if self.use_intrinsic and self.alpha2_fixed is None:
            info_target = target_info_gain(
                self.model, lambda obs, rng: ac.target_policy.sample_normalised(obs, rng)[0],
                batch.obs, 1, self.update_rng)
        update_temperatures(ac.temps, pu.log_prob, cfg.lr,
                            pu.intrinsic if info_target is not None else None, info_target)
        stats = dict(critic_loss=critic_loss, policy_loss=pu.loss,
                     entropy=-float(np.mean(pu.log_prob)))
        if self.use_intrinsic:
            stats["mean_intrinsic"] = float(np.mean(pu.intrinsic))
            stats["model_loss"] = self.model.train(batch.obs, batch.action, batch.reward,
                                                   batch.next_obs, cfg.lr)
        ac.soft_update(cfg.tau)
        stats["alpha1"], stats["alpha2"] = self.alphas()
        return stats


class _IntrinsicRewardMixin:
    """Per-transition intrinsic rewards from a shared model, normalised."""

    def _make_model(self):
        cfg = self.config
        self.model = make_intrinsic_model(cfg.intrinsic, self.obs_dim, self.action_dim,
                                          cfg.ensemble_size, cfg.model_hidden,
                                          cfg.sigma_noise, rng=self.model_rng)
        self.normalizer = RunningNormalizer()

    def _intrinsic_rewards(self, batch):
        raw = intrinsic_reward(self.config.intrinsic, self.model, batch.obs, batch.action,
                               batch.next_obs, batch.reward)
        return raw, self.normalizer.normalize(raw)

    def _train_model(self, batch) -> float:
        return self.model.train(batch.obs, batch.action, batch.reward, batch.next_obs, self.config.lr)


def sac_intrinsic_targets(policy, extrinsic_critics, intrinsic_critics, batch, intrinsic_rewards,
                          alpha1: float, gamma: float, rng):
    """TD targets for the extrinsic and intrinsic critic pairs from one shared a' ~ pi(s').

    The extrinsic target respects done flags; the intrinsic one is
    non-episodic and carries the entropy term.
    """
    a_next, logp_next = policy.sample_normalised(batch.next_obs, rng)
    y_ext = soft_td_target(batch.reward, batch.done, gamma,
                           extrinsic_critics.target_min(batch.next_obs, a_next), logp_next, 0.0)
    y_int = soft_td_target(intrinsic_rewards, 0.0, gamma,
                           intrinsic_critics.target_min(batch.next_obs, a_next), logp_next, alpha1)
    return y_ext, y_int


class SACIntrinsic(_IntrinsicRewardMixin, Agent):
    """One policy, separate extrinsic and (non-episodic) intrinsic critic pairs."""

    def __init__(self, env: Env, config: AgentConfig, seed: int = 0):
        super().__init__(env, config, seed)
        cfg = config
        self.ac = ActorCritic(self.obs_dim, self.action_dim, cfg.hidden, cfg.init_alpha1, 1.0,
                              rng=self.init_rng)
        self.intrinsic_critics = type(self.ac.critics)(self.obs_dim, self.action_dim, cfg.hidden,
                                                        rng=self.init_rng)
        self._make_model()

    def alphas(self):
        return self.ac.temps.alpha1, 0.0

    def explore_action(self, obs):
        a, _ = self.ac.policy.sample_normalised(obs, self.act_rng)
        return a[0]

    def exploit_policy(self):
        return self.ac.policy

    def update(self) -> dict:
        cfg = self.config
        ac = self.ac
        batch = self.sample_batch()
        alpha1 = ac.temps.alpha1
        raw, r_int = self._intrinsic_rewards(batch)
        y_ext, y_int = sac_intrinsic_targets(ac.policy, ac.critics, self.intrinsic_critics, batch,
                                             r_int, alpha1, cfg.gamma, self.update_rng)
        loss_e = update_critics(ac.critics, batch.obs, batch.action, y_ext, cfg.lr)
        loss_i = update_critics(self.intrinsic_critics, batch.obs, batch.action, y_int, cfg.lr)
        pu = update_policy(ac.policy, [ac.critics, self.intrinsic_critics], alpha1, batch.obs,
                           self.update_rng, cfg.lr)
        update_temperatures(ac.temps, pu.log_prob, cfg.lr)
        model_loss = self._train_model(batch)
        ac.soft_update(cfg.tau)
        self.intrinsic_critics.soft_update(cfg.tau)
        return dict(critic_loss=0.5 * (loss_e + loss_i), policy_loss=pu.loss,
                    entropy=-float(np.mean(pu.log_prob)), mean_intrinsic=float(np.mean(raw)),
                    model_loss=model_loss, alpha1=ac.temps.alpha1)


class TwoActorAgent(_IntrinsicRewardMixin, Agent):
    """Separate intrinsic and extrinsic SAC learners sharing one buffer.

    ``explore_exploit`` lets the intrinsic actor collect data for the first
    ``explore_fraction`` of the budget; ``eps_maxinfo`` switches between the
    actors in blocks with a linearly decaying probability.
    """

    def __init__(self, env: Env, config: AgentConfig, seed: int = 0):
        super().__init__(env, config, seed)
        cfg = config
        self.extrinsic = ActorCritic(self.obs_dim, self.action_dim, cfg.hidden, cfg.init_alpha1,
                                     1.0, rng=self.init_rng)
        self.intrinsic = ActorCritic(self.obs_dim, self.action_dim, cfg.hidden, cfg.init_alpha1,
                                     1.0, rng=self.init_rng)
        self._make_model()
        self.select_seed = int(seeding.derive_rng(seed, seeding.SELECT).integers(2 ** 63))

    def alphas(self):
        return self.extrinsic.temps.alpha1, 0.0

    def mode(self, step: int) -> str:
        cfg = self.config
        if cfg.algo == "explore_exploit":
            return explore_then_exploit_mode(step, cfg.total_steps, cfg.explore_fraction)
        return eps_select(step, cfg.schedule, self.select_seed)

    def explore_action(self, obs):
        learner = self.intrinsic if self.mode(self.steps) == INTRINSIC_ACTOR else self.extrinsic
        a, _ = learner.policy.sample_normalised(obs, self.act_rng)
        return a[0]

    def exploit_policy(self):
        return self.extrinsic.policy

    def update(self) -> dict:
        cfg = self.config
        batch = self.sample_batch()
        raw, r_int = self._intrinsic_rewards(batch)
        out = {}
        for name, learner, rewards in (("ext", self.extrinsic, batch.reward),
                                       ("int", self.intrinsic, r_int)):
            loss, _ = learner.update_critics(batch, rewards, cfg.gamma, cfg.lr, self.update_rng)
            pu = update_policy(learner.policy, learner.critics, learner.temps.alpha1, batch.obs,
                               self.update_rng, cfg.lr)
            update_temperatures(learner.temps, pu.log_prob, cfg.lr)
            out[name] = (loss, pu)
        model_loss = self._train_model(batch)
        self.extrinsic.soft_update(cfg.tau)
        self.intrinsic.soft_update(cfg.tau)
        loss, pu = out["ext"]
        return dict(critic_loss=loss, policy_loss=pu.loss, entropy=-float(np.mean(pu.log_prob)),
                    mean_intrinsic=float(np.mean(raw)), model_loss=model_loss,
                    alpha1=self.extrinsic.temps.alpha1)


def make_agent(env: Env, config: AgentConfig, seed: int = 0) -> Agent:
    if config.algo in ("sac", "maxinfosac"):
        return MaxInfoSAC(env, config, seed)
    if config.algo == "sac_intrinsic":
        return SACIntrinsic(env, config, seed)
    return TwoActorAgent(env, config, seed)
