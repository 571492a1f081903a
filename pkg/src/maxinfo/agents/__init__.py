from .agent import (ALGOS, Agent, AgentConfig, EpsSchedule, MaxInfoSAC, SACIntrinsic,
                    TrainStats, TwoActorAgent, eps_select, explore_then_exploit_mode, make_agent)
from .buffer import Batch, ReplayBuffer, Transition
from .critics import TwinCritics, update_critics
from .policy import SquashedGaussianPolicy, sample_action
from .sac import (ActorCritic, Temperatures, critic_target, soft_td_target, update_policy,
                  update_target_policy, update_temperatures)
