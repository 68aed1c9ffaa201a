"""Interpretable hierarchical agent built from mined probabilistic rules,
chained policies and invented subgoal predicates."""

from .agent import (
    AgentConfig, EnvConfig, EpisodeResult, ExperimentResult, RunStats,
    mine_buffer, run_episode, run_experiment,
)
from .config import ExperimentConfig, load_config, parse_config
from .core import (
    PRIME, GoalRegistry, Policy, ReplayBuffer, Rule, fitness, frequency_fitness,
    load_buffer, dump_buffer, parse_policy, parse_rule, rule_probability,
)
from .environment import ACTIONS, ConfigurationError, GridWorld
from .planning import Planner, plan
from .policies import PolicyParams, learn_policies
from .rules import RuleParams, learn_rules
from .subgoals import SubgoalParams, avg_fq_fitness, discover

__version__ = "0.1.0"
