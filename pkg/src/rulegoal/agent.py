"""The acting/learning loop: random warm-up, then rounds of rule and policy
learning, periodic subgoal discovery and planned action."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import PRIME, GoalRegistry, ReplayBuffer, format_policy_line, format_rule_line
from .environment import ACTIONS, GridWorld, goal_state
from .planning import Planner, Situation
from .policies import PolicyParams, learn_policies
from .rules import RuleCache, RuleParams
from .subgoals import SubgoalParams, discover

log = logging.getLogger(__name__)

WINDOW = 1000


@dataclass(frozen=True)
class EnvConfig:
    width: int = 25
    height: int = 25
    k: int = 1
    items_per_type: int = 50


@dataclass(frozen=True)
class AgentConfig:
    n_round: int = 100
    m_round: Optional[int] = None
    max_actions: int = 10000
    seed: int = 0
    subgoal_capacity: Optional[int] = None
    learning: bool = True
    rules: RuleParams = field(default_factory=RuleParams)
    policies: PolicyParams = field(default_factory=PolicyParams)
    subgoals: SubgoalParams = field(default_factory=SubgoalParams)

    @property
    def discovery_every(self) -> int:
        return self.m_round or self.n_round

    def validate(self) -> None:
        if self.n_round < 1:
            raise ValueError("n_round must be positive")
        m = self.discovery_every
        if m < self.n_round or m % self.n_round:
            raise ValueError("m_round must be a multiple of n_round")
        if self.max_actions < 0:
            raise ValueError("max_actions must be non-negative")
        if self.subgoal_capacity is not None and self.subgoal_capacity < 0:
            raise ValueError("subgoal_capacity must be non-negative")


@dataclass
class RunStats:
    goals: int = 0
    actions: int = 0
    window_goals: list = field(default_factory=list)
    window_random: list = field(default_factory=list)
    random_actions: int = 0
    planned_actions: int = 0
    round_seconds: list = field(default_factory=list, compare=False)  # wall clock

    def record(self, goal: bool, was_random: bool) -> None:
        w = self.actions // WINDOW
        if w == len(self.window_goals):
            self.window_goals.append(0)
            self.window_random.append(0)
        self.actions += 1
        if goal:
            self.goals += 1
            self.window_goals[w] += 1
        if was_random:
            self.random_actions += 1
            self.window_random[w] += 1
        else:
            self.planned_actions += 1

    def rows(self) -> list:
        out = []
        total = 0
        for w, g in enumerate(self.window_goals):
            total += g
            elapsed = min((w + 1) * WINDOW, self.actions)
            span = elapsed - w * WINDOW
            out.append((w, elapsed, g, total, self.window_random[w] / span))
        return out


@dataclass
class EpisodeResult:
    stats: RunStats
    buffer: ReplayBuffer
    laws: list
    policies: dict
    discoveries: list
    trace: list

    def law_dump(self) -> str:
        return "".join(format_rule_line(r, self.buffer) + "\n" for r in self.laws)

    def policy_dump(self) -> str:
        lines = []
        for goal in self.buffer.goals:
            for p, value in self.policies.get(goal, {}).items():
                lines.append(f"{goal}: {format_policy_line(p, value)}\n")
        return "".join(lines)

    def discovery_log(self) -> str:
        return "".join(f"{d}\n" for d in self.discoveries)


class Learner:
    """Rule, policy and subgoal learning over one replay buffer."""

    def __init__(self, buffer: ReplayBuffer, cfg: AgentConfig):
        self.buffer = buffer
        self.registry = buffer.goals
        self.cfg = cfg
        self.policies: dict = {}
        self.laws: list = []
        self.discoveries: list = []
        self.accepted = 0

    def goal_order(self) -> list:
        # most subordinate goals first
        return sorted(self.registry.active, key=lambda g: (-len(self.registry.above(g)), g))

    def learn(self) -> None:
        rules = RuleCache(self.buffer, self.cfg.rules)
        self.policies = {}
        for g in self.goal_order():
            self.policies[g] = learn_policies(
                self.buffer, self.registry.pi[g], self.cfg.policies,
                goals=self.registry.below(g), rules=rules)
        self.laws = rules.all_laws()

    def discover(self) -> list:
        found = []
        for g in self.goal_order():
            if g not in self.registry:
                continue
            left = None
            if self.cfg.subgoal_capacity is not None:
                left = self.cfg.subgoal_capacity - self.accepted
            new = discover(self.buffer, g, self.cfg.subgoals, self.cfg.policies,
                           self.cfg.rules, capacity=left)
            self.accepted += len(new)
            for d in new:
                log.info("subgoal %s", d)
            found.extend(new)
        self.discoveries.extend(found)
        return found


class Agent:
    def __init__(self, env: EnvConfig, cfg: AgentConfig, trace: bool = False):
        cfg.validate()
        self.cfg = cfg
        env_seq, agent_seq = np.random.SeedSequence(cfg.seed).spawn(2)
        self.world = GridWorld(env.width, env.height, env.k, env.items_per_type,
                               np.random.Generator(np.random.PCG64(env_seq)))
        self.rng = np.random.Generator(np.random.PCG64(agent_seq))
        self.k = env.k
        self.registry = GoalRegistry(goal_state(env.k))
        self.buffer = ReplayBuffer(self.registry)
        self.learner = Learner(self.buffer, cfg)
        self.stats = RunStats()
        self.tracing = trace
        self.trace: list = []
        self.observation = self.world.reset()

    @property
    def policies(self) -> dict:
        return self.learner.policies

    # -- acting ---------------------------------------------------------------

    def act(self, action: str, was_random: bool, note: Optional[str] = None) -> None:
        pre = self.observation.state()
        self.observation, picked = self.world.step(action)
        self.buffer.append(pre, action, self.observation.state())
        primary = picked == self.k
        if primary:
            self.world.notify_primary_goal_achieved()
        self.stats.record(primary, was_random)
        if self.tracing:
            self.trace.append(f"{self.stats.actions - 1}\t{note or ('random ' + action)}")

    def random_action(self) -> str:
        return ACTIONS[int(self.rng.integers(len(ACTIONS)))]

    def planned_step(self) -> None:
        planner = Planner(self.policies, self.registry, Situation.from_buffer(self.buffer),
                          self.rng, ACTIONS, self.buffer, self.cfg.rules)
        result = planner.plan(PRIME)
        self.act(result.action, result.was_random, result.trace())

    def run(self) -> EpisodeResult:
        cfg, learner = self.cfg, self.learner
        budget = cfg.max_actions
        for _ in range(min(cfg.n_round, budget)):
            self.act(self.random_action(), True)
        while self.stats.actions < budget:
            started = time.perf_counter()
            if cfg.learning:
                learner.learn()
                if self.stats.actions % cfg.discovery_every == 0 and learner.discover():
                    learner.learn()
            self.stats.round_seconds.append(time.perf_counter() - started)
            log.debug("round at %d actions took %.2fs", self.stats.actions, self.stats.round_seconds[-1])
            for _ in range(min(cfg.n_round, budget - self.stats.actions)):
                if cfg.learning:
                    self.planned_step()
                else:
                    self.act(self.random_action(), True)
        return EpisodeResult(self.stats, self.buffer, learner.laws, learner.policies,
                             learner.discoveries, self.trace)


def run_episode(env: EnvConfig, cfg: AgentConfig, trace: bool = False) -> EpisodeResult:
    return Agent(env, cfg, trace).run()


def mine_buffer(buffer: ReplayBuffer, cfg: AgentConfig, subgoals: bool = True) -> EpisodeResult:
    """Offline learning on a recorded buffer: one learning round, then subgoal
    discovery and relearning if anything was accepted."""
    learner = Learner(buffer, cfg)
    learner.learn()
    if subgoals and learner.discover():
        learner.learn()
    return EpisodeResult(RunStats(), buffer, learner.laws, learner.policies,
                         learner.discoveries, [])


@dataclass
class ExperimentResult:
    runs: list  # RunStats per run

    def mean_rows(self) -> list:
        n = max(len(s.window_goals) for s in self.runs)
        rows = []
        for w in range(n):
            per = [s.rows()[w] for s in self.runs if w < len(s.window_goals)]
            rows.append((
                w,
                max(r[1] for r in per),
                sum(r[2] for r in per) / len(per),
                sum(r[3] for r in per) / len(per),
                sum(r[4] for r in per) / len(per),
            ))
        return rows


def run_experiment(env: EnvConfig, cfg: AgentConfig, runs: int,
                   on_run: Optional[Callable] = None) -> ExperimentResult:
    if runs < 1:
        raise ValueError("runs must be >= 1")
    stats = []
    for i in range(runs):
        result = run_episode(env, _with_seed(cfg, cfg.seed + i))
        stats.append(result.stats)
        if on_run is not None:
            on_run(i, result)
    return ExperimentResult(stats)


def _with_seed(cfg: AgentConfig, seed: int) -> AgentConfig:
    return replace(cfg, seed=seed)
