"""Action planning over the ranked policies of the subgoal hierarchy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import GoalRegistry, Policy, ReplayBuffer, fitness, sort_key
from .rules import RuleParams, wilson_lower


@dataclass(frozen=True)
class Situation:
    """The current situation: latest sensor readings and the goals true now."""

    sensors: frozenset
    goals: frozenset

    @classmethod
    def from_buffer(cls, buffer: ReplayBuffer) -> "Situation":
        if not len(buffer):
            raise ValueError("planning needs a non-empty buffer")
        return cls(buffer.current_sensors(), buffer.current_goals())


@dataclass(frozen=True)
class PlanResult:
    action: str
    was_random: bool
    policy: Optional[Policy] = None
    rank: float = 0.0
    path: tuple = field(default=())

    def trace(self) -> str:
        if self.was_random:
            return f"random {self.action}"
        return f"{self.action} rank={self.rank:.4f} path={'>'.join(self.path)} policy={self.policy}"


class Planner:
    """Ranks policies against one situation.

    ``policies`` maps goal id to {policy: fitness} as produced by the last
    learning round. With ``buffer`` given, fitness is recomputed on it (only
    for policies applicable now), so transitions made since that round count;
    a policy with a transition that no longer passes the probability and
    confidence filters of ``rule_params`` is then worth 0.
    """

    def __init__(self, policies: dict, registry: GoalRegistry, situation: Situation,
                 rng: np.random.Generator, actions: Sequence[str],
                 buffer: Optional[ReplayBuffer] = None, rule_params: Optional[RuleParams] = None):
        self.policies = policies
        self.registry = registry
        self.situation = situation
        self.rng = rng
        self.actions = tuple(actions)
        self.buffer = buffer
        self.rule_params = rule_params or RuleParams()
        self._ranks: dict = {}
        self._best: dict = {}
        self._fitness: dict = {}

    def fitness(self, policy: Policy, owner: str) -> Optional[float]:
        if policy not in self.policies.get(owner, {}):
            return None
        if self.buffer is None:
            return self.policies[owner][policy]
        if policy not in self._fitness:
            self._fitness[policy] = self._current_fitness(policy)
        return self._fitness[policy]

    def _current_fitness(self, policy: Policy) -> Optional[float]:
        threshold = self.rule_params.probability_threshold
        for rule in policy.transitions():
            prm, conc = self.buffer.rule_counts(rule)
            if prm == 0:
                return None
            if conc / prm < threshold or \
                    wilson_lower(conc, prm, self.rule_params.confidence_threshold) < threshold:
                return 0.0
        return fitness(policy, self.buffer)

    def _achieved(self, goals) -> bool:
        return goals <= self.situation.goals

    def rank(self, policy: Policy, owner: str, _stack: tuple = ()) -> float:
        key = (owner, policy)
        if key in self._ranks:
            return self._ranks[key]
        value = self._rank(policy, owner, _stack)
        self._ranks[key] = value
        return value

    def _rank(self, policy: Policy, owner: str, stack: tuple) -> float:
        if not policy.premise_sensors <= self.situation.sensors:
            return 0.0
        fit = self.fitness(policy, owner)
        if not fit:
            return 0.0
        value = fit
        for sub in sorted(policy.subgoals - self.situation.goals):
            if sub in stack or sub not in self.registry:
                return 0.0
            best = self.get_best_pol(sub, stack + (owner,))
            if not best:
                return 0.0
            value *= self.rank(best[0], sub, stack + (owner,))
            if value == 0.0:
                return 0.0
        return value

    def get_best_pol(self, goal: str, _stack: tuple = ()) -> list:
        if goal in self._best:
            return self._best[goal]
        pols = self.policies.get(goal, {})
        if not pols:
            self._best[goal] = []
            return []
        ranked = [(self.rank(p, goal, _stack), p) for p in pols]
        top = max(r for r, _ in ranked)
        best = sorted((p for r, p in ranked if r == top), key=Policy.sort_key)
        # recursion only descends the goal order, so the result is context free
        self._best[goal] = best
        return best

    def _minimal_unachieved(self, subgoals: frozenset) -> str:
        open_ = sorted(subgoals - self.situation.goals)
        minimal = [g for g in open_ if not any(h != g and self.registry.leq(h, g) for h in open_)]
        return minimal[0]

    def open_subgoals(self, goal: str) -> list:
        """Unachieved goals below ``goal`` not made moot by an achieved goal
        between them and ``goal``; most subordinate first."""
        out = []
        below = self.registry.below(goal)
        for g in below:
            if g in self.situation.goals:
                continue
            if (self.registry.above(g) & below) & self.situation.goals:
                continue
            out.append(g)
        return sorted(out, key=lambda g: (-len(self.registry.above(g)), sort_key(g)))

    def lowest_open_subgoals(self, goal: str) -> list:
        """Open subgoals with no open subgoal below them."""
        open_ = self.open_subgoals(goal)
        return [g for g in open_ if not self.registry.below(g) & set(open_)]

    def plan(self, goal: str, fallback: bool = True) -> PlanResult:
        """Pick an action for ``goal``. When no policy of ``goal`` leads
        anywhere from here and ``fallback`` is set, the lowest open subgoals
        are tried before acting randomly."""
        result = self._plan(goal, ())
        if result is None and fallback:
            for sub in self.lowest_open_subgoals(goal):
                result = self._plan(sub, (goal,))
                if result is not None:
                    break
        if result is not None:
            return result
        action = self.actions[int(self.rng.integers(len(self.actions)))]
        return PlanResult(action, True)

    def _plan(self, goal: str, path: tuple) -> Optional[PlanResult]:
        if goal in path or goal not in self.registry:
            return None
        path = path + (goal,)
        for policy in self.get_best_pol(goal):
            r = self.rank(policy, goal)
            if r == 0.0:
                continue
            if self._achieved(policy.subgoals):
                return PlanResult(policy.primary_action, False, policy, r, path)
            found = self._plan(self._minimal_unachieved(policy.subgoals), path)
            if found is not None:
                return found
        return None


def plan(goal: str, buffer: ReplayBuffer, policies: dict, rng: np.random.Generator,
         actions: Sequence[str], rule_params: Optional[RuleParams] = None) -> PlanResult:
    situation = Situation.from_buffer(buffer)
    return Planner(policies, buffer.goals, situation, rng, actions, buffer, rule_params).plan(goal)
