"""Backward-chained policy construction from probabilistic laws."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Optional

from .core import PRIME, Policy, ReplayBuffer, fitness, frequency_fitness, goals_of, is_variant, refine_policy
from .rules import RuleCache, RuleParams

STANDARD = "standard"
FREQUENCY = "frequency"


@dataclass(frozen=True)
class PolicyParams:
    max_policy_length: int = 4
    fitness_gain_threshold: float = 0.5
    fitness_kind: str = STANDARD

    def __post_init__(self):
        if self.max_policy_length < 1:
            raise ValueError("max_policy_length must be >= 1")
        if not 0.0 <= self.fitness_gain_threshold <= 1.0:
            raise ValueError("fitness_gain_threshold must lie in [0, 1]")
        if self.fitness_kind not in (STANDARD, FREQUENCY):
            raise ValueError(f"unknown fitness kind {self.fitness_kind!r}")


def fitness_function(kind: str) -> Callable:
    return frequency_fitness if kind == FREQUENCY else fitness


def filter_by_goals(rules: Iterable) -> list:
    return [r for r in rules if goals_of(r.premise) == goals_of(r.conclusion)]


def get_strong(candidates: Iterable[Policy], against: Iterable[Policy], buffer: ReplayBuffer,
               measure: Callable = fitness) -> list:
    """Drop candidates beaten by a strictly shorter variant of at least equal fitness."""
    # a variant shares the target and has a premise inside the candidate's,
    # so index by (target, premise) and walk the candidate's premise subsets
    index: dict = {}
    for q in against:
        index.setdefault((q.target, q.premise), []).append(q)
    kept = []
    for p in candidates:
        fp = measure(p, buffer)
        if fp is None or not _dominated(p, fp, index, buffer, measure):
            kept.append(p)
    return kept


def _dominated(p: Policy, fp, index: dict, buffer: ReplayBuffer, measure: Callable) -> bool:
    premise = sorted(p.premise)
    for r in range(len(premise) + 1):
        for sub in combinations(premise, r):
            for q in index.get((p.target, frozenset(sub)), ()):
                if len(q) < len(p) and is_variant(q, p):
                    fq = measure(q, buffer)
                    if fq is not None and fp <= fq:
                        return True
    return False


def learn_policies(buffer: ReplayBuffer, goal: Iterable[str], params: PolicyParams,
                   rule_params: Optional[RuleParams] = None, goals: Optional[Iterable[str]] = None,
                   rules: Optional[RuleCache] = None) -> dict:
    """Policies for the goal state, mapped to their fitness under ``params.fitness_kind``.

    ``goals`` restricts which goal predicates may appear in policy states.
    Seeds are every law concluding in the goal and are always refined once.
    A refined policy is kept if no shorter variant is at least as fit, but
    it is refined further only while its fitness reaches
    ``params.fitness_gain_threshold``. Undefined fitness drops a policy.
    """
    goal = frozenset(goal)
    if not goal:
        raise ValueError("goal must be non-empty")
    if rules is None:
        rules = RuleCache(buffer, rule_params or RuleParams())
    goals = tuple(sorted(rules.buffer.goals.active - {PRIME} if goals is None else goals))
    measure = fitness_function(params.fitness_kind)

    pol: dict = {}
    for law in rules(goal, goals):
        p = Policy(((law.premise, law.action),), goal)
        value = measure(p, buffer)
        if value is not None:
            pol[p] = value
    frontier = sorted(pol, key=Policy.sort_key)
    length = 1
    while frontier and length < params.max_policy_length:
        length += 1
        refined: dict = {}
        for policy in frontier:
            for law in filter_by_goals(rules(policy.premise, goals)):
                p = refine_policy(policy, law)
                if p in pol or p in refined:
                    continue
                value = measure(p, buffer)
                if value is not None:
                    refined[p] = value
        known = {**pol, **refined}
        strong = get_strong(sorted(refined, key=Policy.sort_key), pol, buffer,
                            lambda q, _b: known.get(q))
        for p in strong:
            pol[p] = refined[p]
        frontier = [p for p in strong if refined[p] >= params.fitness_gain_threshold]
    return {p: pol[p] for p in sorted(pol, key=Policy.sort_key)}
