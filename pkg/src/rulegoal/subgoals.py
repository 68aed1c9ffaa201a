"""Subgoal discovery: invent goal predicates for states that make the best
policies of a goal succeed more often."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby
from typing import Iterable, Optional

from .core import PRIME, Policy, ReplayBuffer, chain_points, format_state, sort_key
from .policies import FREQUENCY, PolicyParams, learn_policies
from .rules import RuleCache, RuleParams, wilson_lower


@dataclass(frozen=True)
class SubgoalParams:
    beta: float = 0.2
    max_subgoal_size: int = 2
    confidence: float = 0.9  # used only to order candidates

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        if self.max_subgoal_size < 1:
            raise ValueError("max_subgoal_size must be >= 1")


@dataclass(frozen=True)
class Discovery:
    name: str
    state: frozenset
    parent: str
    gain: float

    def __str__(self) -> str:
        return f"{self.name} = {format_state(self.state)}  below={self.parent}  gain={self.gain:.4f}"


def _points(steps: list, buffer: ReplayBuffer, reach: int, extra: int = -1) -> tuple:
    cont = buffer.continues_mask
    start = buffer.full_mask
    for i, step in enumerate(steps):
        m = step & extra
        if i:
            m = (m >> i) & (cont >> (i - 1))
        start &= m
        if not start:
            return 0, 0
    return start, (start << (len(steps) - 1)) & reach


def _family_counts(steps: list, buffer: ReplayBuffer, reach: int, extra: int = -1) -> tuple:
    starts = wins = 0
    for st in steps:
        s, e = _points(st, buffer, reach, extra)
        starts |= s
        wins |= e >> (len(st) - 1)
    return wins.bit_count(), starts.bit_count()


def _family_ratio(steps: list, buffer: ReplayBuffer, reach: int, extra: int = -1) -> float:
    wins, n = _family_counts(steps, buffer, reach, extra)
    return wins / n if n else 0.0


def avg_fq_fitness(policies: Iterable[Policy], buffer: ReplayBuffer) -> float:
    """Share of starting tuples (of any policy in the family) from which some
    policy's chain reached the goal. Tuples are counted once.

    Successful chains are counted by their starting tuple: nested policies
    of different length can share one ending tuple, which would otherwise
    drag the ratio below 1 in a deterministic world.
    """
    starts = wins = 0
    for p in policies:
        s, e = chain_points(p, buffer)
        starts |= s
        wins |= e >> (len(p) - 1)
    s = starts.bit_count()
    return wins.bit_count() / s if s else 0.0


def best_policies(pol: dict, buffer: ReplayBuffer, achieved: int) -> list:
    """For each tuple achieving the goal, the policies of maximal frequency
    fitness among those ending there; returned as one deduplicated list."""
    ends = {p: chain_points(p, buffer)[1] & achieved for p in pol}
    ranked = sorted(pol, key=lambda p: (-pol[p], p.sort_key()))
    chosen = []
    covered = 0
    for _, group in groupby(ranked, key=lambda p: pol[p]):
        group = list(group)
        union = 0
        for p in group:
            if ends[p] & ~covered:
                chosen.append(p)
            union |= ends[p]
        covered |= union
    return sorted(chosen, key=Policy.sort_key)


def candidate_states(buffer: ReplayBuffer, max_size: int) -> list:
    """Sensor sets of size <= max_size contained in some recorded pre-state."""
    sensors = buffer.sensors()
    out = []
    frontier = [(frozenset(), buffer.full_mask, -1)]
    for _ in range(max_size):
        nxt = []
        for base, mask, last in frontier:
            for j in range(last + 1, len(sensors)):
                m = mask & buffer.pre_mask(sensors[j])
                if m:
                    cand = base | {sensors[j]}
                    out.append(cand)
                    nxt.append((cand, m, j))
        frontier = nxt
    return sorted(out, key=lambda s: (len(s), sorted(s, key=sort_key)))


def discover(buffer: ReplayBuffer, goal: str, params: SubgoalParams,
             policy_params: Optional[PolicyParams] = None, rule_params: Optional[RuleParams] = None,
             rules: Optional[RuleCache] = None, capacity: Optional[int] = None) -> list:
    """Search subgoals of ``goal``; accepted ones are registered below it.

    Candidates whose gain over the best-policy family reaches beta are
    visited in order of the Wilson lower bound of their success ratio, so
    that a perfect score on two or three chains does not outrank a
    near-perfect one on many. A visited candidate is accepted only if it
    still gains beta on top of the candidates already accepted in this call;
    this keeps chance companions of a real subgoal out. ``capacity`` caps
    how many new subgoals may be accepted.
    """
    registry = buffer.goals
    target = registry.interpretation(goal)
    if rules is None:
        rules = RuleCache(buffer, rule_params or RuleParams())
    pp = policy_params or PolicyParams()
    pp = PolicyParams(pp.max_policy_length, pp.fitness_gain_threshold, FREQUENCY)
    pol = learn_policies(buffer, target, pp, goals=registry.below(goal), rules=rules)
    best = best_policies(pol, buffer, buffer.achieved_mask(target))
    if not best or capacity == 0:
        return []

    reach = buffer.reaches_mask(target)
    steps = [[buffer.holds_mask(s, a) for s, a in p.steps] for p in best]
    # the planner pursues a goal only while neither it nor anything above it
    # holds, so chains starting elsewhere say nothing about what the goal
    # needs; the primary goal is posed again as soon as it is reached
    context = buffer.full_mask
    for h in (registry.above(goal) | {goal}) - {PRIME}:
        context &= ~buffer.goal_mask(h)
    baseline = _family_ratio(steps, buffer, reach, context)

    upper = registry.above(goal) | {goal}
    scored = []
    for state in candidate_states(buffer, params.max_subgoal_size):
        if state == target or registry.subgoals_with(state, goal):
            continue
        truth, _ = buffer.truth_masks(state, upper)
        truth &= context
        if not truth:
            continue
        wins, n = _family_counts(steps, buffer, reach, truth)
        if n and wins / n - baseline >= params.beta:
            bound = wilson_lower(wins, n, params.confidence)
            # ties go to the tightest description: reached on fewest tuples
            reached = buffer.achieved_mask(state).bit_count()
            scored.append((bound, n, reached, truth, state))

    scored.sort(key=lambda x: (-x[0], -x[1], x[2], -len(x[4]), sorted(x[4], key=sort_key)))
    accepted = []
    given = context
    given_ratio = baseline
    for _, _, _, truth, state in scored:
        if capacity is not None and len(accepted) >= capacity:
            break
        ratio = _family_ratio(steps, buffer, reach, given & truth)
        if ratio - given_ratio < params.beta:
            continue
        name = registry.invent(state, goal)
        accepted.append(Discovery(name, state, goal, ratio - given_ratio))
        given &= truth
        given_ratio = ratio
    return accepted
