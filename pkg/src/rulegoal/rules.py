"""Enumerate-and-refine search for probabilistic laws with a fixed conclusion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from statistics import NormalDist
from typing import Iterable, Optional

from .core import PRIME, ReplayBuffer, Rule, is_goal


@dataclass(frozen=True)
class RuleParams:
    base_depth: int = 3
    probability_threshold: float = 0.1
    confidence_threshold: float = 0.9
    probability_gain_threshold: float = 0.1
    max_sensor_predicates: int = 1

    def __post_init__(self):
        if self.base_depth < 1:
            raise ValueError("base_depth must be >= 1")
        if self.max_sensor_predicates < 1:
            raise ValueError("max_sensor_predicates must be >= 1")
        for name in ("probability_threshold", "confidence_threshold", "probability_gain_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def wilson_lower(successes: int, trials: int, confidence: float) -> float:
    """One-sided Wilson lower bound; ``confidence`` <= 0.5 gives the point estimate."""
    if trials == 0:
        return 0.0
    p = successes / trials
    if confidence <= 0.5:
        return p
    if confidence >= 1.0:
        return 0.0
    z = NormalDist().inv_cdf(confidence)
    z2 = z * z
    centre = p + z2 / (2 * trials)
    spread = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
    return max(0.0, (centre - spread) / (1 + z2 / trials))


def default_premise_goals(buffer: ReplayBuffer) -> list:
    return sorted(g for g in buffer.goals.active if g != PRIME)


class _Search:
    """Probability bookkeeping for one (buffer, conclusion, action) triple."""

    def __init__(self, buffer: ReplayBuffer, conclusion: frozenset, action: str):
        self.buffer = buffer
        self.action = action
        self.reach = buffer.reaches_mask(conclusion)
        self.act = buffer.action_mask(action)
        self.masks: dict = {frozenset(): self.act}
        self.probs: dict = {}

    def mask(self, premise: frozenset) -> int:
        m = self.masks.get(premise)
        if m is None:
            # build from any one-smaller subset, which is usually cached
            p = next(iter(premise))
            rest = self.mask(premise - {p})
            m = rest & (self.buffer.goal_mask(p) if is_goal(p) else self.buffer.pre_mask(p)) if rest else 0
            self.masks[premise] = m
        return m

    def counts(self, premise: frozenset) -> tuple:
        m = self.mask(premise)
        prm = m.bit_count()
        return prm, (m & self.reach).bit_count() if prm else 0

    def prob(self, premise: frozenset) -> Optional[float]:
        if premise not in self.probs:
            prm, conc = self.counts(premise)
            self.probs[premise] = conc / prm if prm else None
        return self.probs[premise]

    def is_law(self, premise: frozenset) -> bool:
        p = self.prob(premise)
        if p is None:
            return False
        items = sorted(premise)
        for size in range(1, len(items)):
            for sub in combinations(items, size):
                q = self.prob(frozenset(sub))
                if q is not None and q >= p:
                    return False
        return True


def is_probabilistic_law(rule: Rule, buffer: ReplayBuffer) -> bool:
    return _Search(buffer, rule.conclusion, rule.action).is_law(rule.premise)


def _admissible(premise: Iterable[str], params: RuleParams) -> bool:
    return sum(1 for p in premise if not is_goal(p)) <= params.max_sensor_predicates


def _base_premises(sensors: list, goals: list, params: RuleParams, search: _Search):
    """Non-empty premises with at most ``base_depth`` predicates that occur in the buffer."""
    max_s = min(params.max_sensor_predicates, params.base_depth)
    goal_sets = [frozenset()]
    for size in range(1, min(len(goals), params.base_depth) + 1):
        goal_sets.extend(frozenset(c) for c in combinations(goals, size))
    for gs in goal_sets:
        if gs and not search.mask(gs):
            continue
        room = min(max_s, params.base_depth - len(gs))
        if gs:
            yield gs
        # grow sensor parts apriori-style: a premise with zero support has no
        # supported supersets
        frontier = [gs]
        for _ in range(room):
            nxt = []
            for base in frontier:
                top = max((p for p in base if not is_goal(p)), default="")
                for s in sensors:
                    if s <= top:
                        continue
                    cand = base | {s}
                    if search.mask(cand):
                        nxt.append(cand)
                        yield cand
            frontier = nxt


def learn_rules(buffer: ReplayBuffer, conclusion: Iterable[str], params: RuleParams,
                goals: Optional[Iterable[str]] = None) -> list:
    """Probabilistic laws concluding in ``conclusion``, sorted deterministically.

    ``goals`` is the set of goal predicates allowed in premises (all active
    subgoals by default). Laws are found by exhaustive enumeration up to
    ``base_depth`` followed by single-predicate refinement of the maximal ones.
    """
    conclusion = frozenset(conclusion)
    if not conclusion:
        raise ValueError("conclusion must be non-empty")
    goals = sorted(default_premise_goals(buffer) if goals is None else goals)
    sensors = buffer.sensors()
    result: dict = {}
    for action in buffer.actions():
        search = _Search(buffer, conclusion, action)
        if not search.act:
            continue
        laws = [p for p in _base_premises(sensors, goals, params, search) if search.is_law(p)]
        law_set = set(laws)
        to_refine = sorted((p for p in laws if not any(p < q for q in law_set)),
                           key=lambda p: (len(p), sorted(p)))
        seen = set(to_refine)
        while to_refine:
            premise = to_refine.pop()
            parent_p = search.prob(premise)
            for extra in sensors + goals:
                if extra in premise:
                    continue
                cand = premise | {extra}
                if cand in seen or not _admissible(cand, params):
                    continue
                seen.add(cand)
                if not search.mask(cand) or not search.is_law(cand):
                    continue
                law_set.add(cand)
                if search.prob(cand) - parent_p >= params.probability_gain_threshold:
                    to_refine.append(cand)
        for premise in law_set:
            prm, conc = search.counts(premise)
            if wilson_lower(conc, prm, params.confidence_threshold) < params.probability_threshold:
                continue
            if conc / prm < params.probability_threshold:
                continue
            result[Rule(premise, action, conclusion)] = None
    return sorted(result, key=Rule.sort_key)


class RuleCache:
    """Memoises :func:`learn_rules` over one buffer snapshot."""

    def __init__(self, buffer: ReplayBuffer, params: RuleParams):
        self.buffer = buffer
        self.params = params
        self._store: dict = {}
        self._key = None

    def __call__(self, conclusion: Iterable[str], goals: Iterable[str]) -> list:
        key = (len(self.buffer), self.buffer.goals.version)
        if key != self._key:
            self._store = {}
            self._key = key
        item = (frozenset(conclusion), tuple(sorted(goals)))
        if item not in self._store:
            self._store[item] = learn_rules(self.buffer, item[0], self.params, item[1])
        return self._store[item]

    def all_laws(self) -> list:
        laws = {r for rules in self._store.values() for r in rules}
        return sorted(laws, key=Rule.sort_key)
