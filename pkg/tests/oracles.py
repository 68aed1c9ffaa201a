"""Brute-force reference implementations, written straight from the
definitions with plain loops over tuples. They share no code with the
bitset machinery in ``rulegoal`` beyond the data classes."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np

from rulegoal.core import PRIME, GoalRegistry, Policy, ReplayBuffer, Rule, is_goal


def segment_of(buffer: ReplayBuffer) -> list:
    seg = []
    starts = set(buffer.segment_starts)
    s = -1
    for t in range(len(buffer)):
        if t in starts:
            s += 1
        seg.append(s)
    return seg


def strictly_above(registry: GoalRegistry, g: str) -> set:
    out = set()
    frontier = list(registry.parents[g])
    while frontier:
        h = frontier.pop()
        if h not in out:
            out.add(h)
            frontier.extend(registry.parents[h])
    return out


def _higher_hit(buffer, pi, higher, v) -> bool:
    return any(pi[h] <= buffer[v].post for h in higher)


def goal_true(buffer: ReplayBuffer, t: int, g: str, pi=None, higher=None) -> bool:
    """Goal g true on tuple t: achieved at some earlier u in the same segment
    and no strictly higher goal achieved at any v with u <= v < t."""
    pi = pi or buffer.goals.pi
    higher = strictly_above(buffer.goals, g) if higher is None else higher
    seg = segment_of(buffer)
    for u in range(t):
        if seg[u] != seg[t] or not pi[g] <= buffer[u].post:
            continue
        if not any(_higher_hit(buffer, pi, higher, v) for v in range(u, t)):
            return True
    return False


def goal_after(buffer: ReplayBuffer, t: int, g: str) -> bool:
    """Goal g true once tuple t's transition happened."""
    pi = buffer.goals.pi
    higher = strictly_above(buffer.goals, g)
    seg = segment_of(buffer)
    for u in range(t + 1):
        if seg[u] != seg[t] or not pi[g] <= buffer[u].post:
            continue
        if not any(_higher_hit(buffer, pi, higher, v) for v in range(u, t + 1)):
            return True
    return False


def true_on(buffer: ReplayBuffer, t: int, p: str) -> bool:
    if is_goal(p):
        return goal_true(buffer, t, p)
    return p == buffer[t].action or p in buffer[t].pre


def holds(buffer: ReplayBuffer, t: int, preds) -> bool:
    return all(true_on(buffer, t, p) for p in preds)


def reaches(buffer: ReplayBuffer, t: int, state) -> bool:
    return all(goal_after(buffer, t, p) if is_goal(p) else p in buffer[t].post for p in state)


def probability(buffer: ReplayBuffer, rule: Rule):
    prm = conc = 0
    for t in range(len(buffer)):
        if holds(buffer, t, set(rule.premise) | {rule.action}):
            prm += 1
            if reaches(buffer, t, rule.conclusion):
                conc += 1
    return Fraction(conc, prm) if prm else None


def fitness(buffer: ReplayBuffer, policy: Policy):
    value = Fraction(1)
    for rule in policy.transitions():
        p = probability(buffer, rule)
        if p is None:
            return None
        value *= p
    return value


def chains(buffer: ReplayBuffer, policy: Policy) -> tuple:
    """(starting tuples, ending tuples) by enumerating every window."""
    seg = segment_of(buffer)
    n = len(policy)
    starts, ends = set(), set()
    for t in range(len(buffer) - n + 1):
        if seg[t] != seg[t + n - 1]:
            continue
        if all(holds(buffer, t + i, set(s) | {a}) for i, (s, a) in enumerate(policy.steps)):
            starts.add(t)
            if reaches(buffer, t + n - 1, policy.target):
                ends.add(t + n - 1)
    return starts, ends


def frequency_fitness(buffer: ReplayBuffer, policy: Policy):
    starts, ends = chains(buffer, policy)
    return Fraction(len(ends), len(starts)) if starts else None


def is_law(buffer: ReplayBuffer, rule: Rule, cache: dict) -> bool:
    def prob(premise):
        key = (frozenset(premise), rule.action, rule.conclusion)
        if key not in cache:
            cache[key] = probability(buffer, Rule(premise, rule.action, rule.conclusion))
        return cache[key]

    p = prob(rule.premise)
    if p is None:
        return False
    items = sorted(rule.premise)
    for size in range(1, len(items)):
        for sub in combinations(items, size):
            q = prob(sub)
            if q is not None and q >= p:
                return False
    return True


def all_laws(buffer: ReplayBuffer, conclusion, goals, max_sensors: int) -> set:
    """Every probabilistic law with the given conclusion, by full enumeration."""
    sensors = sorted({p for tr in buffer for p in tr.pre})
    actions = sorted({tr.action for tr in buffer})
    universe = sensors + sorted(goals)
    cache: dict = {}
    out = set()
    for size in range(1, len(universe) + 1):
        for premise in combinations(universe, size):
            if sum(1 for p in premise if not is_goal(p)) > max_sensors:
                continue
            for a in actions:
                rule = Rule(frozenset(premise), a, frozenset(conclusion))
                if is_law(buffer, rule, cache):
                    out.add(rule)
    return out


def strong(candidates, against, value) -> list:
    kept = []
    for p in candidates:
        beaten = any(
            len(q) < len(p) and q.target == p.target and q.premise <= p.premise and q != p
            and value[p] <= value[q]
            for q in against)
        if not beaten:
            kept.append(p)
    return kept


def all_policies(buffer: ReplayBuffer, goal, goals, max_sensors: int, max_length: int) -> set:
    """Level-wise backward enumeration of law chains, pruned with getStrong."""
    goal = frozenset(goal)
    law_memo: dict = {}

    def laws(conclusion):
        if conclusion not in law_memo:
            law_memo[conclusion] = all_laws(buffer, conclusion, goals, max_sensors)
        return law_memo[conclusion]

    value: dict = {}
    level = []
    for r in laws(goal):
        p = Policy(((r.premise, r.action),), goal)
        value[p] = fitness(buffer, p)
        level.append(p)
    found = set(level)
    for _ in range(max_length - 1):
        ext = set()
        for p in level:
            for r in laws(p.premise):
                if {x for x in r.premise if is_goal(x)} != {x for x in r.conclusion if is_goal(x)}:
                    continue
                q = Policy(((r.premise, r.action),) + p.steps, goal)
                if q not in found:
                    value[q] = fitness(buffer, q)
                    ext.add(q)
        level = strong(ext, found, value)
        found |= set(level)
        if not level:
            break
    return found


# -- random instances ----------------------------------------------------

SENSORS = ("a(0)", "a(1)", "b(0)", "b(1)", "c(0)")
ACTS = ("x", "y")


def random_buffer(rng: np.random.Generator, n_tuples: int = 30, n_goals: int = 2,
                  n_sensors: int = 5, break_at=None) -> ReplayBuffer:
    sensors = SENSORS[:n_sensors]

    def state():
        while True:
            s = frozenset(p for p in sensors if rng.random() < 0.45)
            if s:
                return s

    prime = frozenset(rng.choice(sensors, size=2, replace=False).tolist())
    registry = GoalRegistry(prime)
    parent = PRIME
    for _ in range(n_goals):
        size = int(rng.integers(1, 3))
        pi = frozenset(rng.choice(sensors, size=size, replace=False).tolist())
        g = registry.invent(pi, parent)
        if rng.random() < 0.5:
            parent = g
    buffer = ReplayBuffer(registry)
    cur = state()
    for t in range(n_tuples):
        if break_at is not None and t == break_at:
            buffer.new_segment()
            cur = state()
        nxt = state()
        buffer.append(cur, ACTS[int(rng.integers(len(ACTS)))], nxt)
        cur = nxt
    return buffer
