"""Predicate language, replay buffer and the truth/probability/fitness semantics.

Predicates are plain strings. Sensor predicates look like ``Right(type3)`` or
``PickedUp``; goal predicates are ``G_prime`` or ``G<n>``; action names live in
their own slot of rules, policies and transitions, so they never mix with
states. Sets of tuples are encoded as Python ints used as bitsets (bit ``t`` is
buffer position ``t``), which keeps the counting in the learners cheap.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

PRIME = "G_prime"
_GOAL_RE = re.compile(r"^G(_prime|\d+)$")

State = frozenset


class RegistryError(KeyError):
    """A goal id was used that the registry does not know about."""


class ChainError(ValueError):
    """Appending a transition would break the chain condition of the buffer."""


@lru_cache(maxsize=None)
def is_goal(p: str) -> bool:
    return _GOAL_RE.match(p) is not None


def goals_of(state: Iterable[str]) -> frozenset:
    return frozenset(p for p in state if is_goal(p))


def sensors_of(state: Iterable[str]) -> frozenset:
    return frozenset(p for p in state if not is_goal(p))


def sort_key(p: str) -> tuple:
    # sensors before goals, then lexicographic
    return (is_goal(p), p)


def format_state(state: Iterable[str]) -> str:
    return ", ".join(sorted(state, key=sort_key))


@dataclass(frozen=True)
class Rule:
    premise: frozenset
    action: str
    conclusion: frozenset

    def __post_init__(self):
        object.__setattr__(self, "premise", frozenset(self.premise))
        object.__setattr__(self, "conclusion", frozenset(self.conclusion))
        if not self.premise or not self.conclusion:
            raise ValueError("rule premise and conclusion must be non-empty")
        object.__setattr__(self, "_hash", hash((self.premise, self.action, self.conclusion)))

    def __hash__(self) -> int:
        return self._hash

    @cached_property
    def _text(self) -> str:
        return f"{format_state(self.premise)}, {self.action} -> {format_state(self.conclusion)}"

    def __str__(self) -> str:
        return self._text

    def sort_key(self) -> tuple:
        return (len(self.premise), self._text)


@dataclass(frozen=True)
class Policy:
    """``S1 {A1} ... Sn {An} G``: ``steps`` holds the (Si, Ai) pairs, ``target`` is G."""

    steps: tuple
    target: frozenset

    def __post_init__(self):
        steps = tuple((frozenset(s), a) for s, a in self.steps)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "target", frozenset(self.target))
        if not steps:
            raise ValueError("policy needs at least one step")
        if not self.target:
            raise ValueError("policy target must be non-empty")
        shared = goals_of(steps[0][0])
        for state, _ in steps:
            if not state:
                raise ValueError("policy step states must be non-empty")
            if goals_of(state) != shared:
                raise ValueError("all policy steps must carry the same goal predicates")
        object.__setattr__(self, "_hash", hash((steps, self.target)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def premise(self) -> frozenset:
        return self.steps[0][0]

    @property
    def primary_action(self) -> str:
        return self.steps[0][1]

    @cached_property
    def subgoals(self) -> frozenset:
        return goals_of(self.premise)

    @cached_property
    def premise_sensors(self) -> frozenset:
        return sensors_of(self.premise)

    def __len__(self) -> int:
        return len(self.steps)

    def transitions(self) -> list:
        states = [s for s, _ in self.steps] + [self.target]
        return [Rule(states[i], a, states[i + 1]) for i, (_, a) in enumerate(self.steps)]

    @cached_property
    def _text(self) -> str:
        body = " ".join(f"{format_state(s)} {{{a}}}" for s, a in self.steps)
        return f"{body} {format_state(self.target)}"

    def __str__(self) -> str:
        return self._text

    def sort_key(self) -> tuple:
        return (len(self), self._text)


def refine_policy(policy: Policy, rule: Rule) -> Policy:
    """Prepend ``rule`` to ``policy`` (the REFN operation)."""
    if rule.conclusion != policy.premise:
        raise ValueError(f"rule conclusion does not match policy premise: {rule}")
    if goals_of(rule.premise) != goals_of(policy.premise):
        raise ValueError(f"rule changes the goal predicates of the policy: {rule}")
    return Policy(((rule.premise, rule.action),) + policy.steps, policy.target)


def is_variant(candidate: Policy, of: Policy) -> bool:
    return candidate != of and candidate.target == of.target and candidate.premise <= of.premise


class GoalRegistry:
    """The active goal set with its interpretation map and partial order.

    ``parents`` stores the covering edges ``g ⊑ parent``; the order is their
    reflexive-transitive closure. Names are never reused after retirement.
    """

    def __init__(self, prime_state: Iterable[str]):
        prime_state = frozenset(prime_state)
        if not prime_state or goals_of(prime_state):
            raise ValueError("primary goal must be a non-empty set of sensor predicates")
        self.pi: dict = {PRIME: prime_state}
        self.parents: dict = {PRIME: set()}
        self._counter = 0
        self.version = 0

    @property
    def active(self) -> frozenset:
        return frozenset(self.pi)

    def __contains__(self, g: str) -> bool:
        return g in self.pi

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.pi, key=self._order_key))

    def __len__(self) -> int:
        return len(self.pi)

    def _order_key(self, g: str) -> tuple:
        return (0, 0) if g == PRIME else (1, int(g[1:]))

    def interpretation(self, g: str) -> frozenset:
        try:
            return self.pi[g]
        except KeyError:
            raise RegistryError(g) from None

    def fresh_name(self) -> str:
        self._counter += 1
        return f"G{self._counter}"

    def invent(self, state: Iterable[str], parent: str) -> str:
        state = frozenset(state)
        if not state or goals_of(state):
            raise ValueError("a subgoal is interpreted by a non-empty set of sensor predicates")
        if parent not in self.pi:
            raise RegistryError(parent)
        name = self.fresh_name()
        self.pi[name] = state
        self.parents[name] = {parent}
        self.version += 1
        return name

    def retire(self, g: str) -> None:
        if g == PRIME:
            raise ValueError("the primary goal cannot be retired")
        if g not in self.pi:
            raise RegistryError(g)
        del self.pi[g]
        del self.parents[g]
        for ps in self.parents.values():
            ps.discard(g)
        self.version += 1

    def above(self, g: str) -> frozenset:
        """Goals strictly above ``g``."""
        if g not in self.pi:
            raise RegistryError(g)
        seen: set = set()
        stack = list(self.parents[g])
        while stack:
            p = stack.pop()
            if p not in seen:
                seen.add(p)
                stack.extend(self.parents[p])
        return frozenset(seen)

    def below(self, g: str) -> frozenset:
        return frozenset(h for h in self.pi if h != g and g in self.above(h))

    def leq(self, a: str, b: str) -> bool:
        return a == b or b in self.above(a)

    def subgoals_with(self, state: frozenset, g: str) -> list:
        return sorted(h for h in self.pi if self.pi[h] == state and self.leq(h, g))

    def check(self) -> None:
        """Raise if the order is cyclic or the primary goal is not the supremum."""
        for g in self.pi:
            if g in self.above(g):
                raise ValueError(f"cycle through {g}")
            if g != PRIME and PRIME not in self.above(g):
                raise ValueError(f"{g} is not below {PRIME}")

    def copy(self) -> "GoalRegistry":
        other = GoalRegistry(self.pi[PRIME])
        other.pi = dict(self.pi)
        other.parents = {g: set(ps) for g, ps in self.parents.items()}
        other._counter = self._counter
        other.version = self.version
        return other


@dataclass(frozen=True)
class Transition:
    pre: frozenset
    action: str
    post: frozenset

    def __str__(self) -> str:
        return f"{format_state(self.pre)} {{{self.action}}} {format_state(self.post)}"


def bits_to_array(mask: int, n: int) -> np.ndarray:
    raw = np.frombuffer(mask.to_bytes((n + 7) // 8 or 1, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def array_to_bits(arr: np.ndarray) -> int:
    return int.from_bytes(np.packbits(arr, bitorder="little").tobytes(), "little")


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class ReplayBuffer:
    """Ordered transitions split into segments, plus the goal registry.

    Buffer position realises the linear order. A new segment starts at every
    environment reset; chains and goal achievements never cross segments.
    """

    def __init__(self, goals: GoalRegistry, capacity: Optional[int] = None):
        self.goals = goals
        self.capacity = capacity
        self.tuples: list = []
        self.segment_starts: list = []
        self._open_segment = True
        self._reindex()

    def _reindex(self) -> None:
        self._pre: dict = {}
        self._post: dict = {}
        self._act: dict = {}
        self._cont = 0
        self._starts = 0
        self._goal_cache: dict = {}
        self._prob_cache: dict = {}
        self._cache_key = None
        starts = set(self.segment_starts)
        for t, tr in enumerate(self.tuples):
            self._index(t, tr, t in starts)

    def _index(self, t: int, tr: Transition, starts_segment: bool) -> None:
        bit = 1 << t
        for p in tr.pre:
            self._pre[p] = self._pre.get(p, 0) | bit
        for p in tr.post:
            self._post[p] = self._post.get(p, 0) | bit
        self._act[tr.action] = self._act.get(tr.action, 0) | bit
        if starts_segment:
            self._starts |= bit
        elif t > 0:
            self._cont |= 1 << (t - 1)

    def __len__(self) -> int:
        return len(self.tuples)

    def __getitem__(self, t: int) -> Transition:
        return self.tuples[t]

    def __iter__(self) -> Iterator[Transition]:
        return iter(self.tuples)

    def new_segment(self) -> None:
        self._open_segment = True

    def append(self, pre: Iterable[str], action: str, post: Iterable[str]) -> None:
        tr = Transition(frozenset(pre), action, frozenset(post))
        if not tr.pre or not tr.post:
            raise ValueError("transition states must be non-empty")
        if goals_of(tr.pre) or goals_of(tr.post):
            raise ValueError("recorded transitions carry sensor predicates only")
        starts = self._open_segment
        if not starts and self.tuples[-1].post != tr.pre:
            raise ChainError(f"chain broken at position {len(self.tuples)}")
        t = len(self.tuples)
        self.tuples.append(tr)
        if starts:
            self.segment_starts.append(t)
            self._open_segment = False
        self._index(t, tr, starts)
        if self.capacity is not None and len(self.tuples) > self.capacity:
            self._evict()

    def _evict(self) -> None:
        # drop whole segments from the front, always keeping the newest one
        while len(self.tuples) > self.capacity and len(self.segment_starts) > 1:
            cut = self.segment_starts[1]
            self.tuples = self.tuples[cut:]
            self.segment_starts = [s - cut for s in self.segment_starts[1:]]
        self._reindex()

    # -- bitset views -------------------------------------------------------

    @property
    def full_mask(self) -> int:
        return (1 << len(self.tuples)) - 1

    @property
    def continues_mask(self) -> int:
        """Bit t set iff tuple t+1 follows t inside the same segment."""
        return self._cont

    def pre_mask(self, p: str) -> int:
        return self._pre.get(p, 0)

    def post_mask(self, p: str) -> int:
        return self._post.get(p, 0)

    def action_mask(self, a: str) -> int:
        return self._act.get(a, 0)

    def sensors(self) -> list:
        return sorted(self._pre)

    def actions(self) -> list:
        return sorted(self._act)

    def _check_cache(self) -> None:
        key = (len(self.tuples), self.goals.version)
        if key != self._cache_key:
            self._goal_cache = {}
            self._prob_cache = {}
            self._cache_key = key

    def achieved_mask(self, state: Iterable[str]) -> int:
        """Tuples whose post-state contains every predicate of ``state``."""
        mask = self.full_mask
        for p in state:
            mask &= self._post.get(p, 0)
        return mask

    def truth_masks(self, interpretation: frozenset, above: Iterable[str]) -> tuple:
        """(before, after) truth bitsets for a goal with the given interpretation.

        ``before`` bit t: the goal is true on tuple t (achieved strictly
        earlier, not reset by a higher goal since). ``after`` bit t: the goal
        is true once tuple t's transition has happened.
        """
        n = len(self.tuples)
        if n == 0:
            return 0, 0
        ach = self.achieved_mask(interpretation)
        higher = 0
        for g in above:
            higher |= self.achieved_mask(self.goals.interpretation(g))
        idx = np.arange(n)
        ach_a = bits_to_array(ach & ~higher, n)
        hi_a = bits_to_array(higher, n)
        start_a = bits_to_array(self._starts, n)
        ach_pos = np.where(ach_a, 2 * idx + 1, -1)
        rst_pos = np.maximum(np.where(hi_a, 2 * idx + 1, -1), np.where(start_a, 2 * idx, -1))
        after = np.maximum.accumulate(ach_pos) > np.maximum.accumulate(rst_pos)
        before = np.zeros(n, dtype=bool)
        before[1:] = after[:-1]
        before &= ~start_a
        return array_to_bits(before), array_to_bits(after)

    def goal_masks(self, g: str) -> tuple:
        self._check_cache()
        if g not in self._goal_cache:
            pi = self.goals.interpretation(g)
            self._goal_cache[g] = self.truth_masks(pi, self.goals.above(g))
        return self._goal_cache[g]

    def goal_mask(self, g: str) -> int:
        return self.goal_masks(g)[0]

    def goal_after_mask(self, g: str) -> int:
        return self.goal_masks(g)[1]

    def holds_mask(self, state: Iterable[str], action: Optional[str] = None) -> int:
        """Tuples on which every predicate of ``state`` (and ``action``) is true."""
        mask = self.full_mask if action is None else self._act.get(action, 0)
        for p in state:
            if not mask:
                break
            mask &= self.goal_mask(p) if is_goal(p) else self._pre.get(p, 0)
        return mask

    def reaches_mask(self, state: Iterable[str]) -> int:
        """Tuples whose transition ends in ``state``: sensors in S_post, goals true afterwards."""
        mask = self.full_mask
        for p in state:
            if not mask:
                break
            mask &= self.goal_after_mask(p) if is_goal(p) else self._post.get(p, 0)
        return mask

    def current_goals(self) -> frozenset:
        """Goals that are true in the situation following the last tuple."""
        if not self.tuples:
            return frozenset()
        last = 1 << (len(self.tuples) - 1)
        return frozenset(g for g in self.goals.active if self.goal_after_mask(g) & last)

    def current_sensors(self) -> frozenset:
        return self.tuples[-1].post if self.tuples else frozenset()

    def rule_counts(self, rule: Rule) -> tuple:
        self._check_cache()
        hit = self._prob_cache.get(rule)
        if hit is None:
            prm_mask = self.holds_mask(rule.premise, rule.action)
            prm = prm_mask.bit_count()
            conc = (prm_mask & self.reaches_mask(rule.conclusion)).bit_count() if prm else 0
            hit = self._prob_cache[rule] = (prm, conc)
        return hit


# -- semantics -------------------------------------------------------------


def predicate_true_on(t: int, p: str, buffer: ReplayBuffer) -> bool:
    if not 0 <= t < len(buffer):
        raise IndexError(t)
    if is_goal(p):
        return bool(buffer.goal_mask(p) >> t & 1)
    tr = buffer[t]
    return p == tr.action or p in tr.pre


def holds_on(t: int, predicates: Iterable[str], buffer: ReplayBuffer) -> bool:
    return all(predicate_true_on(t, p, buffer) for p in predicates)


def rule_probability(rule: Rule, buffer: ReplayBuffer, exact: bool = False):
    """prmconc / prm, or None when the premise never occurred."""
    prm, conc = buffer.rule_counts(rule)
    if prm == 0:
        return None
    return Fraction(conc, prm) if exact else conc / prm


def fitness(policy: Policy, buffer: ReplayBuffer, exact: bool = False):
    # multiplied exactly so that equal rationals give equal floats; dominance
    # checks between policies compare these values with <=
    value = Fraction(1)
    for rule in policy.transitions():
        p = rule_probability(rule, buffer, exact=True)
        if p is None:
            return None
        value *= p
    return value if exact else float(value)


def chain_points(policy: Policy, buffer: ReplayBuffer, extra: int = -1) -> tuple:
    """(starting points, ending points) of ``policy`` as bitsets.

    ``extra`` is ANDed into every step's mask; subgoal discovery uses it to
    add a trial predicate to all steps without registering it.
    """
    cont = buffer.continues_mask
    start = buffer.full_mask
    for i, (state, action) in enumerate(policy.steps):
        step = buffer.holds_mask(state, action) & extra
        if i:
            step >>= i
            step &= cont >> (i - 1)
        start &= step
        if not start:
            return 0, 0
    end = (start << (len(policy) - 1)) & buffer.reaches_mask(policy.target)
    return start, end


def frequency_fitness(policy: Policy, buffer: ReplayBuffer, exact: bool = False):
    start, end = chain_points(policy, buffer)
    s = start.bit_count()
    if s == 0:
        return None
    e = end.bit_count()
    return Fraction(e, s) if exact else e / s


# -- textual grammar ---------------------------------------------------------

_ANNOT_RE = re.compile(r"\s+\[[^\]]*\]\s*$")
_STEP_RE = re.compile(r"\{([^{}]+)\}")


def _parse_state(text: str) -> frozenset:
    return frozenset(p.strip() for p in text.split(",") if p.strip())


def strip_annotation(line: str) -> str:
    return _ANNOT_RE.sub("", line.strip())


def parse_rule(line: str) -> Rule:
    body = strip_annotation(line)
    left, sep, right = body.partition(" -> ")
    if not sep:
        raise ValueError(f"not a rule: {line!r}")
    parts = [p.strip() for p in left.split(",")]
    if len(parts) < 2:
        raise ValueError(f"rule without premise: {line!r}")
    return Rule(frozenset(parts[:-1]), parts[-1], _parse_state(right))


def parse_policy(line: str) -> Policy:
    body = strip_annotation(line)
    pieces = _STEP_RE.split(body)
    # pieces alternates state, action, state, action, ..., target
    if len(pieces) < 3 or len(pieces) % 2 == 0:
        raise ValueError(f"not a policy: {line!r}")
    states = [_parse_state(s) for s in pieces[0::2]]
    actions = [a.strip() for a in pieces[1::2]]
    return Policy(tuple(zip(states[:-1], actions)), states[-1])


def parse_transition(line: str) -> Transition:
    pieces = _STEP_RE.split(line.strip())
    if len(pieces) != 3:
        raise ValueError(f"not a transition: {line!r}")
    return Transition(_parse_state(pieces[0]), pieces[1].strip(), _parse_state(pieces[2]))


def format_rule_line(rule: Rule, buffer: ReplayBuffer) -> str:
    prm, conc = buffer.rule_counts(rule)
    p = conc / prm if prm else float("nan")
    return f"{rule}  [p={p:.4f} prm={prm} prmconc={conc}]"


def format_policy_line(policy: Policy, value: Optional[float], label: str = "fitness") -> str:
    shown = "undefined" if value is None else f"{value:.4f}"
    return f"{policy}  [{label}={shown}]"


SEGMENT_MARK = "--- segment"


def dump_buffer(buffer: ReplayBuffer) -> str:
    lines = []
    for g in buffer.goals:
        lines.append(f"@goal {g} = {format_state(buffer.goals.pi[g])}")
        for parent in sorted(buffer.goals.parents[g]):
            lines.append(f"@below {g} {parent}")
    starts = set(buffer.segment_starts)
    for t, tr in enumerate(buffer):
        if t in starts:
            lines.append(SEGMENT_MARK)
        lines.append(str(tr))
    return "\n".join(lines) + "\n"


def load_buffer(lines: Sequence[str], prime_state: Optional[Iterable[str]] = None) -> ReplayBuffer:
    """Parse the recording format written by :func:`dump_buffer`.

    Goal lines are optional; ``prime_state`` supplies the primary goal when
    the file has none.
    """
    goal_defs: dict = {}
    edges: list = []
    body: list = []
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("@goal "):
            name, _, state = line[6:].partition("=")
            goal_defs[name.strip()] = _parse_state(state)
        elif line.startswith("@below "):
            child, parent = line[7:].split()
            edges.append((child, parent))
        else:
            body.append(line)
    prime = goal_defs.get(PRIME, frozenset(prime_state or ()))
    registry = GoalRegistry(prime)
    for name in sorted(goal_defs, key=lambda g: (g != PRIME, g)):
        if name == PRIME:
            continue
        if not _GOAL_RE.match(name):
            raise ValueError(f"bad goal name {name!r}")
        registry.pi[name] = goal_defs[name]
        registry.parents[name] = set()
        registry._counter = max(registry._counter, int(name[1:]))
    for child, parent in edges:
        if child not in registry.pi or parent not in registry.pi:
            raise ValueError(f"order edge over unknown goal: {child} {parent}")
        registry.parents[child].add(parent)
    registry.check()
    registry.version += 1
    buffer = ReplayBuffer(registry)
    for line in body:
        if line == SEGMENT_MARK:
            buffer.new_segment()
            continue
        tr = parse_transition(line)
        buffer.append(tr.pre, tr.action, tr.post)
    return buffer
