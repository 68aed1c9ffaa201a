"""Item Picking grid world.

Items of types 1..k lie on a grid. The agent turns or moves one cell forward
and picks up an item of type i on arrival iff it does not hold type i yet and
either i = 1 or it holds type i-1. Picked items respawn elsewhere, so the
number of items per type stays constant.

Sensors are egocentric: nine cells around the agent (including its own cell,
``Center``) plus a type-blind ``PickedUp`` flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

TURN_LEFT = "turn-left"
TURN_RIGHT = "turn-right"
MOVE = "move"
ACTIONS = (MOVE, TURN_LEFT, TURN_RIGHT)

# row, col offsets for heading 0..3 = north, east, south, west
_DIRS = ((-1, 0), (0, 1), (1, 0), (0, -1))
_ARROWS = "^>v<"

SENSORS = ("Center", "Front", "FrontRight", "Right", "BackRight",
           "Back", "BackLeft", "Left", "FrontLeft")
PICKED_UP = "PickedUp"
EMPTY = "empty"
WALL = "wall"


class ConfigurationError(ValueError):
    pass


def item_name(i: int) -> str:
    return f"type{i}"


def goal_state(i: int) -> frozenset:
    """Sensor description of having just picked up an item of type ``i``."""
    return frozenset({f"Center({item_name(i)})", PICKED_UP})


def _offset(heading: int, forward: int, right: int) -> tuple:
    fr, fc = _DIRS[heading]
    rr, rc = _DIRS[(heading + 1) % 4]
    return forward * fr + right * rr, forward * fc + right * rc


# (forward, right) steps for every cell sensor
_SENSOR_OFFSETS = {
    "Center": (0, 0), "Front": (1, 0), "FrontRight": (1, 1), "Right": (0, 1),
    "BackRight": (-1, 1), "Back": (-1, 0), "BackLeft": (-1, -1), "Left": (0, -1),
    "FrontLeft": (1, -1),
}


@dataclass(frozen=True)
class Observation:
    cells: tuple  # (sensor name, indication) in SENSORS order
    picked_up: bool

    def reading(self, sensor: str) -> str:
        return dict(self.cells)[sensor]

    def state(self) -> frozenset:
        preds = {f"{name}({value})" for name, value in self.cells}
        if self.picked_up:
            preds.add(PICKED_UP)
        return frozenset(preds)


class GridWorld:
    def __init__(self, width: int = 25, height: int = 25, k: int = 1, items_per_type: int = 50,
                 seed: Union[int, np.random.Generator, None] = 0):
        if width < 1 or height < 1:
            raise ConfigurationError("grid dimensions must be positive")
        if k < 1:
            raise ConfigurationError("k must be at least 1")
        if items_per_type < 1:
            raise ConfigurationError("items_per_type must be at least 1")
        if k * items_per_type + 1 > width * height:
            raise ConfigurationError(
                f"{k * items_per_type} items and the agent do not fit on a {width}x{height} grid")
        self.width = width
        self.height = height
        self.k = k
        self.items_per_type = items_per_type
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.items: dict = {}
        self.inventory: set = set()
        self.agent_pos = (0, 0)
        self.heading = 0
        self._pending_primary = False
        self.observation: Optional[Observation] = None

    def reset(self) -> Observation:
        cells = self.width * self.height
        n_items = self.k * self.items_per_type
        chosen = self.rng.choice(cells, size=n_items + 1, replace=False)
        self.agent_pos = divmod(int(chosen[0]), self.width)
        self.items = {}
        for j, c in enumerate(chosen[1:]):
            self.items[divmod(int(c), self.width)] = j // self.items_per_type + 1
        self.heading = int(self.rng.integers(4))
        self.inventory = set()
        self._pending_primary = False
        self.observation = self._observe(False)
        return self.observation

    def _in_bounds(self, pos: tuple) -> bool:
        return 0 <= pos[0] < self.height and 0 <= pos[1] < self.width

    def _observe(self, picked: bool) -> Observation:
        r, c = self.agent_pos
        cells = []
        for name in SENSORS:
            dr, dc = _offset(self.heading, *_SENSOR_OFFSETS[name])
            pos = (r + dr, c + dc)
            if not self._in_bounds(pos):
                value = WALL
            elif pos in self.items:
                value = item_name(self.items[pos])
            else:
                value = EMPTY
            cells.append((name, value))
        return Observation(tuple(cells), picked)

    def _pickable(self, i: int) -> bool:
        return i not in self.inventory and (i == 1 or i - 1 in self.inventory)

    def _respawn(self, i: int) -> None:
        free = [(r, c) for r in range(self.height) for c in range(self.width)
                if (r, c) not in self.items]
        pos = free[int(self.rng.integers(len(free)))]
        self.items[pos] = i

    def step(self, action: str) -> tuple:
        """Apply ``action``; returns (observation, picked item type or None)."""
        if self.observation is None:
            raise RuntimeError("reset() must be called first")
        picked = None
        if action == TURN_LEFT:
            self.heading = (self.heading + 3) % 4
        elif action == TURN_RIGHT:
            self.heading = (self.heading + 1) % 4
        elif action == MOVE:
            dr, dc = _DIRS[self.heading]
            target = (self.agent_pos[0] + dr, self.agent_pos[1] + dc)
            if self._in_bounds(target):
                self.agent_pos = target
                i = self.items.get(target)
                if i is not None and self._pickable(i):
                    picked = i
        else:
            raise ValueError(f"unknown action {action!r}")
        if picked is not None:
            self.inventory.add(picked)
            # the replacement never lands on the agent's cell, so it can be
            # placed before sensing; removal waits until after the snapshot
            # so that Center still shows the picked type
            self._respawn(picked)
            if picked == self.k:
                self._pending_primary = True
        self.observation = self._observe(picked is not None)
        if picked is not None:
            del self.items[self.agent_pos]
        return self.observation, picked

    def notify_primary_goal_achieved(self) -> None:
        if not self._pending_primary:
            raise RuntimeError("no type-k pickup is pending")
        self._pending_primary = False
        self.inventory.clear()

    def render(self) -> str:
        rows = []
        for r in range(self.height):
            row = []
            for c in range(self.width):
                if (r, c) == self.agent_pos:
                    row.append(_ARROWS[self.heading])
                elif (r, c) in self.items:
                    row.append(str(self.items[(r, c)] % 10))
                else:
                    row.append(".")
            rows.append("".join(row))
        return "\n".join(rows)

    def item_counts(self) -> dict:
        counts = {i: 0 for i in range(1, self.k + 1)}
        for i in self.items.values():
            counts[i] += 1
        return counts
