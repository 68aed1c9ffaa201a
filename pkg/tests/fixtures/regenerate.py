"""Rebuild the ``mine`` fixtures: a 30-tuple recorded buffer and the law dump
obtained for it by brute-force enumeration.

    python tests/fixtures/regenerate.py
"""

import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE.parent))

import oracles  # noqa: E402
from rulegoal.core import Rule, dump_buffer, format_rule_line, load_buffer  # noqa: E402

MAX_SENSORS = 5


def golden_laws(buffer) -> str:
    laws = set()
    for g in buffer.goals:
        laws |= oracles.all_laws(buffer, buffer.goals.pi[g], buffer.goals.below(g), MAX_SENSORS)
    return "".join(format_rule_line(r, buffer) + "\n" for r in sorted(laws, key=Rule.sort_key))


def main() -> None:
    buffer = oracles.random_buffer(np.random.default_rng(2024), n_tuples=30, n_goals=2)
    text = dump_buffer(buffer)
    (HERE / "buffer30.txt").write_text(text)
    (HERE / "laws30.golden").write_text(golden_laws(load_buffer(text.splitlines())))


if __name__ == "__main__":
    main()
