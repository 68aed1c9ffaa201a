import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from rulegoal.agent import AgentConfig, EnvConfig, run_episode


@pytest.fixture(scope="session")
def k3_buffer():
    """Replay buffer of 3000 random actions in a k=3 world."""
    cfg = AgentConfig(n_round=3000, max_actions=3000, seed=11, learning=False)
    return run_episode(EnvConfig(k=3), cfg).buffer


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE: dict = {}


@pytest.fixture
def verdict(request):
    """Record the measured outcome of an acceptance criterion."""
    number = int(request.node.name.split("_")[2])

    def record(ok: bool, detail: str) -> bool:
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    ran = [r for key in ("passed", "failed", "error") for r in terminalreporter.stats.get(key, [])
           if "test_acceptance.py::test_criterion_" in r.nodeid and r.when == "call"]
    if not ran:
        return
    outcome = {int(r.nodeid.split("test_criterion_")[1].split("_")[0]): r.passed for r in ran}
    terminalreporter.section("acceptance criteria")
    for n in sorted(outcome):
        detail = ACCEPTANCE.get(n, (False, "no measurement recorded"))[1]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if outcome[n] else 'FAIL'}  {detail}")
