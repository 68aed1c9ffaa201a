import pytest

from rulegoal.agent import (
    WINDOW, AgentConfig, EnvConfig, RunStats, mine_buffer, run_episode, run_experiment,
)
from rulegoal.core import PRIME, fitness
from rulegoal.policies import PolicyParams


def test_identical_seeds_identical_artifacts():
    a = run_episode(EnvConfig(k=2), AgentConfig(n_round=500, max_actions=1500, seed=4))
    b = run_episode(EnvConfig(k=2), AgentConfig(n_round=500, max_actions=1500, seed=4))
    assert a.stats == b.stats
    assert (a.law_dump(), a.policy_dump(), a.discovery_log()) == \
        (b.law_dump(), b.policy_dump(), b.discovery_log())


def test_seeds_differ():
    a = run_episode(EnvConfig(k=1), AgentConfig(max_actions=500, seed=0))
    b = run_episode(EnvConfig(k=1), AgentConfig(max_actions=500, seed=1))
    assert list(a.buffer) != list(b.buffer)


def test_window_rows_sum_to_counter():
    r = run_episode(EnvConfig(k=1), AgentConfig(max_actions=2500))
    rows = r.stats.rows()
    assert [row[1] for row in rows] == [1000, 2000, 2500]
    assert sum(row[2] for row in rows) == rows[-1][3] == r.stats.goals
    assert r.stats.random_actions + r.stats.planned_actions == 2500 == len(r.buffer)
    assert rows[0][4] >= 100 / WINDOW


def test_zero_budget():
    r = run_episode(EnvConfig(k=1), AgentConfig(max_actions=0))
    assert r.stats == RunStats() and len(r.buffer) == 0


def test_random_baseline_never_plans():
    r = run_episode(EnvConfig(k=1), AgentConfig(max_actions=1000, learning=False))
    assert r.stats.planned_actions == 0 and r.policies == {}


def test_learned_agent_plans():
    r = run_episode(EnvConfig(k=1), AgentConfig(max_actions=1000))
    assert r.stats.planned_actions > 0
    assert r.policies[PRIME]


@pytest.mark.parametrize("kw", [dict(n_round=0), dict(n_round=100, m_round=150),
                                dict(n_round=100, m_round=50), dict(max_actions=-1),
                                dict(subgoal_capacity=-1)])
def test_config_rejected(kw):
    with pytest.raises(ValueError):
        run_episode(EnvConfig(), AgentConfig(**kw))


def test_capacity_zero_blocks_discovery():
    r = run_episode(EnvConfig(k=2), AgentConfig(n_round=2000, max_actions=4000, subgoal_capacity=0))
    assert r.discoveries == []


def test_experiment_seeds_and_means():
    env, cfg = EnvConfig(k=1), AgentConfig(max_actions=1200, seed=3)
    exp = run_experiment(env, cfg, runs=2)
    singles = [run_episode(env, AgentConfig(max_actions=1200, seed=s)).stats for s in (3, 4)]
    assert exp.runs == singles
    mean = exp.mean_rows()
    assert mean[0][2] == (singles[0].window_goals[0] + singles[1].window_goals[0]) / 2
    with pytest.raises(ValueError):
        run_experiment(env, cfg, runs=0)


def test_mine_buffer_outputs_consistent(k3_buffer):
    result = mine_buffer(k3_buffer, AgentConfig(policies=PolicyParams()), subgoals=False)
    assert result.laws and result.policies[PRIME]
    for pol in result.policies.values():
        for p, value in pol.items():
            assert len(p) <= 4
            assert value == fitness(p, k3_buffer)
