import csv
import os
import subprocess
import sys
from pathlib import Path

import pytest

from rulegoal.agent import AgentConfig, EnvConfig, run_episode
from rulegoal.cli import CSV_COLUMNS, main, rows_to_csv
from rulegoal.core import parse_policy, parse_rule, strip_annotation

FIXTURES = Path(__file__).parent / "fixtures"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_validate_config_defaults(capsys):
    assert main(["validate-config"]) == 0
    assert "[rules]" in capsys.readouterr().out


def test_run_emits_files(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "--k", "1", "--max-actions", "600", "--out-dir", str(out),
                 "--dump-rules", "--dump-policies", "--trace"]) == 0
    rows = read_csv(out / "stats.csv")
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r[0] for r in rows[1:]] == ["0"]
    assert len((out / "trace.txt").read_text().splitlines()) == 600
    for line in (out / "laws.txt").read_text().splitlines():
        rule = parse_rule(line)
        assert str(rule) == strip_annotation(line)
    policies = (out / "policies.txt").read_text().splitlines()
    assert policies
    for line in policies:
        goal, _, text = line.partition(": ")
        assert goal == "G_prime"
        assert str(parse_policy(text)) == strip_annotation(text)
    assert "goals=" in capsys.readouterr().out


def test_run_is_byte_identical(tmp_path):
    arts = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["run", "--k", "2", "--max-actions", "2500", "--seed", "3", "--out-dir", str(out),
              "--dump-rules", "--dump-policies"])
        arts.append([(out / f).read_bytes() for f in
                     ("stats.csv", "laws.txt", "policies.txt", "subgoals.txt", "buffer.txt")])
    assert arts[0] == arts[1]


def test_experiment_csv(tmp_path, capsys):
    out = tmp_path / "e"
    assert main(["experiment", "--k", "1", "--runs", "2", "--max-actions", "1500",
                 "--out-dir", str(out)]) == 0
    rows = read_csv(out / "experiment.csv")
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r[0] for r in rows[1:]] == ["0", "1"]
    runs = [read_csv(out / f"run{i}.csv") for i in range(2)]
    for w in range(2):
        mean = sum(int(r[w + 1][2]) for r in runs) / 2
        assert float(rows[w + 1][2]) == pytest.approx(mean)
    assert capsys.readouterr().out == (out / "experiment.csv").read_text()


def test_single_run_experiment_matches_episode(tmp_path):
    out = tmp_path / "e"
    main(["experiment", "--k", "1", "--runs", "1", "--max-actions", "1200", "--out-dir", str(out)])
    episode = run_episode(EnvConfig(k=1), AgentConfig(max_actions=1200))
    single = read_csv(out / "experiment.csv")[1:]
    expected = list(csv.reader(rows_to_csv(episode.stats.rows()).splitlines()))[1:]
    # means are written as decimals, single-run counts as integers
    assert [[float(x) for x in r] for r in single] == [[float(x) for x in r] for r in expected]


def test_random_baseline_flag(tmp_path):
    out = tmp_path / "r"
    main(["run", "--k", "1", "--max-actions", "500", "--random", "--out-dir", str(out)])
    assert read_csv(out / "stats.csv")[1][4] == "1.0000"


def test_mine_matches_brute_force_golden(tmp_path):
    out = tmp_path / "m"
    assert main(["mine", str(FIXTURES / "buffer30.txt"), "--config", str(FIXTURES / "mine_open.ini"),
                 "--no-subgoals", "--out-dir", str(out)]) == 0
    assert (out / "laws.txt").read_text() == (FIXTURES / "laws30.golden").read_text()


def test_golden_file_is_current():
    sys.path.insert(0, str(FIXTURES))
    try:
        import regenerate
    finally:
        sys.path.remove(str(FIXTURES))
    from rulegoal.core import load_buffer
    buffer = load_buffer((FIXTURES / "buffer30.txt").read_text().splitlines())
    assert regenerate.golden_laws(buffer) == (FIXTURES / "laws30.golden").read_text()


@pytest.mark.parametrize("argv", [
    ["run", "--config", "/nonexistent/cfg.ini"],
    ["mine", "/nonexistent/buffer.txt"],
    ["validate-config", "--k", "0"],
])
def test_errors_exit_nonzero(argv, capsys):
    assert main(argv) == 2
    assert "rulegoal: error:" in capsys.readouterr().err


def test_malformed_buffer(tmp_path, capsys):
    bad = tmp_path / "b.txt"
    bad.write_text("not a transition\n")
    assert main(["mine", str(bad), "--out-dir", str(tmp_path)]) == 2


def test_log_env_var(tmp_path):
    env = dict(os.environ, RULEGOAL_LOG="info")
    proc = subprocess.run([sys.executable, "-m", "rulegoal", "run", "--k", "1", "--max-actions", "150",
                           "--out-dir", str(tmp_path)], env=env, capture_output=True, text=True)
    assert proc.returncode == 0
    assert "INFO rulegoal: wrote" in proc.stderr
