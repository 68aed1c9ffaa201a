"""INI experiment configuration.

Sections and keys (all optional)::

    [environment]  width height k items_per_type
    [agent]        n_round m_round max_actions seed subgoal_capacity runs learning
    [rules]        base_depth probability_threshold confidence_threshold
                   probability_gain_threshold max_sensor_predicates
    [policies]     max_policy_length fitness_gain_threshold
    [subgoals]     beta max_subgoal_size confidence
    [output]       out_dir dump_rules dump_policies trace

``n_round`` defaults to 100 for k = 1 and 2000 otherwise.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

from .agent import AgentConfig, EnvConfig
from .environment import ConfigurationError, GridWorld
from .policies import PolicyParams
from .rules import RuleParams
from .subgoals import SubgoalParams


def default_n_round(k: int) -> int:
    return 100 if k == 1 else 2000


@dataclass(frozen=True)
class OutputConfig:
    out_dir: str = "out"
    dump_rules: bool = False
    dump_policies: bool = False
    trace: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    runs: int = 10
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> None:
        """Raise ConfigurationError on inconsistent settings."""
        try:
            self.agent.validate()
            GridWorld(self.env.width, self.env.height, self.env.k, self.env.items_per_type)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["environment"] = _section(self.env)
        agent = {k: v for k, v in _section(self.agent).items()
                 if k not in ("rules", "policies", "subgoals")}
        agent["runs"] = str(self.runs)
        cp["agent"] = agent
        cp["rules"] = _section(self.agent.rules)
        cp["policies"] = {k: v for k, v in _section(self.agent.policies).items() if k != "fitness_kind"}
        cp["subgoals"] = _section(self.agent.subgoals)
        cp["output"] = _section(self.output)
        lines = []
        for name in cp.sections():
            lines.append(f"[{name}]")
            lines.extend(f"{k} = {v}" for k, v in cp[name].items() if v != "")
            lines.append("")
        return "\n".join(lines)


def _section(obj) -> dict:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, (RuleParams, PolicyParams, SubgoalParams)):
            out[f.name] = v
        elif v is None:
            out[f.name] = ""
        elif isinstance(v, bool):
            out[f.name] = "true" if v else "false"
        else:
            out[f.name] = str(v)
    return out


_KNOWN = {
    "environment": {f.name for f in fields(EnvConfig)},
    "agent": {"n_round", "m_round", "max_actions", "seed", "subgoal_capacity", "runs", "learning"},
    "rules": {f.name for f in fields(RuleParams)},
    "policies": {"max_policy_length", "fitness_gain_threshold"},
    "subgoals": {f.name for f in fields(SubgoalParams)},
    "output": {f.name for f in fields(OutputConfig)},
}


def _read(cp: configparser.ConfigParser, section: str, base):
    if not cp.has_section(section):
        return {}
    unknown = set(cp[section]) - _KNOWN[section]
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    out = {}
    for key in cp[section]:
        raw = cp[section][key].strip()
        default = getattr(base, key, None) if base is not None else None
        try:
            if key in ("m_round", "subgoal_capacity"):
                out[key] = int(raw) if raw and raw.lower() != "none" else None
            elif isinstance(default, bool):
                out[key] = cp[section].getboolean(key)
            elif isinstance(default, int) or key == "runs":
                out[key] = int(raw)
            elif isinstance(default, float):
                out[key] = float(raw)
            else:
                out[key] = raw
        except ValueError as exc:
            raise ConfigurationError(f"[{section}] {key}: {exc}") from exc
    return out


def parse_config(text: str, k: Optional[int] = None) -> ExperimentConfig:
    """Parse INI text; ``k`` overrides the file before k-dependent defaults apply."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(str(exc)) from exc
    unknown = set(cp.sections()) - set(_KNOWN)
    if unknown:
        raise ConfigurationError(f"unknown section(s): {', '.join(sorted(unknown))}")
    try:
        env = EnvConfig(**_read(cp, "environment", EnvConfig()))
        if k is not None:
            env = replace(env, k=k)
        agent_keys = _read(cp, "agent", AgentConfig())
        runs = agent_keys.pop("runs", 10)
        agent_keys.setdefault("n_round", default_n_round(env.k))
        agent = AgentConfig(
            rules=RuleParams(**_read(cp, "rules", RuleParams())),
            policies=PolicyParams(**_read(cp, "policies", PolicyParams())),
            subgoals=SubgoalParams(**_read(cp, "subgoals", SubgoalParams())),
            **agent_keys)
        output = OutputConfig(**_read(cp, "output", OutputConfig()))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc
    cfg = ExperimentConfig(env, agent, runs, output)
    cfg.validate()
    return cfg


def load_config(path: Union[str, Path, None], k: Optional[int] = None) -> ExperimentConfig:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return parse_config("", k)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text, k)


def override(cfg: ExperimentConfig, *, seed: Optional[int] = None, runs: Optional[int] = None,
             max_actions: Optional[int] = None, out_dir: Optional[str] = None,
             subgoal_capacity: Optional[int] = None, dump_rules: bool = False,
             dump_policies: bool = False, trace: bool = False) -> ExperimentConfig:
    """Apply command-line overrides (k is handled by :func:`load_config`)."""
    agent, output = cfg.agent, cfg.output
    if seed is not None:
        agent = replace(agent, seed=seed)
    if max_actions is not None:
        agent = replace(agent, max_actions=max_actions)
    if subgoal_capacity is not None:
        agent = replace(agent, subgoal_capacity=subgoal_capacity)
    output = replace(output, out_dir=out_dir or output.out_dir,
                     dump_rules=output.dump_rules or dump_rules,
                     dump_policies=output.dump_policies or dump_policies,
                     trace=output.trace or trace)
    out = ExperimentConfig(cfg.env, agent, runs if runs is not None else cfg.runs, output)
    out.validate()
    return out
