"""Experiment configuration files.

Schema (JSON)::

    {
      "problem": {"label", "actions", "states", "payoffs"} | "path/to/problem.json",
      "agent": {"kind": "cr_explorer", "delta": 0.5},
      "nature": {"kind": "stationary", "pattern": ["s1", "s2"]},
      "monitoring": "perfect",
      "delta": 0.5,
      "K": "theoretical" | 3906,
      "horizon": 8000,
      "replications": 400,
      "master_seed": 1,
      "confidence_level": 0.95,
      "jobs": 1,
      "outputs": {"trace": "trace.csv", "report": "report.json"}
    }

Relative problem paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from typing import Any, Mapping

from nonbayes.agents import AGENT_KINDS, agent_feedback, theoretical_k
from nonbayes.engine import MONITORING
from nonbayes.errors import ConfigurationError
from nonbayes.nature import NATURE_KINDS
from nonbayes.problem import DecisionProblem, fraction_text as _num, load_problem, problem_from_dict, to_fraction

OUTPUT_DIR_ENV = "NONBAYES_OUTPUT_DIR"

_KNOWN_FIELDS = {
    "problem", "agent", "nature", "monitoring", "delta", "K", "horizon",
    "replications", "master_seed", "confidence_level", "jobs", "outputs",
}


@dataclass
class ExperimentConfig:
    problem: DecisionProblem
    agent: dict[str, Any]
    nature: dict[str, Any]
    monitoring: str = "perfect"
    delta: Fraction = Fraction(1, 2)
    K: int | None = None
    k_theoretical: bool = False
    horizon: int = 1000
    replications: int = 1
    master_seed: int | None = None
    confidence_level: float = 0.95
    jobs: int = 1
    outputs: dict[str, str] = field(default_factory=dict)
    problem_path: str | None = None

    def to_dict(self, resolved: bool = False) -> dict[str, Any]:
        """JSON-ready form; ``resolved`` inlines the problem and the numeric K."""
        if self.problem_path is not None and not resolved:
            problem: Any = self.problem_path
        else:
            problem = self.problem.to_dict()
        d: dict[str, Any] = {
            "problem": problem,
            "agent": _jsonable(self.agent),
            "nature": _jsonable(self.nature),
            "monitoring": self.monitoring,
            "delta": _num(self.delta),
            "horizon": self.horizon,
            "replications": self.replications,
            "confidence_level": self.confidence_level,
            "jobs": self.jobs,
            "outputs": dict(self.outputs),
        }
        if self.K is not None:
            d["K"] = "theoretical" if self.k_theoretical and not resolved else self.K
        if self.master_seed is not None:
            d["master_seed"] = self.master_seed
        return d

    def with_overrides(self, **changes: Any) -> ExperimentConfig:
        """Apply command-line flags (``None`` means "not given") and revalidate."""
        raw = self.to_dict()
        if self.problem_path is not None:
            raw["problem"] = self.problem.to_dict()
        for key, value in changes.items():
            if value is None:
                continue
            if key in ("trace", "report"):
                raw.setdefault("outputs", {})[key] = value
            else:
                raw[key] = value
        cfg = config_from_dict(raw)
        if self.problem_path is not None:
            cfg = replace(cfg, problem_path=self.problem_path)
        return cfg


def parse_config(path: str | os.PathLike[str]) -> ExperimentConfig:
    """Read and validate an experiment config, resolving ``K: "theoretical"``."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh, parse_float=Decimal)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {os.fspath(path)!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{os.fspath(path)}: invalid JSON: {exc}") from None
    return config_from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def config_from_dict(raw: Mapping[str, Any], base_dir: str | None = None) -> ExperimentConfig:
    if not isinstance(raw, Mapping):
        raise ConfigurationError("config must be a JSON object")
    unknown = set(raw) - _KNOWN_FIELDS
    if unknown:
        raise ConfigurationError(f"unknown config field(s): {sorted(unknown)}")

    problem_path = None
    if "problem" not in raw:
        raise ConfigurationError("config: missing field 'problem'")
    if isinstance(raw["problem"], str):
        problem_path = raw["problem"]
        full = problem_path
        if base_dir is not None and not os.path.isabs(full):
            full = os.path.join(base_dir, full)
        problem = load_problem(full)
    else:
        problem = problem_from_dict(raw["problem"])

    delta = _fraction_field(raw, "delta", Fraction(1, 2))
    if not 0 < delta < 1:
        raise ConfigurationError(f"delta: must lie in (0, 1), got {_num(delta)}")

    monitoring = raw.get("monitoring", "perfect")
    if monitoring not in MONITORING:
        raise ConfigurationError(f"monitoring: must be one of {list(MONITORING)}, got {monitoring!r}")

    agent = _object_field(raw, "agent")
    if agent.get("kind") not in AGENT_KINDS:
        raise ConfigurationError(f"agent.kind: must be one of {list(AGENT_KINDS)}, got {agent.get('kind')!r}")
    for key in ("delta", "delta_initial"):
        if key in agent:
            d = _fraction_value(agent[key], f"agent.{key}")
            if not 0 < d < 1:
                raise ConfigurationError(f"agent.{key}: must lie in (0, 1), got {_num(d)}")
            agent[key] = _num(d)
    if monitoring not in agent_feedback(agent):
        raise ConfigurationError(
            f"agent.kind {agent['kind']!r} cannot run under {monitoring} monitoring"
        )

    nature = _object_field(raw, "nature")
    if nature.get("kind") not in NATURE_KINDS:
        raise ConfigurationError(f"nature.kind: must be one of {list(NATURE_KINDS)}, got {nature.get('kind')!r}")

    horizon = _int_field(raw, "horizon", 1000, minimum=1)
    replications = _int_field(raw, "replications", 1, minimum=1)
    jobs = _int_field(raw, "jobs", 1, minimum=1)

    K = None
    k_theoretical = False
    if "K" in raw:
        if raw["K"] == "theoretical":
            K = theoretical_k(delta, problem.n)
            k_theoretical = True
        else:
            K = _int_field(raw, "K", None, minimum=1)
        if K > horizon:
            raise ConfigurationError(f"K: resolved to {K}, which exceeds horizon = {horizon}")

    seed = raw.get("master_seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigurationError("master_seed: must be a non-negative integer")

    level = raw.get("confidence_level", 0.95)
    if isinstance(level, bool) or not isinstance(level, (int, float, Decimal)) or not 0 < level < 1:
        raise ConfigurationError(f"confidence_level: must lie in (0, 1), got {level!r}")

    outputs = raw.get("outputs", {})
    if not isinstance(outputs, Mapping) or not all(isinstance(v, str) for v in outputs.values()):
        raise ConfigurationError("outputs: must map 'trace'/'report' to path strings")
    bad = set(outputs) - {"trace", "report"}
    if bad:
        raise ConfigurationError(f"outputs: unknown key(s) {sorted(bad)}")

    return ExperimentConfig(
        problem=problem,
        agent=agent,
        nature=nature,
        monitoring=monitoring,
        delta=delta,
        K=K,
        k_theoretical=k_theoretical,
        horizon=horizon,
        replications=replications,
        master_seed=seed,
        confidence_level=float(level),
        jobs=jobs,
        outputs=dict(outputs),
        problem_path=problem_path,
    )


def resolved_agent(config: ExperimentConfig) -> dict[str, Any]:
    """Agent config with the experiment delta filled in where the agent takes one."""
    agent = dict(config.agent)
    if agent["kind"] in ("cr_explorer", "greedy_deterministic", "cr_explorer_blind"):
        agent.setdefault("delta", _num(config.delta))
    elif agent["kind"] == "composer":
        agent.setdefault("delta_initial", _num(config.delta))
    return agent


def output_path(config: ExperimentConfig, key: str, default_name: str) -> str:
    """Configured output path, else ``default_name`` in $NONBAYES_OUTPUT_DIR (or cwd)."""
    if key in config.outputs:
        return config.outputs[key]
    return os.path.join(os.environ.get(OUTPUT_DIR_ENV, "."), default_name)


def _object_field(raw: Mapping[str, Any], name: str) -> dict[str, Any]:
    value = raw.get(name)
    if not isinstance(value, Mapping):
        raise ConfigurationError(f"{name}: must be an object with a 'kind'")
    return {k: (_num(Fraction(v)) if isinstance(v, Decimal) else v) for k, v in value.items()}


def _int_field(raw: Mapping[str, Any], name: str, default, minimum: int) -> int:
    value = raw.get(name, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{name}: must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigurationError(f"{name}: must be >= {minimum}, got {value}")
    return value


def _fraction_field(raw: Mapping[str, Any], name: str, default: Fraction) -> Fraction:
    if name not in raw:
        return default
    return _fraction_value(raw[name], name)


def _fraction_value(value: Any, name: str) -> Fraction:
    try:
        return to_fraction(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name}: not a number: {value!r}") from None


def _jsonable(d: Mapping[str, Any]) -> dict[str, Any]:
    return {k: (_num(v) if isinstance(v, Fraction) else v) for k, v in d.items()}
