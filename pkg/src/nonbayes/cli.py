"""Command-line front end.

Exit codes:
    0  success
    1  a demo or selftest check failed
    2  usage error (unknown command, bad flags)
    3  configuration / validation error
    4  contract error (strategy used outside its domain)
    5  integrity error (observations contradict the model)
    6  I/O error
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
from functools import partial
from typing import Sequence

from nonbayes.agents import agent_is_pure, make_agent, theoretical_k
from nonbayes.config import (
    ExperimentConfig,
    output_path,
    parse_config,
    resolved_agent,
)
from nonbayes.engine import (
    ExperimentReport,
    estimate_delta_optimality,
    example1_demo,
    example2_demo,
    replication_streams,
    run_episode,
)
from nonbayes.errors import ConfigurationError, ContractError, IntegrityError
from nonbayes.nature import make_nature
from nonbayes.problem import DecisionProblem, competitive_ratio

log = logging.getLogger("nonbayes")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_CONTRACT = 4
EXIT_INTEGRITY = 5
EXIT_IO = 6


def build_agent(agent_config: dict, problem: DecisionProblem):
    return make_agent(agent_config, problem.action_count, problem.state_count, problem.action_index)


def build_nature(nature_config: dict, problem: DecisionProblem):
    return make_nature(nature_config, problem)


def ensure_seed(config: ExperimentConfig) -> ExperimentConfig:
    if config.master_seed is not None:
        return config
    seed = secrets.randbits(63)
    print(f"generated master seed: {seed}")
    config.master_seed = seed
    return config


def emit_report(report: ExperimentReport, path: str | os.PathLike[str]) -> str:
    """Write the report as JSON and print a short summary; returns the verdict line."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {os.fspath(path)!r}: {exc.strerror}") from exc
    lo, hi = report.confidence_interval
    verdict = "PASS (≥ 1 − δ)" if report.passes else f"FAIL (< {report.threshold:g})"
    print(f"problem        {report.problem_label}")
    print(f"delta / K / T  {report.delta} / {report.K} / {report.horizon}")
    print(f"replications   {report.replications} (master seed {report.master_seed})")
    print(f"estimate       {report.probability_estimate:.4f}  "
          f"[{lo:.4f}, {hi:.4f}] at {report.confidence_level:.0%}")
    print(f"note           {report.truncation_note}")
    print(verdict)
    print(f"report written to {os.fspath(path)}")
    return verdict


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load(args)
    config = ensure_seed(config)
    problem = config.problem
    agent_cfg = resolved_agent(config)
    trace = run_episode(
        problem,
        build_agent(agent_cfg, problem),
        build_nature(config.nature, problem),
        config.monitoring,
        config.horizon,
        replication_streams(config.master_seed, 0),
        agent_config=agent_cfg,
        nature_config=config.nature,
        seeds={"master_seed": config.master_seed, "replication": 0},
    )
    path = output_path(config, "trace", "trace.csv")
    trace.write_csv(path)
    cr = competitive_ratio(problem)
    n_t = trace.cumulative[-1]
    print(f"problem {problem.label}: CR = {cr.value}, CR actions = "
          f"{[problem.action_names[a] for a in cr.optimal_actions]}")
    print(f"T = {config.horizon}, N_T = {n_t}, N_T/T = {n_t / config.horizon:.4f} "
          f"(master seed {config.master_seed})")
    print(f"trace written to {path}")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    config = _load(args)
    if config.K is None:
        raise ConfigurationError("K: required for estimate (an integer or \"theoretical\")")
    config = ensure_seed(config)
    problem = config.problem
    agent_cfg = resolved_agent(config)
    echo = config.to_dict(resolved=True)
    echo["agent"] = agent_cfg
    report = estimate_delta_optimality(
        problem,
        partial(build_agent, agent_cfg),
        partial(build_nature, config.nature),
        config.delta,
        config.K,
        config.horizon,
        config.replications,
        config.master_seed,
        config.confidence_level,
        monitoring=config.monitoring,
        jobs=config.jobs,
        config=echo,
        keep_trace="trace" in config.outputs,
    )
    if report.sample_trace is not None:
        trace_path = config.outputs["trace"]
        report.sample_trace.write_csv(trace_path)
        print(f"trace of replication 0 written to {trace_path}")
    emit_report(report, output_path(config, "report", "report.json"))
    return EXIT_OK


def cmd_k_bound(args: argparse.Namespace) -> int:
    try:
        k = theoretical_k(args.delta, args.n)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    print(k)
    return EXIT_OK


def cmd_demo_example1(args: argparse.Namespace) -> int:
    agent_cfg = {"kind": args.agent}
    if args.agent == "fixed":
        agent_cfg["action"] = args.action
    if not agent_is_pure(agent_cfg):
        raise ContractError(f"agent {args.agent!r} randomizes; the mirror demo needs a pure agent")
    seed = args.seed if args.seed is not None else _fresh_seed()
    report = example1_demo(partial(build_agent, agent_cfg), args.horizon, seed, agent_cfg)
    print(f"pure agent {agent_cfg} vs mirror nature, T = {args.horizon}")
    print(f"{'played on':<14}{'N1/T':>10}{'N2/T':>10}{'min':>10}  identity N1+N2=T")
    for r in report.rows:
        print(f"{r.played_on:<14}{r.fraction_d1:>10.4f}{r.fraction_d2:>10.4f}"
              f"{r.min_fraction:>10.4f}  {'holds' if r.identity_holds else 'VIOLATED'}")
    ok = report.identity_holds and report.min_fraction <= 0.5
    print(f"min fraction {report.min_fraction:.4f} <= 0.5: {'yes' if ok else 'NO'}")
    _maybe_dump(args, report.to_dict())
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_demo_example2(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _fresh_seed()
    try:
        report = example2_demo(args.a, args.b, args.c, args.delta, args.horizon, args.replications, seed)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    print(f"a={report.a} b={report.b} c={report.c}; CR1 = {report.cr1}, CR2 = {report.cr2}; "
          f"T = {report.horizon}, R = {report.replications}, seed {report.seed}")
    print(f"{'agent':<34}{'f1':>8}{'f2':>8}{'min':>8}{'p1(D1)':>9}{'p1(D2)':>9}  coupled  verdict")
    for r in report.rows:
        name = ",".join(f"{k}={v}" for k, v in r.agent.items())
        print(f"{name:<34}{r.f1:>8.4f}{r.f2:>8.4f}{r.min_f:>8.4f}{r.p1_d1:>9.4f}{r.p1_d2:>9.4f}"
              f"  {'equal' if r.coupled_sequences_equal else 'DIFFER':<7}  "
              f"{'<= 3/4 + tol' if r.holds else 'VIOLATED'}")
    _maybe_dump(args, report.to_dict())
    return EXIT_OK if report.holds else EXIT_CHECK_FAILED


def cmd_selftest(args: argparse.Namespace) -> int:
    from nonbayes.selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_CHECK_FAILED


def _fresh_seed() -> int:
    seed = secrets.randbits(63)
    print(f"generated seed: {seed}")
    return seed


def _maybe_dump(args: argparse.Namespace, data: dict) -> None:
    if getattr(args, "output", None):
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                json.dump(data, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise OSError(f"cannot write {args.output!r}: {exc.strerror}") from exc


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = parse_config(args.config)
    return config.with_overrides(
        horizon=args.horizon,
        replications=getattr(args, "replications", None),
        master_seed=args.seed,
        delta=args.delta,
        K=_k_flag(getattr(args, "K", None)),
        jobs=getattr(args, "jobs", None),
        trace=args.trace,
        report=getattr(args, "report", None),
    )


def _k_flag(value: str | None):
    if value is None or value == "theoretical":
        return value
    try:
        return int(value)
    except ValueError:
        raise ConfigurationError(f"K: expected an integer or 'theoretical', got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nonbayes",
        description="Repeated games against Nature: simulate, estimate and reproduce the examples.",
        epilog="Command-line flags override the matching config-file fields.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def with_config(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--horizon", type=int)
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--delta")
        p.add_argument("--trace", help="trace CSV path")

    p = sub.add_parser("simulate", help="run one episode and write its trace CSV")
    with_config(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="Monte Carlo estimate of the delta-optimality event")
    with_config(p)
    p.add_argument("--replications", type=int)
    p.add_argument("--K", help="integer or 'theoretical'")
    p.add_argument("--jobs", type=int)
    p.add_argument("--report", help="report JSON path")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("k-bound", help="print the theoretical K for (delta, n)")
    p.add_argument("--delta", required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_k_bound)

    p = sub.add_parser("demo-example1", help="pure agent vs mirror nature on the 2x2 pair")
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--agent", default="greedy_deterministic",
                   choices=["greedy_deterministic", "safety_learner", "fixed", "cr_explorer", "uniform_random"])
    p.add_argument("--action", type=int, default=0, help="action index for --agent fixed")
    p.add_argument("--output", help="write the demo report as JSON")
    p.set_defaults(func=cmd_demo_example1)

    p = sub.add_parser("demo-example2", help="imperfect monitoring on the 2x3 pair")
    p.add_argument("--a", default="100")
    p.add_argument("--b", default="20")
    p.add_argument("--c", default="4")
    p.add_argument("--delta", default="0.05")
    p.add_argument("--horizon", type=int, default=30_000)
    p.add_argument("--replications", type=int, default=50)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="write the demo report as JSON")
    p.set_defaults(func=cmd_demo_example2)

    p = sub.add_parser("selftest", help="run the built-in invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractError as exc:
        print(f"contract error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
