"""Acceptance suite: one test per criterion, each printing a single verdict line.

The lines are also collected and repeated in pytest's terminal summary.
"""

from __future__ import annotations

import json
import os
import random
import sys
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import partial

import pytest

from nonbayes.agents import CRExplorer, SafetyLearner, theoretical_k
from nonbayes.cli import main
from nonbayes.engine import (
    estimate_delta_optimality,
    example1_demo,
    example2_demo,
    replication_streams,
    run_episode,
)
from nonbayes.nature import StationaryNature, UniformNature
from nonbayes.problem import DecisionProblem, competitive_ratio, example1_problems, safety_level

D1, D2 = example1_problems()
JOBS = min(4, os.cpu_count() or 1)
VERDICTS: list[str] = []


def verdict(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS.append(line)
    print("\n" + line)


# 1 -----------------------------------------------------------------------------

def test_criterion_1_exact_competitive_ratio():
    r1, r2 = competitive_ratio(D1), competitive_ratio(D2)
    ok = (r1.value, r1.optimal_actions, r2.value, r2.optimal_actions) == (Fraction(5), (1,), Fraction(10), (0,))
    verdict(1, ok, f"CR(D1) = {r1.value} at {r1.optimal_actions}, CR(D2) = {r2.value} at {r2.optimal_actions}")
    assert ok


# 2 -----------------------------------------------------------------------------

def _random_problem(rng: random.Random) -> DecisionProblem:
    na, ns = rng.randint(1, 6), rng.randint(1, 6)
    # small integer grids make ties common; fractional grids exercise exactness
    if rng.random() < 0.5:
        cell = lambda: Fraction(rng.randint(1, 4))
    else:
        cell = lambda: Fraction(rng.randint(1, 60), rng.randint(1, 12))
    return DecisionProblem.from_rows([[cell() for _ in range(ns)] for _ in range(na)])


def _sub_safety_stages(problem: DecisionProblem, rng: random.Random, horizon: int, mode: str) -> int:
    v = safety_level(problem).value
    learner = SafetyLearner(problem.action_count)
    pattern = [rng.randrange(problem.state_count) for _ in range(rng.randint(1, 5))]
    bad = 0
    for t in range(horizon):
        a = learner.act()
        if mode == "adaptive":
            # Nature sees the imminent action and hits its worst column
            row = problem.payoffs[a]
            s = min(range(problem.state_count), key=row.__getitem__)
        elif mode == "pattern":
            s = pattern[t % len(pattern)]
        else:
            s = rng.randrange(problem.state_count)
        u = problem.payoffs[a][s]
        bad += u < v
        learner.observe(a, u)
    return bad


def test_criterion_2_safety_learner_guarantee():
    rng = random.Random(20240501)
    cases = 10_000
    worst_excess = None
    failures = 0
    for i in range(cases):
        p = _random_problem(rng)
        horizon = rng.randint(1, 500)
        mode = ("adaptive", "pattern", "random")[i % 3]
        bad = _sub_safety_stages(p, rng, horizon, mode)
        excess = bad - (p.action_count - 1)
        worst_excess = excess if worst_excess is None else max(worst_excess, excess)
        failures += excess > 0
    ok = failures == 0
    verdict(2, ok, f"{cases} fuzzed cases, {failures} with more than n_A - 1 sub-safety stages "
                   f"(max excess {worst_excess})")
    assert ok


# 3 -----------------------------------------------------------------------------

ADVERSARIES = {
    "constant s1": {"kind": "stationary", "pattern": [0]},
    "alternating": {"kind": "stationary", "pattern": [0, 1]},
    "seeded random": {"kind": "stationary", "seed": 314159},
    "uniform": {"kind": "uniform"},
}


def _nature(cfg: dict, problem: DecisionProblem):
    if cfg["kind"] == "uniform":
        return UniformNature(problem.state_count)
    return StationaryNature(problem.state_count, cfg.get("pattern"), cfg.get("seed"))


def _explorer(problem: DecisionProblem) -> CRExplorer:
    return CRExplorer(problem.action_count, problem.state_count, "0.5")


@pytest.mark.slow
@pytest.mark.parametrize("name", list(ADVERSARIES))
def test_criterion_3_empirical_delta_optimality(name):
    K = theoretical_k("0.5", D1.n)
    report = estimate_delta_optimality(
        D1, _explorer, partial(_nature, ADVERSARIES[name]), "0.5", K, 8000, 400, 1,
        0.95, monitoring="perfect", jobs=JOBS,
    )
    lo, _ = report.confidence_interval
    ok = K == 3906 and report.probability_estimate >= 0.5 and lo >= 0.5
    verdict(3, ok, f"[{name}] K = {K}, estimate {report.probability_estimate:.4f}, "
                   f"95% CI lower bound {lo:.4f} (need >= 0.5)")
    assert ok


# 4 -----------------------------------------------------------------------------

def test_criterion_4_example1_impossibility():
    greedy = lambda p: CRExplorer(2, 2, "0.2", greedy=True)
    report = example1_demo(greedy, 10_000, 0, {"kind": "greedy_deterministic", "delta": "0.2"})
    ok = report.identity_holds and report.min_fraction <= 0.5 < 1 - 0.2
    verdict(4, ok, f"N1 + N2 = T at every stage: {report.identity_holds}; "
                   f"min(N1, N2)/T = {report.min_fraction:.4f} (need <= 0.5 < 0.8)")
    assert ok


# 5 -----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_5_example2_impossibility():
    report = example2_demo(100, 20, 4, "0.05", horizon=30_000, replications=50, seed=11)
    worst = max(r.min_f for r in report.rows)
    ok = len(report.rows) == 5 and all(r.min_f <= 0.75 + 0.02 for r in report.rows)
    detail = ", ".join(f"{r.agent['kind']}{r.agent.get('action', '')} {r.min_f:.4f}" for r in report.rows)
    verdict(5, ok, f"min(f1, f2) per agent: {detail}; worst {worst:.4f} (need <= 0.77)")
    assert ok


# 6 -----------------------------------------------------------------------------

def test_criterion_6_exploration_rate():
    T = 100_000
    trace = run_episode(D1, CRExplorer(2, 2, "0.5"), UniformNature(2), "perfect", T, replication_streams(6, 0))
    freq = trace.coins.count(0) / T
    ok = abs(freq - 1 / 16) <= 0.005
    verdict(6, ok, f"coin-zero frequency {freq:.5f} over {T} stages (target 0.0625 +/- 0.005)")
    assert ok


# 7 -----------------------------------------------------------------------------

def _k_reference(delta: str, n: int) -> int:
    """Decimal evaluation of the K bound, written apart from the library's mpmath code."""
    with localcontext() as ctx:
        ctx.prec = 60
        d, n = Decimal(delta), Decimal(n)
        alpha1 = 128 / d**2 * (256 / d**3).ln()
        explore = Decimal(8) / d
        alpha2 = (n**2 * (n * explore + 1) * (2 * n**2 / d).ln() + 1) / (3 * d / 4)
        return int((max(alpha1, alpha2) + 2).to_integral_value(rounding="ROUND_CEILING"))


def test_criterion_7_theoretical_k_oracle():
    grid = [(d, n) for d in ("0.5", "0.2", "0.1") for n in (2, 3, 5)]
    got = {(d, n): theoretical_k(d, n) for d, n in grid}
    want = {(d, n): _k_reference(d, n) for d, n in grid}
    mismatches = [k for k in grid if got[k] != want[k]]
    ok = not mismatches and got[("0.5", 2)] == 3906
    verdict(7, ok, f"{len(grid) - len(mismatches)}/{len(grid)} grid points agree; K(0.5, 2) = {got[('0.5', 2)]}")
    assert ok


# 8 -----------------------------------------------------------------------------

def test_criterion_8_reproducibility(tmp_path, capsys):
    trace, report = tmp_path / "trace.csv", tmp_path / "report.json"
    config = {
        "problem": {"payoffs": [[1, 10], [30, 2]], "label": "D1"},
        "agent": {"kind": "cr_explorer"},
        "nature": {"kind": "uniform"},
        "delta": 0.5, "K": 200, "horizon": 2000, "replications": 30, "master_seed": 2718,
        "outputs": {"trace": str(trace), "report": str(report)},
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(config))
    runs = []
    for _ in range(2):
        assert main(["estimate", "--config", str(path)]) == 0
        data = json.loads(report.read_text())
        data.pop("wall_time")
        runs.append((trace.read_bytes(), data))
    capsys.readouterr()
    (csv_a, rep_a), (csv_b, rep_b) = runs
    ok = csv_a == csv_b and rep_a == rep_b
    verdict(8, ok, f"trace CSV byte-identical: {csv_a == csv_b}; report fields identical: {rep_a == rep_b}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-s", "-q"]))
