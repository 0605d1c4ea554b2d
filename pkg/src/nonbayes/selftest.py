"""Quick built-in invariant checks behind ``nonbayes selftest``."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Callable

from nonbayes.agents import (
    CRExplorer,
    SafetyLearner,
    empirical_ratio_matrix,
    temporarily_good_set,
    theoretical_k,
)
from nonbayes.engine import example1_demo, replication_streams, run_episode
from nonbayes.nature import StationaryNature
from nonbayes.problem import (
    CriterionResult,
    DecisionProblem,
    competitive_ratio,
    example1_problems,
    example2_problems,
    safety_level,
)


def _cr_example1() -> bool:
    d1, d2 = example1_problems()
    return (
        competitive_ratio(d1) == CriterionResult(Fraction(5), (1,))
        and competitive_ratio(d2).value == 10
        and competitive_ratio(d2).optimal_actions == (0,)
    )


def _cr_example2() -> bool:
    d1, d2 = example2_problems()
    return competitive_ratio(d1).optimal_actions == (0,) and competitive_ratio(d2).value == 10


def _k_bound() -> bool:
    return theoretical_k("0.5", 2) == 3906 and theoretical_k("0.2", 2) == 33198


def _safety_learner_fuzz(cases: int = 300) -> bool:
    rng = random.Random(12345)
    for _ in range(cases):
        na, ns = rng.randint(1, 5), rng.randint(1, 5)
        p = DecisionProblem.from_rows([[rng.randint(1, 6) for _ in range(ns)] for _ in range(na)])
        v = safety_level(p).value
        learner = SafetyLearner(na)
        bad = 0
        for _ in range(rng.randint(1, 60)):
            a = learner.act()
            s = rng.randrange(ns)
            u = p.payoffs[a][s]
            bad += u < v
            learner.observe(a, u)
        if bad > na - 1:
            return False
    return True


def _good_set_converges() -> bool:
    d1, _ = example1_problems()
    agent = CRExplorer(2, 2, "0.5")
    run_episode(d1, agent, StationaryNature(2, [0, 1]), "perfect", 400, replication_streams(7, 0))
    if agent.state.knowledge.known_count() != 4:
        return False
    return temporarily_good_set(empirical_ratio_matrix(agent.state.knowledge)) == competitive_ratio(d1).optimal_actions


def _example1_identity() -> bool:
    rep = example1_demo(lambda p: CRExplorer(2, 2, "0.2", greedy=True), 2000, 0)
    return rep.identity_holds and rep.min_fraction <= 0.5


CHECKS: list[tuple[str, Callable[[], bool]]] = [
    ("competitive ratio of the 2x2 pair", _cr_example1),
    ("competitive ratio of the 2x3 pair", _cr_example2),
    ("theoretical K spot values", _k_bound),
    ("safety learner sub-safety count <= n_A - 1", _safety_learner_fuzz),
    ("good set converges to CR actions", _good_set_converges),
    ("mirror identity N1 + N2 = T", _example1_identity),
]


def run_selftest() -> bool:
    ok_all = True
    for name, check in CHECKS:
        ok = bool(check())
        ok_all &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return ok_all
