"""Episode runner, success statistics and Monte Carlo estimation."""

from __future__ import annotations

import csv
import math
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from nonbayes.agents import IMPERFECT, PERFECT
from nonbayes.errors import ConfigurationError, ContractError
from nonbayes.problem import DecisionProblem, fraction_text, to_fraction

MONITORING = (PERFECT, IMPERFECT)

TRUNCATION_NOTE = (
    "estimate checks N_T >= (1 - delta) T only for K <= T <= horizon; "
    "it is a finite-horizon proxy for the event over all T >= K"
)
SEED_DERIVATION = (
    "numpy SeedSequence(master_seed, spawn_key=(replication,)).spawn(2) -> "
    "(agent, nature) streams, each seeding random.Random"
)


def replication_streams(master_seed: int, replication: int) -> tuple[random.Random, random.Random]:
    """Independent (agent, nature) generators for one replication.

    Derived by counter from the master seed, so replication ``r`` gets the same
    streams no matter how many replications run or in which order.
    """
    root = np.random.SeedSequence(master_seed, spawn_key=(replication,))
    agent_ss, nature_ss = root.spawn(2)
    return _to_random(agent_ss), _to_random(nature_ss)


def _to_random(ss: np.random.SeedSequence) -> random.Random:
    words = ss.generate_state(4, dtype=np.uint64)
    return random.Random(int.from_bytes(words.tobytes(), "little"))


@dataclass(frozen=True)
class StageRecord:
    t: int
    action: int
    state: int
    payoff: Fraction
    coin: int | None
    success: bool
    cumulative_successes: int


@dataclass
class Trace:
    """Episode history stored column-wise; ``records`` materializes rows."""

    problem: DecisionProblem
    monitoring: str
    actions: list[int] = field(default_factory=list)
    states: list[int] = field(default_factory=list)
    payoffs: list[Fraction] = field(default_factory=list)
    coins: list[int | None] = field(default_factory=list)
    successes: list[bool] = field(default_factory=list)
    cumulative: list[int] = field(default_factory=list)
    agent_config: dict[str, Any] | None = None
    nature_config: dict[str, Any] | None = None
    seeds: dict[str, Any] | None = None

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def problem_label(self) -> str:
        return self.problem.label

    @property
    def records(self) -> list[StageRecord]:
        return [
            StageRecord(t + 1, a, s, u, z, x, n)
            for t, (a, s, u, z, x, n) in enumerate(
                zip(self.actions, self.states, self.payoffs, self.coins, self.successes, self.cumulative)
            )
        ]

    def write_csv(self, path: str | os.PathLike[str]) -> None:
        try:
            fh = open(path, "w", newline="", encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write trace to {os.fspath(path)!r}: {exc.strerror}") from exc
        names_a, names_s = self.problem.action_names, self.problem.state_names
        with fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "action", "state", "payoff", "coin", "success", "N_t"])
            for r in self.records:
                w.writerow([
                    r.t,
                    names_a[r.action],
                    names_s[r.state],
                    _fmt(r.payoff),
                    "n/a" if r.coin is None else r.coin,
                    int(r.success),
                    r.cumulative_successes,
                ])


def _fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else str(x)


def check_compatible(agent, nature, monitoring: str) -> None:
    if monitoring not in MONITORING:
        raise ConfigurationError(f"monitoring must be one of {list(MONITORING)}, got {monitoring!r}")
    if monitoring not in agent.feedback:
        raise ConfigurationError(
            f"agent {type(agent).__name__} cannot run under {monitoring} monitoring "
            f"(supports {sorted(agent.feedback)})"
        )
    if getattr(nature, "requires_pure_agent", False) and not agent.pure:
        raise ContractError(
            f"{nature.kind} nature is only defined against pure agents; "
            f"{type(agent).__name__} randomizes"
        )


def run_episode(
    problem: DecisionProblem,
    agent,
    nature,
    monitoring: str,
    horizon: int,
    rngs: tuple[random.Random, random.Random],
    *,
    agent_config: dict | None = None,
    nature_config: dict | None = None,
    seeds: dict | None = None,
) -> Trace:
    """Play ``horizon`` stages; success flags use the engine's exact CR."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    check_compatible(agent, nature, monitoring)
    agent_rng, nature_rng = rngs
    trace = Trace(problem, monitoring, agent_config=agent_config, nature_config=nature_config, seeds=seeds)
    payoff_rows = problem.payoffs
    good = problem.success_table
    reveal = monitoring == PERFECT
    act, observe = agent.act, agent.observe
    choose, tell_nature = nature.choose, nature.observe
    actions, states, payoffs = trace.actions, trace.states, trace.payoffs
    coins, successes, cumulative = trace.coins, trace.successes, trace.cumulative
    n = 0
    for _ in range(horizon):
        a = act(agent_rng)
        # The agent has committed before Nature moves; only a peeking
        # adversary reads the probe.
        s = choose(nature_rng, lambda: a)
        u = payoff_rows[a][s]
        x = good[a][s]
        n += x
        actions.append(a)
        states.append(s)
        payoffs.append(u)
        coins.append(agent.last_coin)
        successes.append(x)
        cumulative.append(n)
        observe(a, u, s if reveal else None)
        tell_nature(a, s)
    return trace


def safety_count(trace: Trace | Iterable[Fraction], v) -> int:
    """Number of stages whose payoff is at least ``v``."""
    payoffs = trace.payoffs if isinstance(trace, Trace) else trace
    v = to_fraction(v)
    return sum(1 for u in payoffs if u >= v)


def holds_from(cumulative: Sequence[int], delta, K: int) -> bool:
    """True iff N_T >= (1 - delta) T for every K <= T <= len(cumulative)."""
    d = to_fraction(delta)
    num, den = d.denominator - d.numerator, d.denominator
    for t in range(K, len(cumulative) + 1):
        if cumulative[t - 1] * den < num * t:
            return False
    return True


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval."""
    if not 0 < level < 1:
        raise ValueError("confidence level must lie in (0, 1)")
    alpha = 1 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def curve_points(horizon: int, K: int | None = None, count: int = 20) -> list[int]:
    pts = {max(1, round(horizon ** (i / (count - 1)))) for i in range(count)}
    if K is not None:
        pts.add(K)
    pts.add(horizon)
    return sorted(p for p in pts if p <= horizon)


@dataclass
class ExperimentReport:
    replications: int
    success_count: int
    probability_estimate: float
    confidence_interval: tuple[float, float]
    confidence_level: float
    delta: str
    threshold: float
    K: int
    horizon: int
    per_T_fraction_curve: list[dict[str, float]]
    problem_label: str
    master_seed: int
    config: dict[str, Any]
    seed_derivation: str = SEED_DERIVATION
    truncated_horizon: bool = True
    truncation_note: str = TRUNCATION_NOTE
    wall_time: float = 0.0
    sample_trace: Trace | None = field(default=None, repr=False, compare=False)

    @property
    def passes(self) -> bool:
        return self.probability_estimate >= self.threshold

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d.pop("sample_trace")
        d["confidence_interval"] = list(self.confidence_interval)
        return d

    def comparable(self) -> dict[str, Any]:
        """Report fields that must be reproducible (everything but wall time)."""
        d = self.to_dict()
        d.pop("wall_time")
        return d


def _replicate(
    problem: DecisionProblem,
    agent_factory: Callable,
    nature_factory: Callable,
    monitoring: str,
    delta,
    K: int,
    horizon: int,
    master_seed: int,
    reps: Sequence[int],
    points: Sequence[int],
    keep_first: bool,
) -> list[tuple[int, bool, list[int], Trace | None]]:
    out = []
    for r in reps:
        rngs = replication_streams(master_seed, r)
        trace = run_episode(
            problem,
            agent_factory(problem),
            nature_factory(problem),
            monitoring,
            horizon,
            rngs,
            seeds={"master_seed": master_seed, "replication": r},
        )
        ok = holds_from(trace.cumulative, delta, K)
        sampled = [trace.cumulative[t - 1] for t in points]
        out.append((r, ok, sampled, trace if keep_first and r == 0 else None))
    return out


def estimate_delta_optimality(
    problem: DecisionProblem,
    agent_factory: Callable[[DecisionProblem], Any],
    nature_factory: Callable[[DecisionProblem], Any],
    delta,
    K: int,
    horizon: int,
    replications: int,
    master_seed: int,
    confidence_level: float = 0.95,
    *,
    monitoring: str = PERFECT,
    jobs: int = 1,
    config: dict[str, Any] | None = None,
    keep_trace: bool = False,
) -> ExperimentReport:
    """Monte Carlo estimate of P(N_T >= (1 - delta) T for all K <= T <= horizon).

    Factories must be picklable when ``jobs > 1``.  Results do not depend on
    ``jobs``.
    """
    d = to_fraction(delta)
    if not 0 < d < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if K < 1 or horizon < 1:
        raise ValueError("K and horizon must be >= 1")
    if K > horizon:
        raise ValueError(f"K = {K} exceeds horizon = {horizon}")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    start = time.perf_counter()
    points = curve_points(horizon, K)
    reps = list(range(replications))
    args = (problem, agent_factory, nature_factory, monitoring, d, K, horizon, master_seed)
    if jobs > 1 and replications > 1:
        chunks = [reps[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_replicate, *args, c, points, keep_trace) for c in chunks if c]
            results = [row for f in futures for row in f.result()]
    else:
        results = _replicate(*args, reps, points, keep_trace)
    results.sort(key=lambda row: row[0])

    successes = sum(ok for _, ok, _, _ in results)
    curve = []
    for i, t in enumerate(points):
        fr = [sampled[i] / t for _, _, sampled, _ in results]
        curve.append({"T": t, "mean_fraction": sum(fr) / len(fr), "min_fraction": min(fr)})
    sample = next((tr for *_, tr in results if tr is not None), None)
    return ExperimentReport(
        replications=replications,
        success_count=successes,
        probability_estimate=successes / replications,
        confidence_interval=clopper_pearson(successes, replications, confidence_level),
        confidence_level=confidence_level,
        delta=fraction_text(d),
        threshold=float(1 - d),
        K=K,
        horizon=horizon,
        per_T_fraction_curve=curve,
        problem_label=problem.label,
        master_seed=master_seed,
        config=dict(config or {}),
        wall_time=time.perf_counter() - start,
        sample_trace=sample,
    )


# ---------------------------------------------------------------------------
# Reproductions of the two impossibility examples


@dataclass
class Example1Row:
    played_on: str
    fraction_d1: float
    fraction_d2: float
    min_fraction: float
    identity_holds: bool
    peak_min_fraction: float


@dataclass
class Example1Report:
    horizon: int
    seed: int
    agent: dict[str, Any]
    rows: list[Example1Row]

    @property
    def identity_holds(self) -> bool:
        return all(r.identity_holds for r in self.rows)

    @property
    def min_fraction(self) -> float:
        return max(r.min_fraction for r in self.rows)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["identity_holds"] = self.identity_holds
        return d


def example1_demo(agent_factory: Callable[[DecisionProblem], Any], horizon: int, seed: int, agent_config: dict | None = None) -> Example1Report:
    """Pure agent vs the mirror adversary on both 2x2 problems.

    One play sequence is generated per base problem and scored under both
    payoff matrices.  Under the mirror adversary play is always (a1, s1) or
    (a2, s2), each of which attains the CR in exactly one of the two
    problems, so N_T(D1) + N_T(D2) = T.
    """
    from nonbayes.nature import MirrorNature
    from nonbayes.problem import example1_problems

    d1, d2 = example1_problems()
    rows = []
    for base in (d1, d2):
        agent = agent_factory(base)
        if not agent.pure:
            raise ContractError("the mirror demo is defined for pure agents only")
        trace = run_episode(base, agent, MirrorNature(2, 2), PERFECT, horizon, replication_streams(seed, 0))
        n1 = n2 = 0
        identity = True
        peak = 0.0
        for t, (a, s) in enumerate(zip(trace.actions, trace.states), start=1):
            n1 += d1.success_table[a][s]
            n2 += d2.success_table[a][s]
            identity &= n1 + n2 == t
            peak = max(peak, min(n1, n2) / t)
        rows.append(Example1Row(
            played_on=base.label,
            fraction_d1=n1 / horizon,
            fraction_d2=n2 / horizon,
            min_fraction=min(n1, n2) / horizon,
            identity_holds=identity,
            peak_min_fraction=peak,
        ))
    return Example1Report(horizon, seed, dict(agent_config or {}), rows)


# 0-based image of the permutation 1 -> 3, 2 -> 1, 3 -> 2 relating the
# second rows of the two imperfect-monitoring demo problems.
EXAMPLE2_PI = (2, 0, 1)


class _PermutedReplay:
    """Replays recorded states, permuted whenever the agent is about to play a2.

    Given an agent action the map is a bijection of states, so the replayed
    sequence is still uniform and independent of the agent's choices.
    """

    kind = "permuted_replay"
    requires_pure_agent = False

    def __init__(self, states: Sequence[int]) -> None:
        self.states = states
        self.t = 0

    def choose(self, rng, probe):
        s = self.states[self.t]
        self.t += 1
        return EXAMPLE2_PI[s] if probe() == 1 else s

    def observe(self, action: int, state: int) -> None:
        pass


@dataclass
class Example2Row:
    agent: dict[str, Any]
    f1: float
    f2: float
    min_f: float
    p1_d1: float
    p1_d2: float
    frequency_gap: float
    frequency_tolerance: float
    coupled_sequences_equal: bool
    holds: bool


@dataclass
class Example2Report:
    a: str
    b: str
    c: str
    delta: str
    horizon: int
    replications: int
    seed: int
    ceiling: float
    tolerance: float
    cr1: str
    cr2: str
    rows: list[Example2Row]

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.rows)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["holds"] = self.holds
        return d


EXAMPLE2_AGENTS = (
    {"kind": "cr_explorer_blind", "delta": "0.05"},
    {"kind": "fixed", "action": 0},
    {"kind": "fixed", "action": 1},
    {"kind": "safety_learner"},
    {"kind": "uniform_random"},
)


def example2_demo(
    a=100,
    b=20,
    c=4,
    delta="0.05",
    horizon: int = 30000,
    replications: int = 50,
    seed: int = 0,
    agents: Sequence[dict] = EXAMPLE2_AGENTS,
    tolerance: float = 0.02,
) -> Example2Report:
    """Imperfect monitoring vs uniform Nature on both 2x3 problems.

    For each agent, ``f_i`` is the mean over replications of N_T / T at the
    horizon on problem i.  If a1 is played with long-run frequency p, then
    f1 ~ p and f2 ~ 1 - p/3, so min(f1, f2) <= 3/4.
    """
    from nonbayes.agents import make_agent
    from nonbayes.nature import UniformNature
    from nonbayes.problem import competitive_ratio, example2_problems

    d1, d2 = example2_problems(a, b, c)
    delta = to_fraction(delta)
    rows = []
    for cfg in agents:
        cfg = dict(cfg)
        if cfg.get("kind") in ("cr_explorer_blind",):
            cfg.setdefault("delta", fraction_text(to_fraction(delta)))
        f = {1: [], 2: []}
        p1 = {1: [], 2: []}
        coupled = True
        for r in range(replications):
            for i, prob in ((1, d1), (2, d2)):
                agent = make_agent(cfg, 2, 3)
                tr = run_episode(prob, agent, UniformNature(3), IMPERFECT, horizon, replication_streams(seed, r))
                f[i].append(tr.cumulative[-1] / horizon)
                p1[i].append(tr.actions.count(0) / horizon)
                if i == 1:
                    d1_trace = tr
            # Pathwise coupling: replay D1's states on D2, permuted on a2 stages.
            agent_rng, _ = replication_streams(seed, r)
            tr2 = run_episode(d2, make_agent(cfg, 2, 3), _PermutedReplay(d1_trace.states), IMPERFECT, horizon, (agent_rng, None))
            coupled &= tr2.actions == d1_trace.actions and tr2.payoffs == d1_trace.payoffs
        f1, f2 = _mean(f[1]), _mean(f[2])
        m1, m2 = _mean(p1[1]), _mean(p1[2])
        gap = abs(m1 - m2)
        se = math.sqrt(_var(p1[1]) / replications + _var(p1[2]) / replications)
        tol = 5 * se + 1e-12
        rows.append(Example2Row(
            agent=cfg,
            f1=f1,
            f2=f2,
            min_f=min(f1, f2),
            p1_d1=m1,
            p1_d2=m2,
            frequency_gap=gap,
            frequency_tolerance=tol,
            coupled_sequences_equal=coupled,
            holds=min(f1, f2) <= 0.75 + tolerance and coupled and gap <= tol,
        ))
    return Example2Report(
        a=fraction_text(to_fraction(a)),
        b=fraction_text(to_fraction(b)),
        c=fraction_text(to_fraction(c)),
        delta=fraction_text(to_fraction(delta)),
        horizon=horizon,
        replications=replications,
        seed=seed,
        ceiling=0.75,
        tolerance=tolerance,
        cr1=str(competitive_ratio(d1).value),
        cr2=str(competitive_ratio(d2).value),
        rows=rows,
    )


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def _var(xs: Sequence[float]) -> float:
    if len(xs) < 2:
        return 0.0
    m = _mean(xs)
    return sum((x - m) ** 2 for x in xs) / (len(xs) - 1)


__all__ = [
    "ExperimentReport",
    "StageRecord",
    "Trace",
    "clopper_pearson",
    "estimate_delta_optimality",
    "example1_demo",
    "example2_demo",
    "holds_from",
    "replication_streams",
    "run_episode",
    "safety_count",
]
