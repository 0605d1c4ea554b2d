"""Agent-side strategies for the repeated game against Nature.

Every agent is a small stateful session with the same surface::

    action = agent.act(rng)          # choose before the state is revealed
    agent.observe(action, payoff, state_or_None)

``feedback`` lists the monitoring regimes an agent can run under and
``pure`` says whether ``act`` ignores its random stream.  Actions and states
are 0-based indices throughout.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath

from nonbayes.errors import ConfigurationError, IntegrityError
from nonbayes.problem import to_fraction

PERFECT = "perfect"
IMPERFECT = "imperfect"


class _Unknown:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "*"

    def __reduce__(self):
        return (_Unknown, ())


UNKNOWN = _Unknown()


@dataclass
class KnowledgeMatrix:
    """What the agent has seen of the payoff matrix; unseen cells are UNKNOWN."""

    entries: list[list[Fraction | _Unknown]]
    stage: int = 0

    @classmethod
    def blank(cls, n_actions: int, n_states: int) -> KnowledgeMatrix:
        return cls([[UNKNOWN] * n_states for _ in range(n_actions)])

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    def is_known(self, action: int, state: int) -> bool:
        return self.entries[action][state] is not UNKNOWN

    def known_count(self) -> int:
        return sum(x is not UNKNOWN for row in self.entries for x in row)

    def record(self, action: int, state: int, payoff: Fraction) -> bool:
        """Store an observed payoff; return True if the cell was new."""
        current = self.entries[action][state]
        if current is payoff:
            return False
        if current is UNKNOWN:
            if payoff <= 0:
                raise IntegrityError(f"observed non-positive payoff {payoff}")
            self.entries[action][state] = payoff
            return True
        if current != payoff:
            raise IntegrityError(
                f"cell (action {action}, state {state}) re-observed as {payoff}, "
                f"previously {current}: payoffs are not stationary"
            )
        return False


def empirical_ratio_matrix(knowledge: KnowledgeMatrix) -> tuple[tuple[Fraction, ...], ...]:
    """Ratios against the best *known* payoff in each column; unknown cells read 1."""
    n_actions, n_states = knowledge.shape
    col_best: list[Fraction | None] = []
    for s in range(n_states):
        seen = [row[s] for row in knowledge.entries if row[s] is not UNKNOWN]
        col_best.append(max(seen) if seen else None)
    one = Fraction(1)
    return tuple(
        tuple(
            one if row[s] is UNKNOWN else col_best[s] / row[s]
            for s in range(n_states)
        )
        for row in knowledge.entries
    )


def temporarily_good_set(ratios: Sequence[Sequence[Fraction]]) -> tuple[int, ...]:
    """All actions whose worst empirical ratio is minimal (ascending order)."""
    worst = [max(row) for row in ratios]
    best = min(worst)
    return tuple(a for a, w in enumerate(worst) if w == best)


@dataclass
class ExplorerState:
    knowledge: KnowledgeMatrix
    delta: Fraction
    good_set: tuple[int, ...] = ()
    stale: bool = True

    def __post_init__(self) -> None:
        self.delta = _check_delta(self.delta)
        self.explore_p = float(self.delta / 8)

    @classmethod
    def fresh(cls, n_actions: int, n_states: int, delta: float | Fraction | str) -> ExplorerState:
        d = _check_delta(delta)
        return cls(KnowledgeMatrix.blank(n_actions, n_states), d)

    @property
    def exploration_mass(self) -> Fraction:
        """Probability that a stage explores, 1/M with M = 8/delta."""
        return self.delta / 8

    @property
    def n_actions(self) -> int:
        return len(self.knowledge.entries)


def update_knowledge(state: ExplorerState, observation: tuple[int, int, Fraction]) -> ExplorerState:
    """Fold one perfect-monitoring observation (action, state, payoff) into ``state``."""
    action, s, payoff = observation
    if state.knowledge.record(action, s, to_fraction(payoff)):
        state.stale = True
    state.knowledge.stage += 1
    return state


def refresh_good_set(state: ExplorerState) -> tuple[int, ...]:
    # The good set is a function of the knowledge matrix alone, so it only
    # needs recomputing after a new cell has been learned.
    if state.stale:
        state.good_set = temporarily_good_set(empirical_ratio_matrix(state.knowledge))
        state.stale = False
    return state.good_set


def cr_explorer_step(state: ExplorerState, rng: random.Random) -> tuple[int, int]:
    """Flip the exploration coin and draw an action; returns ``(action, coin)``.

    coin = 1 (probability 1 - delta/8): uniform over the temporarily good set.
    coin = 0: uniform over all actions.
    """
    good = refresh_good_set(state)
    coin = 0 if rng.random() < state.explore_p else 1
    if coin:
        return good[rng.randrange(len(good))], 1
    return rng.randrange(state.n_actions), 0


def safety_learner_step(history: Sequence[tuple[int, Fraction]], n_actions: int) -> int:
    """Next action of the maxmin learner given (action, payoff) pairs so far.

    Plays every action once, then the action with the largest minimum observed
    payoff (lowest index on ties).
    """
    if len(history) < n_actions:
        return len(history)
    minima: list[Fraction | None] = [None] * n_actions
    for a, u in history:
        if minima[a] is None or u < minima[a]:
            minima[a] = u
    return _argmax_first(minima)


def _argmax_first(values: Sequence[Fraction | None]) -> int:
    best_a, best_v = 0, None
    for a, v in enumerate(values):
        if v is not None and (best_v is None or v > best_v):
            best_a, best_v = a, v
    return best_a


def _check_delta(delta: float | Fraction | str) -> Fraction:
    d = to_fraction(delta)
    if not 0 < d < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return d


def theoretical_k(delta: float | Fraction | str, n: int) -> int:
    """Stage count after which the explorer is guaranteed delta-optimal.

    ceil(max(alpha1 + 2, alpha2 + 2)) with
    alpha1 = 128/d^2 * ln(256/d^3) and
    alpha2 = (n^2 (n*8/d + 1) ln(2 n^2 / d) + 1) / (3d/4).
    """
    d = _check_delta(delta)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    with mpmath.workdps(60):
        dm = mpmath.mpf(d.numerator) / d.denominator
        alpha1 = 128 / dm**2 * mpmath.log(256 / dm**3)
        big_m = 8 / dm
        alpha2 = (n**2 * (n * big_m + 1) * mpmath.log(2 * n**2 / dm) + 1) / (mpmath.mpf(3) / 4 * dm)
        return int(mpmath.ceil(max(alpha1, alpha2) + 2))


@dataclass(frozen=True)
class ComposerSchedule:
    deltas: tuple[Fraction, ...]
    block_lengths: tuple[int, ...]

    @property
    def boundaries(self) -> tuple[int, ...]:
        """Last stage (1-based) of each block."""
        out, total = [], 0
        for k in self.block_lengths:
            total += k
            out.append(total)
        return tuple(out)

    def block_of(self, t: int) -> int:
        """0-based block index for 1-based stage ``t``; the last block runs on forever."""
        for m, end in enumerate(self.boundaries):
            if t <= end:
                return m
        return len(self.block_lengths) - 1


def composer_schedule(delta_initial: float | Fraction | str, horizon_blocks: int, n: int) -> ComposerSchedule:
    """Halving deltas and growing block lengths for the composed strategy.

    Block m uses delta_m = delta_initial * 2^(1-m) and runs an explorer with
    parameter delta_m / 2 for K_m stages, where K_m is at least that explorer's
    own bound and K_{m+1} >= 2 * (K_1 + ... + K_m) / delta_m.
    """
    d0 = _check_delta(delta_initial)
    if horizon_blocks < 1:
        raise ValueError("horizon_blocks must be >= 1")
    deltas: list[Fraction] = []
    lengths: list[int] = []
    prefix = 0
    for m in range(horizon_blocks):
        dm = d0 / 2**m
        k = theoretical_k(dm / 2, n)
        if m:
            k = max(k, math.ceil(2 * prefix / deltas[-1]))
        deltas.append(dm)
        lengths.append(k)
        prefix += k
    return ComposerSchedule(tuple(deltas), tuple(lengths))


class CRExplorer:
    """Explore with probability delta/8, otherwise play a temporarily good action.

    ``greedy=True`` forces the coin to 1 and picks the lowest-index good action,
    which makes the strategy pure.  ``learn=False`` never updates knowledge, so
    it can run under imperfect monitoring (and plays uniformly forever).
    """

    def __init__(
        self,
        n_actions: int,
        n_states: int,
        delta: float | Fraction | str = Fraction(1, 2),
        *,
        greedy: bool = False,
        learn: bool = True,
    ) -> None:
        self.state = ExplorerState.fresh(n_actions, n_states, delta)
        self.greedy = greedy
        self.learn = learn
        self.pure = greedy
        self.feedback = frozenset({PERFECT}) if learn else frozenset({IMPERFECT})
        self.last_coin: int | None = None

    def act(self, rng: random.Random) -> int:
        if self.greedy:
            self.last_coin = 1
            return refresh_good_set(self.state)[0]
        action, self.last_coin = cr_explorer_step(self.state, rng)
        return action

    def observe(self, action: int, payoff: Fraction, state: int | None = None) -> None:
        if not self.learn:
            self.state.knowledge.stage += 1
            return
        if state is None:
            raise ConfigurationError("the competitive-ratio explorer needs the state revealed")
        update_knowledge(self.state, (action, state, payoff))


class SafetyLearner:
    """Deterministic maxmin learner; needs payoffs only."""

    pure = True
    feedback = frozenset({PERFECT, IMPERFECT})

    def __init__(self, n_actions: int) -> None:
        self.n_actions = n_actions
        self.minima: list[Fraction | None] = [None] * n_actions
        self.t = 0
        self.last_coin: int | None = None

    def act(self, rng: random.Random | None = None) -> int:
        if self.t < self.n_actions:
            return self.t
        return _argmax_first(self.minima)

    def observe(self, action: int, payoff: Fraction, state: int | None = None) -> None:
        m = self.minima[action]
        if m is None or payoff < m:
            self.minima[action] = payoff
        self.t += 1


class Composer:
    """Chain fresh explorers over blocks of growing length and shrinking delta."""

    pure = False
    feedback = frozenset({PERFECT})

    def __init__(
        self,
        n_actions: int,
        n_states: int,
        delta_initial: float | Fraction | str = Fraction(1, 2),
        blocks: int = 3,
        *,
        carry_knowledge: bool = False,
    ) -> None:
        self.n_actions, self.n_states = n_actions, n_states
        self.schedule = composer_schedule(delta_initial, blocks, max(n_actions, n_states))
        self.carry_knowledge = carry_knowledge
        self.t = 0
        self.block = 0
        self.explorer = CRExplorer(n_actions, n_states, self.schedule.deltas[0] / 2)
        self.last_coin: int | None = None

    def act(self, rng: random.Random) -> int:
        m = self.schedule.block_of(self.t + 1)
        if m != self.block:
            old = self.explorer
            self.explorer = CRExplorer(self.n_actions, self.n_states, self.schedule.deltas[m] / 2)
            if self.carry_knowledge:
                self.explorer.state.knowledge.entries = [row[:] for row in old.state.knowledge.entries]
            self.block = m
        action = self.explorer.act(rng)
        self.last_coin = self.explorer.last_coin
        return action

    def observe(self, action: int, payoff: Fraction, state: int | None = None) -> None:
        self.explorer.observe(action, payoff, state)
        self.t += 1


class FixedAction:
    pure = True
    feedback = frozenset({PERFECT, IMPERFECT})

    def __init__(self, action: int) -> None:
        self.action = action
        self.last_coin: int | None = None

    def act(self, rng: random.Random | None = None) -> int:
        return self.action

    def observe(self, action: int, payoff: Fraction, state: int | None = None) -> None:
        pass


class UniformRandom:
    pure = False
    feedback = frozenset({PERFECT, IMPERFECT})

    def __init__(self, n_actions: int) -> None:
        self.n_actions = n_actions
        self.last_coin: int | None = None

    def act(self, rng: random.Random) -> int:
        return rng.randrange(self.n_actions)

    def observe(self, action: int, payoff: Fraction, state: int | None = None) -> None:
        pass


AGENT_KINDS = (
    "cr_explorer",
    "safety_learner",
    "composer",
    "greedy_deterministic",
    "cr_explorer_blind",
    "fixed",
    "uniform_random",
)


def make_agent(config: dict, n_actions: int, n_states: int, action_lookup=None):
    """Build an agent session from its JSON config.

    ``action_lookup`` maps an action name to its index for ``fixed`` agents.
    """
    kind = config.get("kind")
    if kind == "cr_explorer":
        return CRExplorer(n_actions, n_states, config.get("delta", "0.5"))
    if kind == "greedy_deterministic":
        return CRExplorer(n_actions, n_states, config.get("delta", "0.5"), greedy=True)
    if kind == "cr_explorer_blind":
        return CRExplorer(n_actions, n_states, config.get("delta", "0.5"), learn=False)
    if kind == "safety_learner":
        return SafetyLearner(n_actions)
    if kind == "composer":
        return Composer(
            n_actions,
            n_states,
            config.get("delta_initial", "0.5"),
            int(config.get("blocks", 3)),
            carry_knowledge=bool(config.get("carry_knowledge", False)),
        )
    if kind == "fixed":
        action = config.get("action", 0)
        if action_lookup is not None:
            action = action_lookup(action)
        if not 0 <= action < n_actions:
            raise ConfigurationError(f"agent.action {action} out of range")
        return FixedAction(action)
    if kind == "uniform_random":
        return UniformRandom(n_actions)
    raise ConfigurationError(f"agent.kind must be one of {list(AGENT_KINDS)}, got {kind!r}")


def agent_feedback(config: dict) -> frozenset[str]:
    """Monitoring regimes supported by an agent config, without building it."""
    kind = config.get("kind")
    if kind in ("cr_explorer", "greedy_deterministic", "composer"):
        return frozenset({PERFECT})
    if kind == "cr_explorer_blind":
        return frozenset({IMPERFECT})
    if kind in AGENT_KINDS:
        return frozenset({PERFECT, IMPERFECT})
    raise ConfigurationError(f"agent.kind must be one of {list(AGENT_KINDS)}, got {kind!r}")


def agent_is_pure(config: dict) -> bool:
    return config.get("kind") in ("greedy_deterministic", "safety_learner", "fixed")
