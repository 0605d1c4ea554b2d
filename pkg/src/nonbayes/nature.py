"""Environment-side (Nature) strategies.

Nature sessions see the true problem and the full (action, state) history.
The engine asks the agent first and hands Nature a ``probe`` returning the
agent's imminent action; only the mirror adversary looks at it.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Callable, Sequence

from nonbayes.errors import ConfigurationError, ContractError
from nonbayes.problem import DecisionProblem

Probe = Callable[[], int]

NATURE_KINDS = ("stationary", "uniform", "mirror", "greedy_minimizer")


class StationaryNature:
    """A fixed state sequence: a cycled pattern, or a seeded random draw.

    The random variant owns its generator, seeded once, so the sequence is the
    same in every replication and never depends on play.
    """

    kind = "stationary"
    requires_pure_agent = False

    def __init__(self, n_states: int, pattern: Sequence[int] | None = None, seed: int | None = None) -> None:
        if pattern is not None:
            pattern = tuple(pattern)
            if not pattern:
                raise ConfigurationError("stationary nature: pattern is empty")
            for s in pattern:
                if not 0 <= s < n_states:
                    raise ConfigurationError(f"stationary nature: state {s} out of range")
        elif seed is None:
            raise ConfigurationError("stationary nature needs a pattern or a seed")
        self.n_states = n_states
        self.pattern = pattern
        self.seed = seed
        self._seq_rng = random.Random(seed) if pattern is None else None
        self.t = 0

    def choose(self, rng: random.Random | None = None, probe: Probe | None = None) -> int:
        return stationary_step(self)

    def observe(self, action: int, state: int) -> None:
        pass


def stationary_step(session: StationaryNature) -> int:
    session.t += 1
    if session.pattern is not None:
        return session.pattern[(session.t - 1) % len(session.pattern)]
    return session._seq_rng.randrange(session.n_states)


class UniformNature:
    kind = "uniform"
    requires_pure_agent = False

    def __init__(self, n_states: int) -> None:
        self.n_states = n_states

    def choose(self, rng: random.Random, probe: Probe | None = None) -> int:
        return uniform_step(self, rng)

    def observe(self, action: int, state: int) -> None:
        pass


def uniform_step(session: UniformNature, rng: random.Random) -> int:
    return rng.randrange(session.n_states)


class MirrorNature:
    """Play the state whose index matches the pure agent's next action."""

    kind = "mirror"
    requires_pure_agent = True

    def __init__(self, n_actions: int, n_states: int) -> None:
        if n_states < n_actions:
            raise ConfigurationError(
                f"mirror nature needs at least as many states as actions ({n_states} < {n_actions})"
            )
        self.n_states = n_states

    def choose(self, rng: random.Random | None = None, probe: Probe | None = None) -> int:
        return mirror_step(self, probe)

    def observe(self, action: int, state: int) -> None:
        pass


def mirror_step(session: MirrorNature, agent_probe: Probe | None) -> int:
    if agent_probe is None:
        raise ContractError("mirror nature needs a probe of the agent's next action")
    return agent_probe()


class GreedyMinimizerNature:
    """Pick the state minimizing the agent's payoff under its empirical action mix."""

    kind = "greedy_minimizer"
    requires_pure_agent = False

    def __init__(self, problem: DecisionProblem) -> None:
        self.problem = problem
        self.counts = [0] * problem.action_count
        # weighted[s] = sum_a counts[a] * u(a, s)
        self.weighted = [Fraction(0)] * problem.state_count

    def choose(self, rng: random.Random | None = None, probe: Probe | None = None) -> int:
        return greedy_minimizer_step(self)

    def observe(self, action: int, state: int) -> None:
        self.counts[action] += 1
        row = self.problem.payoffs[action]
        self.weighted = [w + u for w, u in zip(self.weighted, row)]


def greedy_minimizer_step(session: GreedyMinimizerNature, history: Sequence[tuple[int, int]] | None = None) -> int:
    """Lowest-index state minimizing expected payoff.

    With ``history`` given, the action frequencies are recomputed from it;
    otherwise the session's running tallies are used.  No history at all means
    a uniform mix over actions.
    """
    problem = session.problem
    if history is not None:
        counts = [0] * problem.action_count
        for a, _ in history:
            counts[a] += 1
        weighted = [
            sum((counts[a] * problem.payoffs[a][s] for a in range(problem.action_count)), Fraction(0))
            for s in range(problem.state_count)
        ]
    else:
        counts, weighted = session.counts, session.weighted
    if not any(counts):
        weighted = [
            sum((problem.payoffs[a][s] for a in range(problem.action_count)), Fraction(0))
            for s in range(problem.state_count)
        ]
    best = min(weighted)
    return weighted.index(best)


def make_nature(config: dict, problem: DecisionProblem):
    kind = config.get("kind")
    if kind == "stationary":
        pattern = config.get("pattern")
        if pattern is not None:
            if not isinstance(pattern, list):
                raise ConfigurationError("nature.pattern must be a list of state names")
            pattern = [problem.state_index(s) for s in pattern]
        seed = config.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
            raise ConfigurationError("nature.seed must be an integer")
        return StationaryNature(problem.state_count, pattern, seed)
    if kind == "uniform":
        return UniformNature(problem.state_count)
    if kind == "mirror":
        return MirrorNature(problem.action_count, problem.state_count)
    if kind == "greedy_minimizer":
        return GreedyMinimizerNature(problem)
    raise ConfigurationError(f"nature.kind must be one of {list(NATURE_KINDS)}, got {kind!r}")
