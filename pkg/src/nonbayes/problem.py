"""One-shot decision problems and their exact criterion values.

Payoffs are held as :class:`fractions.Fraction` so that argmin/argmax sets
are computed without rounding: two actions that tie exactly also tie here.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

from nonbayes.errors import ConfigurationError

Number = Fraction | int | Decimal | str | float


def to_fraction(value: Number) -> Fraction:
    """Convert a payoff given as text or a number to an exact rational.

    Floats go through their shortest decimal repr, so ``0.1`` becomes
    ``1/10`` rather than the nearest binary double.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not payoffs")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Decimal)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError:
            raise ValueError(f"cannot parse {value!r} as an exact number") from None
    raise TypeError(f"unsupported payoff type {type(value).__name__}")


def fraction_text(x: Fraction) -> str:
    """Exact text form of a rational: '0.5' where finite in decimal, else '1/3'."""
    d = Decimal(x.numerator) / Decimal(x.denominator)
    if Fraction(d) == x:
        return format(d.normalize(), "f")
    return str(x)


@dataclass(frozen=True)
class DecisionProblem:
    """A finite matrix of positive payoffs, rows = actions, columns = states."""

    payoffs: tuple[tuple[Fraction, ...], ...]
    label: str = "problem"
    action_names: tuple[str, ...] = ()
    state_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        rows = tuple(tuple(to_fraction(x) for x in row) for row in self.payoffs)
        if not rows or not rows[0]:
            raise ConfigurationError("a decision problem needs at least one action and one state")
        width = len(rows[0])
        for i, row in enumerate(rows):
            if len(row) != width:
                raise ConfigurationError(
                    f"payoffs row {i} has {len(row)} entries, expected {width}"
                )
        actions = tuple(self.action_names) or tuple(f"a{i + 1}" for i in range(len(rows)))
        states = tuple(self.state_names) or tuple(f"s{j + 1}" for j in range(width))
        if len(actions) != len(rows):
            raise ConfigurationError(
                f"{len(actions)} action names given for {len(rows)} payoff rows"
            )
        if len(states) != width:
            raise ConfigurationError(
                f"{len(states)} state names given for {width} payoff columns"
            )
        if len(set(actions)) != len(actions) or len(set(states)) != len(states):
            raise ConfigurationError("action and state names must be unique")
        for i, row in enumerate(rows):
            for j, x in enumerate(row):
                if x <= 0:
                    raise ConfigurationError(
                        f"payoffs[{i}][{j}] (action {actions[i]!r}, state {states[j]!r}) "
                        f"= {x} is not strictly positive"
                    )
        object.__setattr__(self, "payoffs", rows)
        object.__setattr__(self, "action_names", actions)
        object.__setattr__(self, "state_names", states)

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[Number]], label: str = "problem") -> DecisionProblem:
        return cls(tuple(tuple(r) for r in rows), label=label)

    @property
    def action_count(self) -> int:
        return len(self.payoffs)

    @property
    def state_count(self) -> int:
        return len(self.payoffs[0])

    @property
    def n(self) -> int:
        return max(self.action_count, self.state_count)

    def payoff(self, action: int, state: int) -> Fraction:
        self._check_action(action)
        self._check_state(state)
        return self.payoffs[action][state]

    @cached_property
    def column_maxima(self) -> tuple[Fraction, ...]:
        return tuple(
            max(row[s] for row in self.payoffs) for s in range(self.state_count)
        )

    @cached_property
    def ratio_matrix(self) -> tuple[tuple[Fraction, ...], ...]:
        m = self.column_maxima
        return tuple(
            tuple(m[s] / row[s] for s in range(self.state_count)) for row in self.payoffs
        )

    @cached_property
    def success_table(self) -> tuple[tuple[bool, ...], ...]:
        """``success_table[a][s]`` is True iff playing a in s attains the CR."""
        cr = competitive_ratio(self).value
        return tuple(tuple(c <= cr for c in row) for row in self.ratio_matrix)

    def action_index(self, name_or_index: str | int) -> int:
        return _resolve(name_or_index, self.action_names, "action")

    def state_index(self, name_or_index: str | int) -> int:
        return _resolve(name_or_index, self.state_names, "state")

    def scaled(self, factor: Number) -> DecisionProblem:
        k = to_fraction(factor)
        return DecisionProblem(
            tuple(tuple(x * k for x in row) for row in self.payoffs),
            label=self.label,
            action_names=self.action_names,
            state_names=self.state_names,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "actions": list(self.action_names),
            "states": list(self.state_names),
            "payoffs": [[_format(x) for x in row] for row in self.payoffs],
        }

    def _check_action(self, action: int) -> None:
        if not 0 <= action < self.action_count:
            raise IndexError(f"action index {action} out of range [0, {self.action_count})")

    def _check_state(self, state: int) -> None:
        if not 0 <= state < self.state_count:
            raise IndexError(f"state index {state} out of range [0, {self.state_count})")


@dataclass(frozen=True)
class CriterionResult:
    value: Fraction
    optimal_actions: tuple[int, ...] = field(default_factory=tuple)


def max_payoff(problem: DecisionProblem, state: int) -> Fraction:
    """Best payoff any action earns in ``state``."""
    problem._check_state(state)
    return problem.column_maxima[state]


def true_ratio(problem: DecisionProblem, action: int, state: int) -> Fraction:
    problem._check_action(action)
    problem._check_state(state)
    return problem.ratio_matrix[action][state]


def competitive_ratio(problem: DecisionProblem) -> CriterionResult:
    """Min over actions of the worst-case ratio, with every minimizing action."""
    worst = [max(row) for row in problem.ratio_matrix]
    best = min(worst)
    return CriterionResult(best, tuple(a for a, w in enumerate(worst) if w == best))


def safety_level(problem: DecisionProblem) -> CriterionResult:
    """Max over actions of the worst-case payoff, with every maximizing action."""
    worst = [min(row) for row in problem.payoffs]
    best = max(worst)
    return CriterionResult(best, tuple(a for a, w in enumerate(worst) if w == best))


def problem_from_dict(data: Mapping[str, Any]) -> DecisionProblem:
    if not isinstance(data, Mapping):
        raise ConfigurationError("problem must be a JSON object")
    if "payoffs" not in data:
        raise ConfigurationError("problem: missing field 'payoffs'")
    raw = data["payoffs"]
    if not isinstance(raw, list) or not all(isinstance(r, list) for r in raw):
        raise ConfigurationError("problem.payoffs must be a list of rows")
    rows = []
    for i, row in enumerate(raw):
        cells = []
        for j, x in enumerate(row):
            try:
                cells.append(to_fraction(x))
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"problem.payoffs[{i}][{j}]: {exc}") from None
        rows.append(tuple(cells))
    return DecisionProblem(
        tuple(rows),
        label=str(data.get("label", "problem")),
        action_names=tuple(str(a) for a in data.get("actions", ())),
        state_names=tuple(str(s) for s in data.get("states", ())),
    )


def load_problem(path: str | os.PathLike[str]) -> DecisionProblem:
    """Read a problem definition file (JSON) with exact decimal payoffs."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh, parse_float=Decimal)
    except OSError as exc:
        raise ConfigurationError(f"cannot read problem file {os.fspath(path)!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{os.fspath(path)}: invalid JSON: {exc}") from None
    return problem_from_dict(data)


def example1_problems() -> tuple[DecisionProblem, DecisionProblem]:
    """The two 2x2 problems on which no pure strategy can be near-optimal."""
    d1 = DecisionProblem.from_rows([[1, 10], [30, 2]], label="example1-D1")
    d2 = DecisionProblem.from_rows([[1, 30], [10, 2]], label="example1-D2")
    return d1, d2


def example2_problems(a: Number = 100, b: Number = 20, c: Number = 4) -> tuple[DecisionProblem, DecisionProblem]:
    """The pair of 2x3 problems that payoffs alone cannot tell apart.

    Requires ``a > 4b > 16c > 0``.
    """
    a, b, c = to_fraction(a), to_fraction(b), to_fraction(c)
    if not (a > 4 * b > 16 * c > 0):
        raise ValueError(f"need a > 4b > 16c > 0, got a={a}, b={b}, c={c}")
    top = (2 * a, 2 * b, 2 * c)
    d1 = DecisionProblem((top, (a, b, c)), label="example2-D1")
    d2 = DecisionProblem((top, (b, c, a)), label="example2-D2")
    return d1, d2


def _resolve(key: str | int, names: Sequence[str], kind: str) -> int:
    if isinstance(key, bool):
        raise ConfigurationError(f"invalid {kind} {key!r}")
    if isinstance(key, int):
        if not 0 <= key < len(names):
            raise ConfigurationError(f"{kind} index {key} out of range")
        return key
    try:
        return names.index(key)
    except ValueError:
        raise ConfigurationError(f"unknown {kind} {key!r}; known: {list(names)}") from None


def _format(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else str(x)
