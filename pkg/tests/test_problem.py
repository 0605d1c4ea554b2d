import json
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given

from nonbayes import ConfigurationError
from nonbayes.problem import (
    CriterionResult,
    DecisionProblem,
    competitive_ratio,
    example1_problems,
    example2_problems,
    load_problem,
    max_payoff,
    problem_from_dict,
    safety_level,
    to_fraction,
    true_ratio,
)

from tests.strategies import positive, problems

D1, D2 = example1_problems()
E1, E2 = example2_problems(100, 20, 4)


# --- max_payoff -------------------------------------------------------------

def test_max_payoff_example1():
    assert max_payoff(D1, 0) == 30


def test_max_payoff_single_action():
    p = DecisionProblem.from_rows([[3, 7, 2]])
    assert [max_payoff(p, s) for s in range(3)] == [3, 7, 2]


def test_max_payoff_example2_third_state():
    # column s3 of D2 is {2c, a} = {8, 100}
    assert max_payoff(E2, 2) == 100


@pytest.mark.parametrize("state", [-1, 2, 5])
def test_max_payoff_out_of_range(state):
    with pytest.raises(IndexError):
        max_payoff(D1, state)


# --- true_ratio -------------------------------------------------------------

def test_true_ratio_example1():
    assert true_ratio(D1, 0, 0) == 30


def test_true_ratio_maximizer_is_one():
    assert true_ratio(D1, 1, 0) == 1
    assert true_ratio(D1, 0, 1) == 1


def test_true_ratio_example2():
    assert true_ratio(E2, 0, 2) == Fraction(25, 2)


def test_true_ratio_out_of_range():
    with pytest.raises(IndexError):
        true_ratio(D1, 2, 0)


def test_ratio_matrices_match_printed_ones():
    assert D1.ratio_matrix == ((30, 1), (1, 5))
    assert D2.ratio_matrix == ((10, 1), (1, 15))
    assert E1.ratio_matrix == ((1, 1, 1), (2, 2, 2))
    assert E2.ratio_matrix == ((1, 1, Fraction(100, 8)), (Fraction(200, 20), Fraction(40, 4), 1))


# --- competitive_ratio / safety_level --------------------------------------

def test_competitive_ratio_example1():
    assert competitive_ratio(D1) == CriterionResult(Fraction(5), (1,))
    assert competitive_ratio(D2) == CriterionResult(Fraction(10), (0,))


def test_competitive_ratio_single_action():
    p = DecisionProblem.from_rows([[2, 8]])
    res = competitive_ratio(p)
    assert res.value == 1 and res.optimal_actions == (0,)


def test_competitive_ratio_example2():
    assert competitive_ratio(E1) == CriterionResult(Fraction(1), (0,))
    assert competitive_ratio(E2) == CriterionResult(Fraction(10), (1,))
    # a/2c exceeds CR2, which is what makes a1 fail in s3 of D2
    assert Fraction(100, 8) > competitive_ratio(E2).value


def test_safety_level_example1():
    assert safety_level(D1) == CriterionResult(Fraction(2), (1,))


def test_safety_level_constant_matrix():
    p = DecisionProblem.from_rows([[4, 4], [4, 4], [4, 4]])
    assert safety_level(p) == CriterionResult(Fraction(4), (0, 1, 2))


def test_safety_level_example2():
    assert safety_level(E1) == CriterionResult(Fraction(8), (0,))


def test_ties_are_exact():
    # 1/3 and 0.1 + ... style values would tie only approximately in floats
    p = DecisionProblem.from_rows([["1/3", "2/3"], ["2/6", "4/6"], ["0.1", "0.2"]])
    assert competitive_ratio(p).optimal_actions == (0, 1)


# --- invariants ---------------------------------------------------------------

@given(problems())
def test_ratio_bounds(p):
    cr = competitive_ratio(p)
    assert cr.value >= 1
    for a, s in product(range(p.action_count), range(p.state_count)):
        assert true_ratio(p, a, s) >= 1
    for a in range(p.action_count):
        assert cr.value <= max(true_ratio(p, a, s) for s in range(p.state_count))


@given(problems())
def test_cr_actions_guarantee_fraction_of_best(p):
    cr = competitive_ratio(p)
    for a in cr.optimal_actions:
        for s in range(p.state_count):
            assert p.payoffs[a][s] >= max_payoff(p, s) / cr.value


@given(problems())
def test_safety_actions_guarantee_level(p):
    v = safety_level(p)
    for a in v.optimal_actions:
        assert all(u >= v.value for u in p.payoffs[a])


@given(problems())
def test_optimal_sets_match_brute_force(p):
    worst_ratio = [max(true_ratio(p, a, s) for s in range(p.state_count)) for a in range(p.action_count)]
    expected = tuple(a for a in range(p.action_count) if worst_ratio[a] == min(worst_ratio))
    assert competitive_ratio(p).optimal_actions == expected
    worst_pay = [min(row) for row in p.payoffs]
    assert safety_level(p).optimal_actions == tuple(
        a for a in range(p.action_count) if worst_pay[a] == max(worst_pay)
    )


@given(problems(), positive)
def test_scaling(p, k):
    q = p.scaled(k)
    assert competitive_ratio(q) == competitive_ratio(p)
    assert safety_level(q).value == k * safety_level(p).value
    assert safety_level(q).optimal_actions == safety_level(p).optimal_actions


# --- construction and loading -------------------------------------------------

def test_rejects_non_positive():
    with pytest.raises(ConfigurationError, match=r"payoffs\[1\]\[0\].*'a2'.*'s1'"):
        DecisionProblem.from_rows([[1, 2], [0, 3]])


def test_rejects_ragged_rows():
    with pytest.raises(ConfigurationError):
        DecisionProblem.from_rows([[1, 2], [3]])


def test_float_input_is_read_as_decimal():
    assert to_fraction(0.1) == Fraction(1, 10)


def test_load_problem_exact(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({
        "label": "tea-or-coffee",
        "actions": ["tea", "coffee"],
        "states": ["happy", "tired"],
        "payoffs": [[0.1, 3], ["1/3", 2.5]],
    }))
    p = load_problem(path)
    assert p.label == "tea-or-coffee"
    assert p.payoffs == ((Fraction(1, 10), 3), (Fraction(1, 3), Fraction(5, 2)))
    assert p.state_index("tired") == 1


def test_load_problem_names_bad_cell(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"payoffs": [[1, 2], [3, -4]], "states": ["x", "y"]}))
    with pytest.raises(ConfigurationError, match=r"payoffs\[1\]\[1\].*'y'"):
        load_problem(path)


def test_problem_dict_round_trip():
    p = DecisionProblem.from_rows([["1/3", 2], [5, "0.25"]], label="rt")
    assert problem_from_dict(json.loads(json.dumps(p.to_dict()))) == p


def test_non_square_allowed():
    p = DecisionProblem.from_rows([[1, 2, 3]])
    assert (p.action_count, p.state_count, p.n) == (1, 3, 3)


def test_example2_parameter_constraint():
    with pytest.raises(ValueError):
        example2_problems(100, 30, 4)  # 4b = 120 > a
    with pytest.raises(ValueError):
        example2_problems(100, 20, 5)  # 16c = 80 = 4b
