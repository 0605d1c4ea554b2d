from fractions import Fraction

from hypothesis import strategies as st

from nonbayes.problem import DecisionProblem

positive = st.fractions(min_value=Fraction(1, 20), max_value=50, max_denominator=20)


@st.composite
def problems(draw, max_actions=4, max_states=4):
    na = draw(st.integers(1, max_actions))
    ns = draw(st.integers(1, max_states))
    rows = [[draw(positive) for _ in range(ns)] for _ in range(na)]
    return DecisionProblem.from_rows(rows)
