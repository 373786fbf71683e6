import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzydesc.memexpr import (
    ArityError, EvaluationError, ExprSyntaxError, UnknownIdentifierError,
    eval_time_derivative, evaluate, parse, to_source,
)


def test_fixture_expression_parses():
    e = parse("(1-cos(x1))/2", 2)
    assert e.state_dim == 2
    assert not e.is_constant()


def test_unbalanced_paren_position():
    with pytest.raises(ExprSyntaxError) as ei:
        parse("sin(x1", 2)
    assert ei.value.position == 7


def test_out_of_range_variable():
    with pytest.raises(UnknownIdentifierError):
        parse("x3", 2)
    with pytest.raises(UnknownIdentifierError):
        parse("x0", 2)


def test_unknown_function_and_arity():
    with pytest.raises(UnknownIdentifierError):
        parse("sinh(x1)", 1)
    with pytest.raises((ArityError, ExprSyntaxError)):
        parse("sin()", 1)


@pytest.mark.parametrize("src,x,expected", [
    ("sin(x1)^2", [math.pi / 2, 0], 1.0),
    ("(1-cos(x1))/2", [0, 0], 0.0),
    ("cos(x1)^2", [math.pi / 4, 0], 0.5),
    ("-x1^2", [3, 0], -9.0),
    ("2^3^2", [0, 0], 512.0),
    ("x2 - x1 * 2", [1, 5], 3.0),
    ("pi", [0, 0], math.pi),
    ("1.5e1 + .5", [0, 0], 15.5),
])
def test_evaluate(src, x, expected):
    assert evaluate(parse(src, 2), x) == pytest.approx(expected, abs=1e-15)


def test_domain_errors():
    with pytest.raises(EvaluationError):
        evaluate(parse("1/x1", 1), [0.0])
    with pytest.raises(EvaluationError):
        evaluate(parse("sqrt(x1)", 1), [-1.0])


def test_time_derivative_examples():
    assert eval_time_derivative(parse("x1", 2), [2, 0], [3, 0], 1e-6) == pytest.approx(3.0, rel=1e-9)
    assert eval_time_derivative(parse("sin(x1)^2", 2), [0, 0], [1, 0], 1e-6) == pytest.approx(0.0, abs=1e-9)
    assert eval_time_derivative(parse("1", 2), [0.3, 2], [5, -1], 1e-6) == 0.0


FIXTURE_DERIVATIVES = {
    "(1-cos(x1))/2": lambda x1: 0.5 * math.sin(x1),
    "1-(1-cos(x1))/2": lambda x1: -0.5 * math.sin(x1),
    "sin(x1)^2": lambda x1: 2 * math.sin(x1) * math.cos(x1),
    "1-sin(x1)^2": lambda x1: -2 * math.sin(x1) * math.cos(x1),
    "cos(x1)^2": lambda x1: -2 * math.sin(x1) * math.cos(x1),
    "1-cos(x1)^2": lambda x1: 2 * math.sin(x1) * math.cos(x1),
}


def worst_derivative_error(rng, points=100):
    worst = 0.0
    for src, grad in FIXTURE_DERIVATIVES.items():
        e = parse(src, 2)
        for x, xd in zip(rng.uniform(-math.pi, math.pi, (points, 2)), rng.uniform(-3, 3, (points, 2))):
            exact = grad(x[0]) * xd[0]
            fd = eval_time_derivative(e, x, xd, 1e-5)
            worst = max(worst, abs(fd - exact) / max(abs(exact), 1.0))
    return worst


def test_fd_matches_chain_rule(rng):
    assert worst_derivative_error(rng) < 1e-6


exprs = st.recursive(
    st.one_of(st.sampled_from(["x1", "x2", "pi"]), st.integers(0, 9).map(str)),
    lambda c: st.one_of(
        st.tuples(c, st.sampled_from("+-*"), c).map(lambda t: f"({t[0]}{t[1]}{t[2]})"),
        st.tuples(st.sampled_from(["sin", "cos", "abs"]), c).map(lambda t: f"{t[0]}({t[1]})"),
        c.map(lambda s: f"-{s}"),
    ),
    max_leaves=8,
)


@settings(max_examples=200, deadline=None)
@given(exprs, st.floats(-3, 3), st.floats(-3, 3))
def test_to_source_roundtrip(src, a, b):
    e = parse(src, 2)
    again = parse(to_source(e), 2)
    assert to_source(again) == to_source(e)
    v1, v2 = evaluate(e, [a, b]), evaluate(again, [a, b])
    assert v1 == v2 or (math.isnan(v1) and math.isnan(v2))
