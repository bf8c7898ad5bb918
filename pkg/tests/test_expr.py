import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab.expr import (MAX_DEPTH, Expression, ExprEvalError, ExprSyntaxError, depth,
                             differentiate, evaluate, parse, render)


@pytest.mark.parametrize("text,x,expected", [
    ("2+3*x", 1, 5),
    ("-x^2", 3, -9),
    ("exp(x)", 0, 1),
    ("5 + 0.1*sin(x)", 0, 5),
    ("2^-1", 0, 0.5),
    ("x^(1/2)", 4, 2),
    ("tanh(x)", 0, 0),
    ("sech2(x)", 0, 1),
    ("1.5e2*x", 2, 300),
    ("2*(x-1)/4", 3, 1),
])
def test_evaluate_examples(text, x, expected):
    assert evaluate(parse(text), x) == pytest.approx(expected, rel=1e-15)


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse("2+*")
    assert err.value.offset == 2


@pytest.mark.parametrize("bad", ["", "x^x", "foo(x)", "(1+x", "1+x)", "2**x", "x^(x+1)", "3 x"])
def test_rejects_malformed(bad):
    with pytest.raises(ExprSyntaxError):
        parse(bad)


def test_depth_limit():
    ok = "(" * (MAX_DEPTH - 2) + "x" + ")" * (MAX_DEPTH - 2)
    parse(ok)
    with pytest.raises(ExprSyntaxError):
        parse("(" * (MAX_DEPTH + 5) + "x" + ")" * (MAX_DEPTH + 5))


def test_division_by_zero_names_x():
    with pytest.raises(ExprEvalError) as err:
        evaluate(parse("1/x"), 0.0)
    assert err.value.x == 0.0


def test_vectorised_error_reports_offending_point():
    with pytest.raises(ExprEvalError) as err:
        evaluate(parse("1/(x-0.5)"), np.array([0.0, 0.25, 0.5, 0.75]))
    assert err.value.x == 0.5


def test_vectorised_matches_scalar():
    e = parse("exp(-10*(x-0.2)^2) + tanh(x)*cos(3*x)")
    xs = np.linspace(-1, 1, 17)
    assert np.array_equal(evaluate(e, xs), np.array([evaluate(e, float(v)) for v in xs]))


@pytest.mark.parametrize("text,x,expected", [
    ("sin(x)", 0, 1), ("x^3", 2, 12), ("5", 1.7, 0), ("tanh(x)", 0.3, 1 / math.cosh(0.3) ** 2),
    ("1/x", 2, -0.25), ("exp(-x^2)", 1, -2 * math.exp(-1)),
])
def test_derivative_examples(text, x, expected):
    assert evaluate(differentiate(parse(text)), x) == pytest.approx(expected, rel=1e-14, abs=1e-15)


def test_constant_derivative_is_zero_everywhere():
    d = differentiate(parse("5"))
    assert np.all(evaluate(d, np.linspace(-3, 3, 9)) == 0)


# random well-formed expressions
_leaf = st.sampled_from(["x", "1", "2.5", "0.3"])


def _grow(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*"), children).map(lambda t: f"({t[0]}{t[1]}{t[2]})"),
        st.tuples(children, st.sampled_from(["2", "3", "-1"])).map(lambda t: f"({t[0]})^{t[1]}"),
        st.tuples(st.sampled_from(["sin", "cos", "tanh", "sech2"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        children.map(lambda c: f"-{c}"),
    )


exprs = st.recursive(_leaf, _grow, max_leaves=6)


@settings(max_examples=150, deadline=None)
@given(exprs, st.floats(0.2, 0.8))
def test_derivative_matches_central_difference(text, x):
    e = Expression.parse(text)
    try:
        h = 1e-5
        fd = (e(x + h) - e(x - h)) / (2 * h)
        exact = e.derivative()(x)
    except ExprEvalError:
        return
    scale = max(1.0, abs(e(x + h)), abs(e(x - h)))
    assert abs(fd - exact) <= 1e-5 * scale + 1e-6 * abs(exact)


@settings(max_examples=150, deadline=None)
@given(exprs)
def test_render_round_trip(text):
    ast = parse(text)
    again = parse(render(ast))
    assert again == ast
    assert depth(again) == depth(ast)
    for x in (0.1, 0.7):
        try:
            assert evaluate(again, x) == evaluate(ast, x)
        except ExprEvalError:
            pass
