import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchreg.expr import (
    BinOp,
    Call,
    ExpressionEvalError,
    ExpressionSyntaxError,
    Neg,
    Num,
    Var,
    as_expression,
    evaluate,
    evaluate_array,
    parse,
    to_string,
)


def test_literal():
    assert parse("1") == Num(1.0)


def test_cost_expression_value():
    assert evaluate(parse("0.25*(x^2+y^2)"), (1.0, 1.0)) == 0.5


def test_truncated_call_position():
    with pytest.raises(ExpressionSyntaxError) as exc:
        parse("min(x,")
    assert exc.value.position == 6


@pytest.mark.parametrize("text", ["(x+1", "x+1)", "foo(x)", "z+1", "sin(x,y)", "min(x)", "", "2**3", "x y"])
def test_syntax_errors(text):
    with pytest.raises(ExpressionSyntaxError):
        parse(text)


def test_oscillating_cost_at_origin():
    assert evaluate(parse("(1-abs(x))*cos(pi/(1-abs(x)))"), (0.0, 0.0)) == -1.0


def test_origin_value():
    assert evaluate(parse("x^2+y^2"), (0.0, 0.0)) == 0.0


@pytest.mark.parametrize("text,point", [("ln(x)", (-1.0, 0.0)), ("ln(x)", (0.0, 0.0)), ("1/x", (0.0, 1.0)),
                                        ("sqrt(x)", (-1.0, 0.0)), ("x^0.5", (-2.0, 0.0)), ("x^(-1)", (0.0, 0.0))])
def test_evaluation_errors(text, point):
    with pytest.raises(ExpressionEvalError):
        evaluate(parse(text), point)


def test_radius_variable_and_functions():
    e = parse("r + atan2(y, x) + min(x, y) - max(x, y) + exp(0)")
    assert math.isclose(evaluate(e, (3.0, 4.0)), 5.0 + math.atan2(4, 3) + 3 - 4 + 1)


def test_precedence_shapes():
    assert parse("-2^2") == Neg(BinOp("^", Num(2.0), Num(2.0)))
    assert parse("2^3^2") == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    assert parse("x-y-1") == BinOp("-", BinOp("-", Var("x"), Var("y")), Num(1.0))
    assert evaluate(parse("2^-1"), (0, 0)) == 0.5
    assert parse("abs(x)") == Call("abs", (Var("x"),))


def test_negative_base_integer_power_allowed():
    assert evaluate(parse("x^3"), (-2.0, 0.0)) == -8.0


def test_as_expression_numbers():
    assert evaluate(as_expression(2.5), (0, 0)) == 2.5


def test_evaluate_array_flags_bad_nodes():
    x = np.array([-1.0, 1.0, 2.0])
    vals, bad = evaluate_array(parse("ln(x)"), x, np.zeros(3))
    assert bad.tolist() == [True, False, False]
    assert vals[2] == math.log(2.0)


def test_array_matches_scalar():
    e = parse("sin(x)*cos(y) + r^2 - abs(x*y)/(1+x^2)")
    xs = np.linspace(-1, 1, 7)
    vals, bad = evaluate_array(e, xs, xs[::-1])
    assert not bad.any()
    for k in range(7):
        assert vals[k] == pytest.approx(evaluate(e, (xs[k], xs[::-1][k])), rel=1e-15, abs=1e-15)


# --- properties ----------------------------------------------------------------

_leaf = st.one_of(
    st.floats(0, 100, allow_nan=False).map(Num),
    st.sampled_from(["x", "y", "r"]).map(Var),
)


def _extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(BinOp, st.sampled_from("+-*/^"), children, children),
        st.builds(lambda f, a: Call(f, (a,)), st.sampled_from(["sin", "cos", "abs", "exp", "ln", "sqrt"]), children),
        st.builds(lambda f, a, b: Call(f, (a, b)), st.sampled_from(["min", "max", "atan2"]), children, children),
    )


trees = st.recursive(_leaf, _extend, max_leaves=12)


@given(trees)
@settings(max_examples=300, deadline=None)
def test_round_trip(tree):
    text = to_string(tree)
    assert parse(text) == tree
    assert parse(to_string(parse(text))) == parse(text)


small = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@given(small, small, small)
def test_sum_product_precedence(a, b, c):
    e = parse(f"{a!r}+{b!r}*{c!r}")
    assert evaluate(e, (0.0, 0.0)) == a + (b * c)


@given(trees, small, small)
@settings(max_examples=200, deadline=None)
def test_evaluation_is_pure(tree, x, y):
    def run():
        try:
            return ("ok", evaluate(tree, (x, y)))
        except ExpressionEvalError:
            return ("err", None)

    first, second = run(), run()
    if first[0] == "ok" and math.isnan(first[1]):
        assert math.isnan(second[1])
    else:
        assert first == second
