import pytest
import sympy as sp
from hypothesis import given, strategies as st

from covham.grammar import (ExpressionSyntaxError, UndeclaredSymbolError, chart_namespace,
                            parse_expression, tokenize)
from covham.kernel import FiberedChart, canonical, serialize

chart = FiberedChart(2, 2, parameters=["m"])
a = chart.declare_function("a", ["x1"])
ns = chart_namespace(chart)
x0, x1 = chart.x
m = chart.parameters["m"]


def parse(text):
    return parse_expression(text, ns)


def test_arithmetic_and_precedence():
    assert parse("1/2*x0^2") == x0 ** 2 / 2
    assert parse("1/2") == sp.Rational(1, 2)
    assert parse("x0/x1/2") == x0 / x1 / 2
    assert parse("-x0^2") == -x0 ** 2
    assert parse("2^-1") == sp.Rational(1, 2)
    assert parse("0.25*m") == m / 4


def test_index_suffixed_names():
    assert parse("pi^0_1") == chart.pi[0][1]
    assert parse("pi^1_0^2") == chart.pi[1][0] ** 2
    assert parse("dphi1_0") == chart.velocity[1][0]


def test_functions_called_or_bare():
    assert parse("a(x1)") == a
    assert parse("a") == a
    assert parse("a(2*x1)") == a.func(2 * x1)
    assert parse("diff(a(x1), x1)") == sp.Derivative(a, x1)
    assert parse("sin(x0)") == sp.sin(x0)


def test_undeclared_symbol_has_location():
    with pytest.raises(UndeclaredSymbolError) as err:
        parse_expression("x0 + q", ns, line=4, col=10)
    assert err.value.name == "q"
    assert (err.value.line, err.value.col) == (4, 15)


def test_syntax_errors_have_location():
    with pytest.raises(ExpressionSyntaxError) as err:
        parse("x0 + * x1")
    assert err.value.col == 6
    with pytest.raises(ExpressionSyntaxError):
        parse("x0^x1")
    with pytest.raises(ExpressionSyntaxError):
        parse("(x0")
    with pytest.raises(ExpressionSyntaxError):
        parse("x0 $ x1")
    with pytest.raises(ExpressionSyntaxError):
        parse("x0/0")
    with pytest.raises(ExpressionSyntaxError):
        parse("a(x0, x1)")


def test_tokenize_columns():
    toks = tokenize("pi^0_0 + 1", col=3)
    assert [(k, t, c) for k, t, c in toks][:3] == [("name", "pi^0_0", 3), ("op", "+", 10),
                                                   ("number", "1", 12)]


EXPRS = st.recursive(
    st.sampled_from([x0, x1, m, a] + list(chart.phi) + [p for r in chart.pi for p in r])
    | st.fractions(min_value=-7, max_value=7, max_denominator=6).map(sp.Rational),
    lambda sub: st.one_of(st.tuples(sub, sub).map(lambda t: t[0] + t[1]),
                          st.tuples(sub, sub).map(lambda t: t[0] * t[1]),
                          st.tuples(sub, st.integers(0, 3)).map(lambda t: t[0] ** t[1])),
    max_leaves=10)


@given(EXPRS)
def test_serialize_parse_round_trip(e):
    e = canonical(e)
    assert parse(serialize(e)) == e
