"""
Expression grammar
------------------

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?          integer exponents only
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names carry digit index suffixes: ``g_00``, ``pi^0_1``, ``dphi0_3``.  A
caret is read as part of a name only in the ``^digits_digits`` pattern, so
``x0^2`` is a power and ``pi^0_0^2`` is the square of ``pi^0_0``.
Decimal literals are read as exact rationals.

"""

import re
from fractions import Fraction
from typing import Callable, Mapping, Optional

import sympy as sp

from .kernel import FiberedChart, SymbolError, canonical


class ExpressionSyntaxError(ValueError):

    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"line {line}, column {col}: {message}")
        self.message, self.line, self.col = message, line, col


class UndeclaredSymbolError(SymbolError):

    def __init__(self, name: str, line: int = 1, col: int = 1):
        super().__init__(f"line {line}, column {col}: undeclared symbol {name}")
        self.name, self.line, self.col = name, line, col


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z][A-Za-z0-9]*(?:_\d+|\^\d+_\d+)*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


def tokenize(text: str, line: int = 1, col: int = 1):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", line, col + pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), col + pos))
        pos = m.end()
    out.append(("end", "", col + len(text)))
    return out


BUILTINS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt}


class Namespace:
    """Name and call resolution for the parser."""

    def __init__(self, names: Mapping[str, sp.Expr], calls: Optional[Mapping[str, Callable]] = None):
        self.names = dict(names)
        self.calls = dict(calls or {})

    def name(self, name: str, line: int, col: int) -> sp.Expr:
        if name in self.names:
            return self.names[name]
        raise UndeclaredSymbolError(name, line, col)

    def call(self, name: str, args, line: int, col: int) -> sp.Expr:
        if name in self.calls:
            try:
                return self.calls[name](*args)
            except (TypeError, ValueError) as exc:
                raise ExpressionSyntaxError(f"bad call to {name}: {exc}", line, col) from None
        raise UndeclaredSymbolError(name, line, col)


def chart_namespace(chart: FiberedChart, extra: Optional[Mapping[str, sp.Expr]] = None,
                    builtins: bool = True) -> Namespace:
    """Namespace of a chart: coordinates, velocities, parameters, functions.

    A declared function can be called with its arguments or named bare,
    which stands for its application to the declared arguments.
    """
    names = chart.symbols()
    calls = {}
    for name, app in chart.functions.items():
        calls[name] = _applier(app)
        names.setdefault(name, app)
    names.update(extra or {})
    calls["diff"] = _diff
    if builtins:
        calls.update(BUILTINS)
    return Namespace(names, calls)


def _applier(app: sp.Expr) -> Callable:
    def apply(*args):
        if len(args) != len(app.args):
            raise ValueError(f"expected {len(app.args)} arguments, got {len(args)}")
        return app.func(*args)
    return apply


def _diff(e, *vars_):
    if not vars_ or not all(isinstance(v, sp.Symbol) for v in vars_):
        raise ValueError("diff needs coordinate symbols after the expression")
    return sp.diff(e, *vars_)


class _Parser:

    def __init__(self, tokens, ns: Namespace, line: int):
        self.toks, self.i, self.ns, self.line = tokens, 0, ns, line

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        t = self.take()
        if t[1] != value:
            raise ExpressionSyntaxError(f"expected {value!r}, found {t[1] or 'end of input'!r}",
                                        self.line, t[2])
        return t

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            r = self.term()
            e = e + r if op == "+" else e - r
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, col = self.take()
            r = self.unary()
            if op == "/":
                if r == 0:
                    raise ExpressionSyntaxError("division by zero", self.line, col)
                e = e / r
            else:
                e = e * r
        return e

    def unary(self):
        if self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            e = self.unary()
            return -e if op == "-" else e
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            _, _, col = self.take()
            exp = self.unary()
            if not (exp.is_Integer):
                raise ExpressionSyntaxError("exponent must be an integer", self.line, col)
            return base ** exp
        return base

    def atom(self):
        kind, text, col = self.take()
        if kind == "number":
            return sp.Rational(Fraction(text))
        if kind == "name":
            if self.peek()[1] == "(":
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                return self.ns.call(text, args, self.line, col)
            return self.ns.name(text, self.line, col)
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ExpressionSyntaxError(f"unexpected {text or 'end of input'!r}", self.line, col)


def parse_expression(text: str, ns: Namespace, line: int = 1, col: int = 1,
                     canonicalize: bool = True) -> sp.Expr:
    """Parse ``text`` into an Expression; errors carry line and column."""
    p = _Parser(tokenize(text, line, col), ns, line)
    e = p.expr()
    kind, rest, c = p.peek()
    if kind != "end":
        raise ExpressionSyntaxError(f"unexpected {rest!r}", line, c)
    return canonical(e) if canonicalize else e
