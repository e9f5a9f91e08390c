"""
Symbolic kernel
---------------

Exact expressions over fibered coordinates (x^a, phi^I, pi^a_I).

Expressions are plain sympy objects restricted, by convention, to
polynomials in atoms with rational coefficients: coordinate symbols,
parameters, opaque functions of the base coordinates, their derivative
leaves, and reciprocals of declared nonvanishing quantities.  Every
operation here returns the canonical form produced by ``canonical``.

"""

from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Union

import sympy as sp
from sympy.core.function import AppliedUndef
from sympy.printing.str import StrPrinter


Expression = sp.Expr
Number = Union[int, Fraction, float]


class SymbolError(ValueError):
    """Raised for unknown, undeclared or unbound symbols."""


# ---------------------------------------------------------------------------
# canonical form
# ---------------------------------------------------------------------------

def _compound_denominator(e: sp.Basic) -> bool:
    for p in e.atoms(sp.Pow):
        if p.exp.is_negative and p.base.is_Add:
            return True
    return False


def canonical(e) -> Expression:
    """Canonical form: expanded sum of monomials in atoms.

    Reciprocals of single atoms stay as negative powers.  Reciprocals of
    compound quantities (for example an explicit determinant) are combined
    into one fraction with expanded numerator and denominator.
    """
    e = sp.sympify(e)
    if e.is_Number:
        return e
    e = sp.expand(e)
    if _compound_denominator(e):
        e = sp.cancel(sp.together(e))
        num, den = sp.fraction(e)
        e = sp.expand(num) / sp.expand(den)
    return e


def is_zero(e) -> bool:
    """True iff the canonical form of ``e`` is the zero polynomial."""
    return canonical(e) == 0


# ---------------------------------------------------------------------------
# opaque functions with registered derivative identities
# ---------------------------------------------------------------------------

def registered_function(name: str, derivative: Callable[[tuple, int], sp.Expr]):
    """Opaque function class whose partial derivatives are given by a rule.

    ``derivative(args, i)`` returns the derivative with respect to argument
    ``i`` (0-based) as an Expression in ``args``.
    """

    def fdiff(self, argindex=1):
        return derivative(self.args, argindex - 1)

    return type(name, (sp.Function,), {"fdiff": fdiff, "opaque": True})


def opaque_atoms(e: sp.Basic) -> set:
    """Opaque function applications occurring in ``e``."""
    return {f for f in e.atoms(sp.Function)
            if isinstance(f, AppliedUndef) or getattr(f, "opaque", False)}


# ---------------------------------------------------------------------------
# fibered chart
# ---------------------------------------------------------------------------

FIELD_TAGS = ("scalar", "covector", "symmetric")


class FiberedChart:
    """Coordinates x^a, phi^I, pi^a_I of the extended phase space.

    Also carries velocity placeholders dphiI_a standing for d(phi^I)/dx^a,
    declared parameters and declared opaque functions.
    """

    def __init__(self, n: int, N: int, field: str = "scalar",
                 parameters: Iterable[str] = (), functions: Optional[Mapping] = None):
        if n < 1 or N < 1:
            raise ValueError("chart dimensions must be positive")
        if field not in FIELD_TAGS:
            raise ValueError(f"unknown field tag {field!r}")
        if field == "covector" and N != n:
            raise ValueError("covector fields need N == n")
        if field == "symmetric" and N != n * (n + 1) // 2:
            raise ValueError("symmetric 2-tensor fields need N == n(n+1)/2")
        self.n, self.N, self.field = n, N, field
        self.x = tuple(sp.Symbol(f"x{a}") for a in range(n))
        self.phi = tuple(sp.Symbol(f"phi{i}") for i in range(N))
        self.pi = tuple(tuple(sp.Symbol(f"pi^{a}_{i}") for i in range(N)) for a in range(n))
        self.velocity = tuple(tuple(sp.Symbol(f"dphi{i}_{a}") for a in range(n)) for i in range(N))
        self.parameters: dict = {}
        self.functions: dict = {}
        for p in parameters:
            self.declare_parameter(p)
        for name, args in (functions or {}).items():
            self.declare_function(name, args)

    def __repr__(self):
        return f"FiberedChart(n={self.n}, N={self.N}, field={self.field!r})"

    # declarations ---------------------------------------------------------

    def declare_parameter(self, name: str) -> sp.Symbol:
        self._check_fresh(name)
        s = sp.Symbol(name)
        self.parameters[name] = s
        return s

    def declare_function(self, name: str, args) -> sp.Expr:
        """Declare an opaque function of listed coordinates; return its application."""
        args = tuple(self.symbol(a) if isinstance(a, str) else a for a in args)
        allowed = set(self.x) | set(self.phi)
        if not all(a in allowed for a in args):
            raise SymbolError(f"opaque function {name} may depend on x and phi only")
        if name in self.functions:
            if self.functions[name].args != args:
                raise SymbolError(f"function {name} redeclared with different arguments")
            return self.functions[name]
        self._check_fresh(name)
        app = sp.Function(name)(*args)
        self.functions[name] = app
        return app

    def register(self, name: str, app: sp.Expr) -> None:
        """Register an already-built opaque application (e.g. metric atoms)."""
        self.functions[name] = app

    def _check_fresh(self, name: str) -> None:
        if name in self.coordinate_names or name in self.parameters or name in self.functions:
            raise SymbolError(f"name {name} already declared")

    # lookup ---------------------------------------------------------------

    @property
    def coordinates(self) -> tuple:
        return self.x + self.phi + tuple(s for row in self.pi for s in row)

    @property
    def velocities(self) -> tuple:
        return tuple(s for row in self.velocity for s in row)

    @property
    def coordinate_names(self) -> set:
        return {str(s) for s in self.coordinates + self.velocities}

    def symbols(self) -> dict:
        out = {str(s): s for s in self.coordinates + self.velocities}
        out.update(self.parameters)
        return out

    def symbol(self, name: str) -> sp.Symbol:
        try:
            return self.symbols()[name]
        except KeyError:
            raise SymbolError(f"undeclared symbol {name}") from None

    def check(self, e: sp.Basic, allow_velocities: bool = True) -> None:
        """Reject expressions with undeclared symbols or functions."""
        known = set(self.coordinates) | set(self.parameters.values())
        if allow_velocities:
            known |= set(self.velocities)
        for s in e.free_symbols:
            if s not in known:
                raise SymbolError(f"undeclared symbol {s}")
        names = {f.func.__name__ for f in self.functions.values()}
        for f in opaque_atoms(e):
            if f.func.__name__ not in names:
                raise SymbolError(f"undeclared function {f.func.__name__}")

    def pi_index(self, s: sp.Symbol) -> tuple:
        """(a, I) for the momentum coordinate pi^a_I."""
        for a, row in enumerate(self.pi):
            for i, p in enumerate(row):
                if p == s:
                    return a, i
        raise SymbolError(f"{s} is not a momentum coordinate")


def _resolve(s, chart: Optional[FiberedChart]):
    if isinstance(s, str):
        if chart is None:
            raise SymbolError(f"cannot resolve {s} without a chart")
        return chart.symbol(s)
    if chart is not None and isinstance(s, sp.Symbol) and s not in chart.symbols().values():
        raise SymbolError(f"undeclared symbol {s}")
    return s


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def differentiate(e, s, chart: Optional[FiberedChart] = None) -> Expression:
    """Exact partial derivative of ``e`` with respect to the symbol ``s``."""
    s = _resolve(s, chart)
    if not isinstance(s, sp.Symbol):
        raise SymbolError(f"cannot differentiate with respect to {s}")
    return canonical(sp.diff(sp.sympify(e), s))


def substitute(e, bindings: Mapping, chart: Optional[FiberedChart] = None) -> Expression:
    """Simultaneous substitution followed by canonicalization."""
    b = {_resolve(k, chart): sp.sympify(v) for k, v in bindings.items()}
    return canonical(sp.sympify(e).subs(b, simultaneous=True).doit())


def _number(v) -> sp.Expr:
    if isinstance(v, Fraction):
        return sp.Rational(v.numerator, v.denominator)
    if isinstance(v, (int, sp.Integer, sp.Rational)):
        return sp.Integer(v) if isinstance(v, int) else v
    return sp.Float(float(v), 17)


def _to_python(v: sp.Expr) -> Number:
    if v.is_Rational:
        return Fraction(int(v.p), int(v.q))
    return float(v)


def derivative_key(d: sp.Derivative) -> tuple:
    """Lookup key (name, ('x1', 'x1', ...)) of a derivative leaf."""
    vars_ = []
    for v, k in d.variable_count:
        vars_ += [str(v)] * int(k)
    return d.expr.func.__name__, tuple(vars_)


def _call(fn, args, point, fns) -> sp.Expr:
    if not callable(fn):
        return _number(fn)
    return _number(fn(*[evaluate(a, point, fns) for a in args]))


def evaluate(e, point: Mapping, fns: Optional[Mapping] = None) -> Number:
    """Numeric value of ``e``.

    ``point`` binds symbols (or their names).  ``fns`` binds opaque
    functions by name to callables; derivative leaves are bound under the
    key returned by ``derivative_key``; a non-callable binding is a
    constant.  The result is a Fraction when all
    inputs are rational and no callback is involved, otherwise a float.
    """
    e = sp.sympify(e)
    fns = dict(fns or {})
    names = {str(s): s for s in e.free_symbols}
    vals = {}
    for k, v in point.items():
        s = names.get(k) if isinstance(k, str) else k
        if s is not None:
            vals[s] = _number(v)

    reps = {}
    for d in e.atoms(sp.Derivative):
        key = derivative_key(d)
        if key not in fns:
            raise SymbolError(f"unbound derivative leaf {key}")
        reps[d] = _call(fns[key], d.expr.args, point, fns)
    e = e.xreplace(reps)
    reps = {}
    for f in opaque_atoms(e):
        name = f.func.__name__
        if name not in fns:
            raise SymbolError(f"unbound opaque function {name}")
        reps[f] = _call(fns[name], f.args, point, fns)
    e = e.xreplace(reps).xreplace(vals)
    if e.free_symbols:
        raise SymbolError("unbound symbols: " + ", ".join(sorted(map(str, e.free_symbols))))
    e = sp.sympify(e)
    if not e.is_Rational:
        e = e.evalf(17)
    return _to_python(e)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

class _Printer(StrPrinter):

    def _print_Derivative(self, expr):
        _, vars_ = derivative_key(expr)
        return "diff(%s)" % ", ".join([self._print(expr.expr)] + list(vars_))

    def _print_Pow(self, expr, rational=False):
        return super()._print_Pow(expr, rational).replace("**", "^")

    def _print_Mul(self, expr):
        return super()._print_Mul(expr).replace("**", "^")


def serialize(e) -> str:
    """Canonical text form, parseable by the expression grammar."""
    return _Printer({"order": None}).doprint(canonical(e))
