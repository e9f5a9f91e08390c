"""
Model files
-----------

Line-oriented ``name = expression`` entries in bracketed sections::

    [chart]        n, N, field, parameters, functions
    [metric]       g_ab = ..., sqrtg = ..., signature, or metric = minkowski|opaque|opaque-diagonal
    [lagrangian]   L = ..., mode, sources, plus named helper expressions;
                   in volume-form mode L is the integrand divided by sqrtg
    [hamiltonian]  H = ..., plus named helper expressions
    [connection]   mode = none|levi-civita|antisymmetrized-levi-civita|explicit,
                   A1^I_J_a, A2^J_I_a, Gamma^a_b_c for explicit potentials
    [projection]   V^I_a and W^b_I_a (momentum part)
    [solve]        M, cfl, steps, length, cadence, init_phi, init_pi,
                   parameter values and function bindings such as a(x1) = ...

Comments start with ``#``.  Every error carries the line and column.

"""

import hashlib
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import sympy as sp

from .dynamics import (HamiltonianModel, LagrangianModel, SEPARATION_MODES, FieldEquations,
                       derive_connection_equations, derive_projection_equations, legendre_transform)
from .geometry import (SIGNATURES, ConnectionCoefficients, MetricField, VerticalProjection, _grid,
                       antisymmetrized, christoffel, dual_connection, levi_civita_on_covectors,
                       lift_connection)
from .grammar import (BUILTINS, ExpressionSyntaxError, Namespace, UndeclaredSymbolError,
                      chart_namespace, parse_expression)
from .kernel import FIELD_TAGS, FiberedChart, SymbolError


class ModelError(ValueError):

    def __init__(self, message: str, line: int = 0, col: int = 0, path: str = "<model>"):
        where = f"{path}:{line}:{col}: " if line else f"{path}: "
        super().__init__(where + message)
        self.message, self.line, self.col, self.path = message, line, col, path


class ModelSyntaxError(ModelError):
    pass


class UndeclaredName(ModelError):

    def __init__(self, name: str, line: int, col: int, path: str = "<model>"):
        super().__init__(f"undeclared symbol {name}", line, col, path)
        self.name = name


class DualDefinitionError(ModelError):
    pass


class IndexShapeError(ModelError):
    pass


SECTIONS = ("chart", "metric", "lagrangian", "hamiltonian", "connection", "projection", "solve")
CONNECTION_KINDS = ("none", "levi-civita", "antisymmetrized-levi-civita", "explicit")


@dataclass
class Entry:
    key: str
    value: str
    line: int
    col: int        # column where the value starts
    key_col: int = 1


@dataclass
class ModelFile:
    path: str
    text: str
    chart: FiberedChart
    metric: Optional[MetricField] = None
    lagrangian: Optional[LagrangianModel] = None
    hamiltonian: Optional[HamiltonianModel] = None
    connection: str = "none"
    potentials: Optional[tuple] = None          # (A1, A2, Gamma)
    projection: Optional[VerticalProjection] = None
    solve: dict = field(default_factory=dict)
    bindings: dict = field(default_factory=dict)
    parameter_values: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    @property
    def route(self) -> str:
        return "projection" if self.connection == "none" else "connection"

    def hamiltonian_model(self, seed: int = 0) -> HamiltonianModel:
        if self.hamiltonian is not None:
            return self.hamiltonian
        return legendre_transform(self.lagrangian, seed=seed)

    def field_equations(self, seed: int = 0) -> FieldEquations:
        H = self.hamiltonian_model(seed)
        if self.route == "projection":
            return derive_projection_equations(H, self.projection or VerticalProjection.zero(self.chart))
        return derive_connection_equations(H, *self.potentials)


# ---------------------------------------------------------------------------
# lexing
# ---------------------------------------------------------------------------

_HEADER = re.compile(r"^\s*\[\s*([A-Za-z-]+)\s*\]\s*$")
_ENTRY = re.compile(r"^(\s*)([^=\s][^=]*?)\s*=\s*(.*?)\s*$")


def _sections(text: str, path: str) -> dict:
    out, current = {}, None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _HEADER.match(line)
        if m:
            name = m.group(1).lower()
            if name not in SECTIONS:
                raise ModelSyntaxError(f"unknown section [{name}]", lineno, line.index("[") + 1, path)
            if name in out:
                raise ModelSyntaxError(f"section [{name}] appears twice", lineno, 1, path)
            out[name], current = {}, name
            continue
        m = _ENTRY.match(line)
        if not m:
            raise ModelSyntaxError("expected 'name = expression'", lineno, len(line) - len(line.lstrip()) + 1,
                                   path)
        if current is None:
            raise ModelSyntaxError("entry outside of a section", lineno, 1, path)
        key = m.group(2).replace(" ", "")
        if key in out[current]:
            raise ModelSyntaxError(f"duplicate entry {key}", lineno, m.start(2) + 1, path)
        if not m.group(3):
            raise ModelSyntaxError(f"empty value for {key}", lineno, m.end(2) + 1, path)
        out[current][key] = Entry(key, m.group(3), lineno, m.start(3) + 1, m.start(2) + 1)
    return out


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

class _Reader:

    def __init__(self, path: str):
        self.path = path

    def expr(self, entry: Entry, ns: Namespace, canonicalize: bool = True) -> sp.Expr:
        try:
            return parse_expression(entry.value, ns, entry.line, entry.col, canonicalize)
        except UndeclaredSymbolError as exc:
            raise UndeclaredName(exc.name, exc.line, exc.col, self.path) from None
        except ExpressionSyntaxError as exc:
            raise ModelSyntaxError(exc.message, exc.line, exc.col, self.path) from None
        except SymbolError as exc:
            raise ModelError(str(exc), entry.line, entry.col, self.path) from None

    def integer(self, entry: Entry, low: int = 1) -> int:
        try:
            v = int(entry.value)
        except ValueError:
            raise ModelSyntaxError(f"{entry.key} must be an integer", entry.line, entry.col, self.path) from None
        if v < low:
            raise ModelError(f"{entry.key} must be >= {low}", entry.line, entry.col, self.path)
        return v

    def number(self, entry: Entry) -> sp.Expr:
        ns = Namespace({"pi": sp.pi}, dict(BUILTINS))
        v = self.expr(entry, ns, canonicalize=False)
        if v.free_symbols or not v.is_number:
            raise ModelError(f"{entry.key} must be a number", entry.line, entry.col, self.path)
        return v

    def choice(self, entry: Entry, options) -> str:
        if entry.value not in options:
            raise ModelError(f"{entry.key} must be one of {', '.join(options)}", entry.line, entry.col,
                             self.path)
        return entry.value

    def error(self, cls, message: str, entry: Entry, at_key: bool = True):
        return cls(message, entry.line, entry.key_col if at_key else entry.col, self.path)


def _names(value: str) -> list:
    return [v.strip() for v in value.split(",") if v.strip()]


_FUNC = re.compile(r"^([A-Za-z][A-Za-z0-9_]*)\(([^()]*)\)$")


def _split_functions(value: str) -> list:
    """'J_0(x0,x1), a(x1)' -> [('J_0', ['x0', 'x1']), ('a', ['x1'])]."""
    out, depth, start = [], 0, 0
    for i, ch in enumerate(value + ","):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            item = value[start:i].strip()
            if item:
                out.append((item, start))
            start = i + 1
    return out


_INDEXED = re.compile(r"^([A-Za-z][A-Za-z0-9]*)\^(\d+)((?:_\d+)+)$")


def _indices(key: str):
    m = _INDEXED.match(key)
    if not m:
        return None, ()
    return m.group(1), (int(m.group(2)),) + tuple(int(i) for i in m.group(3).split("_")[1:])


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------

def _parse_chart(sec: dict, r: _Reader) -> FiberedChart:
    for key in ("n", "N"):
        if key not in sec:
            raise ModelError(f"[chart] needs {key}", 0, 0, r.path)
    n, N = r.integer(sec["n"]), r.integer(sec["N"])
    tag = r.choice(sec["field"], FIELD_TAGS) if "field" in sec else "scalar"
    try:
        chart = FiberedChart(n, N, field=tag)
    except ValueError as exc:
        e = sec.get("field", sec["N"])
        raise IndexShapeError(str(exc), e.line, e.col, r.path) from None
    known = {"n", "N", "field", "parameters", "functions"}
    for key, e in sec.items():
        if key not in known:
            raise r.error(ModelSyntaxError, f"unknown [chart] entry {key}", e)
    if "parameters" in sec:
        e = sec["parameters"]
        for name in _names(e.value):
            if not re.fullmatch(r"[A-Za-z][A-Za-z0-9]*(?:_\d+)*", name):
                raise ModelSyntaxError(f"bad parameter name {name!r}", e.line, e.col, r.path)
            try:
                chart.declare_parameter(name)
            except SymbolError as exc:
                raise ModelError(str(exc), e.line, e.col, r.path) from None
    if "functions" in sec:
        e = sec["functions"]
        for item, offset in _split_functions(e.value):
            m = _FUNC.match(item)
            if not m:
                raise ModelSyntaxError(f"bad function declaration {item!r}", e.line, e.col + offset, r.path)
            args = _names(m.group(2))
            for a in args:
                if a not in {str(s) for s in chart.x + chart.phi}:
                    raise UndeclaredName(a, e.line, e.col + offset + item.index(a), r.path)
            try:
                chart.declare_function(m.group(1), args)
            except SymbolError as exc:
                raise ModelError(str(exc), e.line, e.col + offset, r.path) from None
    return chart


def _base_namespace(chart: FiberedChart, extra=None) -> Namespace:
    ns = chart_namespace(chart)
    names = {str(s): s for s in chart.x}
    names.update(chart.parameters)
    names.update({k: v for k, v in ns.names.items() if k in chart.functions})
    names.update(extra or {})
    return Namespace(names, ns.calls)


def _parse_metric(sec: dict, chart: FiberedChart, r: _Reader) -> MetricField:
    n = chart.n
    sig = r.choice(sec["signature"], SIGNATURES) if "signature" in sec else "mostly-minus"
    if "metric" in sec:
        e = sec["metric"]
        kind = r.choice(e, ("minkowski", "opaque", "opaque-diagonal"))
        extra = set(sec) - {"metric", "signature"}
        if extra:
            bad = sec[sorted(extra)[0]]
            raise r.error(DualDefinitionError, "metric given both by name and by components", bad)
        if kind == "minkowski":
            return MetricField.minkowski(n, chart.x)
        return MetricField.opaque(chart.x, diagonal=kind == "opaque-diagonal", signature=sig, chart=chart)
    ns = _base_namespace(chart)
    G = sp.zeros(n, n)
    seen = set()
    sqrtg = None
    for key, e in sec.items():
        if key == "signature":
            continue
        if key == "sqrtg":
            sqrtg = e
            continue
        m = re.fullmatch(r"g_(\d)(\d)", key)
        if not m:
            raise r.error(ModelSyntaxError, f"unknown [metric] entry {key}", e)
        a, b = sorted((int(m.group(1)), int(m.group(2))))
        if b >= n:
            raise r.error(IndexShapeError, f"{key} is out of range for n = {n}", e)
        if (a, b) in seen:
            raise r.error(DualDefinitionError, f"g_{a}{b} given twice", e)
        seen.add((a, b))
        G[a, b] = G[b, a] = r.expr(e, ns)
    for a in range(n):
        if (a, a) not in seen:
            raise ModelError(f"[metric] is missing g_{a}{a}", 0, 0, r.path)
    s = r.expr(sqrtg, ns) if sqrtg is not None else None
    try:
        return MetricField(chart.x, G, signature=sig, sqrtg=s)
    except ValueError as exc:
        e = sqrtg or next(iter(sec.values()))
        raise ModelError(str(exc), e.line, e.col, r.path) from None


def _metric_names(metric: Optional[MetricField]) -> dict:
    return metric.names() if metric is not None else {}


def _helpers(sec: dict, reserved, ns: Namespace, r: _Reader) -> Namespace:
    """Named helper expressions, defined in file order."""
    names, calls = dict(ns.names), dict(ns.calls)
    for key, e in sec.items():
        if key in reserved:
            continue
        if not re.fullmatch(r"[A-Za-z][A-Za-z0-9]*(?:_\d+)*", key):
            raise r.error(ModelSyntaxError, f"bad helper name {key!r}", e)
        if key in names or key in calls:
            raise r.error(ModelError, f"helper {key} shadows a declared name", e)
        names[key] = r.expr(e, Namespace(names, calls))
    return Namespace(names, calls)


def _parse_lagrangian(sec: dict, chart, metric, r: _Reader) -> LagrangianModel:
    if "L" not in sec:
        raise ModelError("[lagrangian] needs L", 0, 0, r.path)
    mode = r.choice(sec["mode"], SEPARATION_MODES) if "mode" in sec else "top-form"
    base = chart_namespace(chart, _metric_names(metric))
    ns = _helpers(sec, {"L", "mode", "sources"}, base, r)
    L = r.expr(sec["L"], ns)
    sources = {}
    if "sources" in sec:
        e = sec["sources"]
        for name in _names(e.value):
            if name not in chart.functions:
                raise UndeclaredName(name, e.line, e.col + e.value.index(name), r.path)
            sources[name] = chart.functions[name]
    if mode == "volume-form":
        if metric is None:
            raise r.error(ModelError, "volume-form separation needs a [metric]", sec["mode"], False)
        L = metric.sqrtg * L
    try:
        return LagrangianModel(chart, L, metric, mode, sources)
    except ValueError as exc:
        e = sec.get("mode", sec["L"])
        raise ModelError(str(exc), e.line, e.col, r.path) from None


def _parse_hamiltonian(sec: dict, chart, metric, r: _Reader) -> HamiltonianModel:
    if "H" not in sec:
        raise ModelError("[hamiltonian] needs H", 0, 0, r.path)
    base = chart_namespace(chart, _metric_names(metric))
    for v in chart.velocities:
        base.names.pop(str(v), None)
    ns = _helpers(sec, {"H"}, base, r)
    return HamiltonianModel(chart, r.expr(sec["H"], ns), metric, {"source": "model file"})


def _parse_connection(sec: dict, chart, metric, r: _Reader):
    kind = r.choice(sec["mode"], CONNECTION_KINDS) if "mode" in sec else "none"
    n, N = chart.n, chart.N
    if kind == "none":
        return kind, None
    if kind != "explicit":
        if metric is None:
            raise r.error(ModelError, "the Levi-Civita connection needs a [metric]", sec["mode"], False)
        extra = set(sec) - {"mode"}
        if extra:
            raise r.error(DualDefinitionError, "explicit potentials given with a named connection",
                          sec[sorted(extra)[0]])
        gamma = christoffel(metric)
        if chart.field == "covector":
            lc = levi_civita_on_covectors(gamma)
            A1 = antisymmetrized(lc) if kind == "antisymmetrized-levi-civita" else lc
            return kind, (A1, dual_connection(lift_connection(lc)), gamma)
        if kind == "antisymmetrized-levi-civita":
            raise r.error(ModelError, "the antisymmetrized connection needs a covector field",
                          sec["mode"], False)
        if chart.field != "scalar":
            raise r.error(ModelError, "named connections support scalar and covector fields",
                          sec["mode"], False)
        zero = ConnectionCoefficients.zeros(N, n)
        return kind, (zero, zero, gamma)
    names = {str(s): s for s in chart.x + chart.phi}
    names.update(chart.parameters)
    names.update(_metric_names(metric))
    ns = Namespace(names, chart_namespace(chart).calls)
    slots = {"A1": {}, "A2": {}, "Gamma": {}}
    shapes = {"A1": (N, N, n), "A2": (N, N, n), "Gamma": (n, n, n)}
    for key, e in sec.items():
        if key == "mode":
            continue
        name, idx = _indices(key)
        if name not in slots or len(idx) != 3:
            raise r.error(ModelSyntaxError, f"unknown [connection] entry {key}", e)
        if any(i >= s for i, s in zip(idx, shapes[name])):
            raise r.error(IndexShapeError, f"{key} is out of range", e)
        value = r.expr(e, ns)
        if name == "Gamma" and value.free_symbols & set(chart.phi):
            raise r.error(ModelError, "Gamma may depend on x only", e, False)
        slots[name][idx] = value

    def build(name, role, bundle):
        shape = shapes[name]
        return ConnectionCoefficients(_grid(shape, lambda *i: slots[name].get(i, sp.Integer(0))),
                                      role, bundle)

    return kind, (build("A1", "field", "E"), build("A2", "field", "V*E"), build("Gamma", "base", "TM"))


def _parse_projection(sec: dict, chart, r: _Reader) -> VerticalProjection:
    n, N = chart.n, chart.N
    names = {str(s): s for s in chart.coordinates}
    names.update(chart.parameters)
    ns = Namespace(names, chart_namespace(chart).calls)
    field_, mom = {}, {}
    for key, e in sec.items():
        name, idx = _indices(key)
        if name == "V" and len(idx) == 2:
            if idx[0] >= N or idx[1] >= n:
                raise r.error(IndexShapeError, f"{key} is out of range for N = {N}, n = {n}", e)
            value = r.expr(e, ns)
            if value.free_symbols & {p for row in chart.pi for p in row}:
                raise r.error(ModelError, "V^I_a may not depend on momenta", e, False)
            field_[idx] = value
        elif name == "W" and len(idx) == 3:
            if idx[0] >= n or idx[1] >= N or idx[2] >= n:
                raise r.error(IndexShapeError, f"{key} is out of range for N = {N}, n = {n}", e)
            mom[idx] = r.expr(e, ns)
        else:
            raise r.error(ModelSyntaxError, f"unknown [projection] entry {key}", e)
    return VerticalProjection.from_function(
        chart, lambda i, a: field_.get((i, a), sp.Integer(0)),
        (lambda b, i, a: mom.get((b, i, a), sp.Integer(0))) if mom else None)


SOLVE_DEFAULTS = {"M": 256, "cfl": sp.Rational(1, 2), "steps": 1000, "cadence": 10,
                  "length": 2 * sp.pi, "init_phi": None, "init_pi": sp.Integer(0), "snapshots": 0}


def _parse_solve(sec: dict, chart, r: _Reader):
    settings = dict(SOLVE_DEFAULTS)
    bindings, values = {}, {}
    x_ns = Namespace({**{str(s): s for s in chart.x}, "pi": sp.pi}, dict(BUILTINS))
    for key, e in sec.items():
        m = _FUNC.match(key)
        if m:
            fname = m.group(1)
            if fname not in chart.functions:
                raise UndeclaredName(fname, e.line, e.key_col, r.path)
            app = chart.functions[fname]
            args = _names(m.group(2))
            if args != [str(a) for a in app.args]:
                raise r.error(IndexShapeError, f"binding for {fname} must use arguments "
                              f"({', '.join(map(str, app.args))})", e)
            bindings[fname] = r.expr(e, x_ns, canonicalize=False)
        elif key in chart.parameters:
            values[key] = r.number(e)
        elif key in ("M", "steps", "cadence", "snapshots"):
            settings[key] = r.integer(e, low=0 if key == "snapshots" else 1)
        elif key in ("cfl", "length"):
            settings[key] = r.number(e)
            if not settings[key] > 0:
                raise ModelError(f"{key} must be positive", e.line, e.col, r.path)
        elif key in ("init_phi", "init_pi"):
            settings[key] = r.expr(e, x_ns, canonicalize=False)
        else:
            raise r.error(ModelSyntaxError, f"unknown [solve] entry {key}", e)
    return settings, bindings, values


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def parse_model_text(text: str, path: str = "<model>") -> ModelFile:
    r = _Reader(path)
    secs = _sections(text, path)
    if "chart" not in secs:
        raise ModelError("missing [chart] section", 0, 0, path)
    if "lagrangian" in secs and "hamiltonian" in secs:
        e = next(iter(secs["hamiltonian"].values()), None)
        raise DualDefinitionError("both [lagrangian] and [hamiltonian] are defined; give exactly one",
                                  e.line if e else 0, e.key_col if e else 0, path)
    if "lagrangian" not in secs and "hamiltonian" not in secs:
        raise ModelError("one of [lagrangian] or [hamiltonian] is required", 0, 0, path)
    chart = _parse_chart(secs["chart"], r)
    metric = _parse_metric(secs["metric"], chart, r) if "metric" in secs else None
    model = ModelFile(path, text, chart, metric)
    if "lagrangian" in secs:
        model.lagrangian = _parse_lagrangian(secs["lagrangian"], chart, metric, r)
    else:
        model.hamiltonian = _parse_hamiltonian(secs["hamiltonian"], chart, metric, r)
    if "connection" in secs:
        model.connection, model.potentials = _parse_connection(secs["connection"], chart, metric, r)
    if "projection" in secs:
        if model.connection != "none":
            e = next(iter(secs["projection"].values()))
            raise DualDefinitionError("[projection] and a [connection] route are both given",
                                      e.line, e.key_col, path)
        model.projection = _parse_projection(secs["projection"], chart, r)
    if "solve" in secs:
        model.solve, model.bindings, model.parameter_values = _parse_solve(secs["solve"], chart, r)
    return model


def bundled_models() -> list:
    return sorted(p.name[:-len(".model")] for p in resources.files("covham.models").iterdir()
                  if p.name.endswith(".model"))


def model_path(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    if name_or_path in bundled_models():
        return Path(str(resources.files("covham.models") / f"{name_or_path}.model"))
    raise FileNotFoundError(f"no model file or bundled model named {name_or_path!r}")


def parse_model(path) -> ModelFile:
    """Read and validate a model file (a path or the name of a bundled model)."""
    p = model_path(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ModelError(f"not valid UTF-8: {exc}", 0, 0, str(p)) from None
    return parse_model_text(text, str(path))
