"""
Fiber geometry
--------------

Metrics, Levi-Civita data, curvature, vertical projections, vertical lifts
and the connections induced on the phase space P = V*E (x) TM.

Connection potentials are stored as ``coeff[upper][lower][direction]`` so
that a section of a vector bundle is differentiated as

    (nabla_a s)^I = d_a s^I + A^I_{J a} s^J

and a section of the dual bundle as

    (nabla_a s)_I = d_a s_I + s_J B^J_{I a}

with B the potentials of the dual connection.

"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import sympy as sp

from .kernel import FiberedChart, SymbolError, canonical, is_zero, registered_function


def _grid(shape, fn):
    if len(shape) == 1:
        return tuple(fn(i) for i in range(shape[0]))
    return tuple(_grid(shape[1:], lambda *rest, i=i: fn(i, *rest)) for i in range(shape[0]))


# ---------------------------------------------------------------------------
# metric
# ---------------------------------------------------------------------------

SIGNATURES = ("mostly-minus", "mostly-plus", "riemannian")


class MetricField:
    """Symmetric metric g_ab(x) with explicit inverse and volume factor sqrtg.

    The inverse is the adjugate over the determinant (or 1/g_aa when the
    metric is diagonal), so g^ac g_cb = delta^a_b holds by exact
    cancellation.  sqrtg is sqrt(|det g|); it is either supplied and
    checked against the determinant, or derived.
    """

    def __init__(self, x: Sequence[sp.Symbol], components, signature: str = "mostly-minus",
                 sqrtg=None, name: str = "g"):
        if signature not in SIGNATURES:
            raise ValueError(f"unknown signature tag {signature!r}")
        G = sp.Matrix(components).applyfunc(canonical)
        n = len(x)
        if G.shape != (n, n):
            raise ValueError(f"metric must be {n}x{n}, got {G.shape}")
        if not all(is_zero(G[a, b] - G[b, a]) for a in range(n) for b in range(a)):
            raise ValueError("metric components are not symmetric")
        self.x, self.n, self.g, self.signature, self.name = tuple(x), n, G, signature, name
        self.det = canonical(G.det(method="berkowitz"))
        self.diagonal = all(G[a, b] == 0 for a in range(n) for b in range(n) if a != b)
        if self.diagonal:
            self.inverse = sp.diag(*[canonical(1 / G[a, a]) for a in range(n)])
        else:
            adj = G.adjugate(method="berkowitz")
            self.inverse = adj.applyfunc(lambda e: canonical(e / self.det))
        self._sign = {"riemannian": 1, "mostly-plus": -1}.get(signature, (-1) ** (n - 1))
        if sqrtg is None:
            sqrtg = sp.sqrt(self._sign * self.det)
        else:
            sqrtg = sp.sympify(sqrtg)
            if not is_zero(sqrtg ** 2 - self._sign * self.det):
                raise ValueError("sqrtg does not square to |det g|")
        self.sqrtg = sqrtg

    def __repr__(self):
        return f"MetricField(n={self.n}, signature={self.signature!r})"

    @property
    def volume_sign(self) -> int:
        """Sign s with sqrtg^2 = s det g."""
        return self._sign

    def component(self, a: int, b: int) -> sp.Expr:
        return self.g[a, b]

    def inv(self, a: int, b: int) -> sp.Expr:
        return self.inverse[a, b]

    @classmethod
    def minkowski(cls, n: int, x: Optional[Sequence[sp.Symbol]] = None) -> "MetricField":
        x = x or tuple(sp.Symbol(f"x{a}") for a in range(n))
        return cls(x, sp.diag(1, *([-1] * (n - 1))), sqrtg=1)

    @classmethod
    def opaque(cls, x: Sequence[sp.Symbol], diagonal: bool = False, signature: str = "mostly-minus",
               name: str = "g", chart: Optional[FiberedChart] = None) -> "MetricField":
        """Metric with opaque components g_ab(x), a <= b, and opaque sqrtg(x).

        sqrtg carries the registered identity
        d_c sqrtg = 1/2 sqrtg g^ab d_c g_ab.
        """
        x = tuple(x)
        n = len(x)
        G = sp.zeros(n, n)
        for a in range(n):
            for b in range(a, n):
                if diagonal and a != b:
                    continue
                G[a, b] = G[b, a] = sp.Function(f"{name}_{a}{b}")(*x)
        m = cls.__new__(cls)
        holder = {}

        def dsqrtg(args, i):
            rep = dict(zip(x, args))
            ginv = holder["inverse"]
            return sp.Rational(1, 2) * holder["fn"](*args) * sum(
                (ginv[a, b] * sp.diff(G[a, b], x[i])).xreplace(rep)
                for a in range(n) for b in range(n))

        fn = registered_function("sqrtg", dsqrtg)
        holder["fn"] = fn
        sqrtg = fn(*x)
        # skip the square check, which cannot see through the opaque atom
        MetricField.__init__(m, x, G, signature=signature, sqrtg=None, name=name)
        m.sqrtg = sqrtg
        holder["inverse"] = m.inverse
        if chart is not None:
            for a in range(n):
                for b in range(a, n):
                    if G[a, b] != 0:
                        chart.register(f"{name}_{a}{b}", G[a, b])
            chart.register("sqrtg", sqrtg)
        return m

    def names(self) -> dict:
        """Names usable in model expressions: g_ab, ginv_ab, sqrtg."""
        out = {"sqrtg": self.sqrtg}
        for a in range(self.n):
            for b in range(self.n):
                out[f"{self.name}_{a}{b}"] = self.g[a, b]
                out[f"{self.name}inv_{a}{b}"] = self.inverse[a, b]
        return out


# ---------------------------------------------------------------------------
# connections and curvature
# ---------------------------------------------------------------------------

CONNECTION_MODES = ("potentials", "antisymmetrized")


@dataclass(frozen=True)
class ConnectionCoefficients:
    """Potentials coeff[upper][lower][direction].

    role is "base" for Gamma on TM and "field" for potentials on E, VE or
    V*E (bundle records which).  mode "antisymmetrized" marks the
    antisymmetrized Levi-Civita connection on covector fields.
    """

    coeff: tuple
    role: str = "field"
    bundle: str = "E"
    mode: str = "potentials"

    def __post_init__(self):
        if self.mode not in CONNECTION_MODES:
            raise ValueError(f"unknown connection mode {self.mode!r}")

    def __getitem__(self, idx):
        a, b, c = idx
        return self.coeff[a][b][c]

    @property
    def rank(self) -> int:
        return len(self.coeff)

    @property
    def dimension(self) -> int:
        return len(self.coeff[0][0]) if self.coeff and self.coeff[0] else 0

    @classmethod
    def zeros(cls, rank: int, n: int, role: str = "field", bundle: str = "E") -> "ConnectionCoefficients":
        return cls(_grid((rank, rank, n), lambda *_: sp.Integer(0)), role, bundle)

    @classmethod
    def from_function(cls, rank: int, n: int, fn, role: str = "field", bundle: str = "E"):
        return cls(_grid((rank, rank, n), lambda a, b, c: canonical(fn(a, b, c))), role, bundle)

    def map(self, fn) -> "ConnectionCoefficients":
        return ConnectionCoefficients(_grid((self.rank, self.rank, self.dimension),
                                            lambda a, b, c: canonical(fn(self.coeff[a][b][c]))),
                                      self.role, self.bundle, self.mode)

    def is_torsion_free(self) -> bool:
        n = self.dimension
        return all(is_zero(self[a, b, c] - self[a, c, b])
                   for a in range(self.rank) for b in range(n) for c in range(b))


def christoffel(g: MetricField) -> ConnectionCoefficients:
    """Gamma^a_bc = 1/2 g^ae (-d_e g_bc + d_c g_eb + d_b g_ce)."""
    n, x, G, Gi = g.n, g.x, g.g, g.inverse
    dG = [[[sp.diff(G[b, c], x[e]) for e in range(n)] for c in range(n)] for b in range(n)]

    def gamma(a, b, c):
        return sp.Rational(1, 2) * sum(
            Gi[a, e] * (-dG[b][c][e] + dG[e][b][c] + dG[c][e][b]) for e in range(n))

    return ConnectionCoefficients.from_function(n, n, gamma, role="base", bundle="TM")


@dataclass(frozen=True)
class CurvatureTensors:
    riemann: tuple   # [a][b][c][d] = R^a_bcd
    ricci: tuple     # [a][b]
    scalar: sp.Expr


def curvature(g: MetricField, gamma: Optional[ConnectionCoefficients] = None) -> CurvatureTensors:
    """Riemann, Ricci and scalar curvature of g.

    R^a_bcd = d_c Gamma^a_bd - d_d Gamma^a_bc + Gamma^a_ec Gamma^e_bd - Gamma^e_bc Gamma^a_ed,
    R_ab = R^c_acb, R = g^ab R_ab.
    """
    n, x = g.n, g.x
    G = gamma or christoffel(g)

    def riem(a, b, c, d):
        return canonical(sp.diff(G[a, b, d], x[c]) - sp.diff(G[a, b, c], x[d])
                         + sum(G[a, e, c] * G[e, b, d] - G[e, b, c] * G[a, e, d] for e in range(n)))

    R = _grid((n, n, n, n), riem)
    ric = _grid((n, n), lambda a, b: canonical(sum(R[c][a][c][b] for c in range(n))))
    scalar = canonical(sum(g.inverse[a, b] * ric[a][b] for a in range(n) for b in range(n)))
    return CurvatureTensors(R, ric, scalar)


def levi_civita_on_covectors(gamma: ConnectionCoefficients) -> ConnectionCoefficients:
    """Field potentials of the Levi-Civita connection acting on covector fields.

    nabla_c A_a = d_c A_a - Gamma^b_ac A_b, i.e. coeff[a][b][c] = -Gamma^b_ac.
    """
    n = gamma.dimension
    return ConnectionCoefficients.from_function(n, n, lambda a, b, c: -gamma[b, a, c],
                                                role="field", bundle="E")


def antisymmetrized(conn: ConnectionCoefficients) -> ConnectionCoefficients:
    """Mark a covector-field connection as antisymmetrized.

    The field part of nabla_P then becomes 1/2 (nabla_b A_a - nabla_a A_b).
    """
    return ConnectionCoefficients(conn.coeff, conn.role, conn.bundle, "antisymmetrized")


def lift_connection(conn: ConnectionCoefficients) -> ConnectionCoefficients:
    """Connection on VE with the same potentials as the connection on E."""
    return ConnectionCoefficients(conn.coeff, conn.role, "VE", conn.mode)


def dual_connection(conn: ConnectionCoefficients) -> ConnectionCoefficients:
    """Dual connection: potentials differ by a sign."""
    bundle = {"VE": "V*E", "V*E": "VE", "E": "E*", "E*": "E"}.get(conn.bundle, conn.bundle)
    out = conn.map(lambda e: -e)
    return ConnectionCoefficients(out.coeff, conn.role, bundle, "potentials")


def nabla_vector(conn: ConnectionCoefficients, s: Sequence[sp.Expr], x: Sequence[sp.Symbol]) -> tuple:
    """[I][a] components of nabla_a s^I for a section s of a vector bundle."""
    N, n = len(s), len(x)
    return _grid((N, n), lambda i, a: canonical(
        sp.diff(s[i], x[a]) + sum(conn[i, j, a] * s[j] for j in range(N))))


def nabla_covector(dual: ConnectionCoefficients, s: Sequence[sp.Expr], x: Sequence[sp.Symbol]) -> tuple:
    """[I][a] components of nabla_a s_I for a section of the dual bundle."""
    N, n = len(s), len(x)
    return _grid((N, n), lambda i, a: canonical(
        sp.diff(s[i], x[a]) + sum(s[j] * dual[j, i, a] for j in range(N))))


# ---------------------------------------------------------------------------
# tangent vectors, projections, sections, lifts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TangentVector:
    """Components of u = u^a d/dx^a + u^I d/dphi^I (+ u^a_I d/dpi^a_I)."""

    x: tuple
    phi: tuple
    pi: Optional[tuple] = None   # [a][I]

    @property
    def is_vertical(self) -> bool:
        return all(is_zero(c) for c in self.x)

    def fiber(self) -> tuple:
        out = tuple(self.phi)
        if self.pi is not None:
            out += tuple(c for row in self.pi for c in row)
        return out

    @classmethod
    def vertical(cls, n: int, phi, pi=None) -> "TangentVector":
        return cls(tuple(sp.Integer(0) for _ in range(n)), tuple(phi),
                   None if pi is None else tuple(tuple(r) for r in pi))


@dataclass(frozen=True)
class VerticalProjection:
    """Coefficients V^I_a on E and optionally V^b_{I a} on P."""

    field: tuple                      # [I][a]
    momentum: Optional[tuple] = None  # [b][I][a]

    @property
    def N(self) -> int:
        return len(self.field)

    @property
    def n(self) -> int:
        return len(self.field[0])

    @classmethod
    def zero(cls, chart: FiberedChart, on_P: bool = True) -> "VerticalProjection":
        n, N = chart.n, chart.N
        mom = _grid((n, N, n), lambda *_: sp.Integer(0)) if on_P else None
        return cls(_grid((N, n), lambda *_: sp.Integer(0)), mom)

    @classmethod
    def from_function(cls, chart: FiberedChart, field_fn, momentum_fn=None) -> "VerticalProjection":
        n, N = chart.n, chart.N
        mom = None
        if momentum_fn is not None:
            mom = _grid((n, N, n), lambda b, i, a: canonical(momentum_fn(b, i, a)))
        return cls(_grid((N, n), lambda i, a: canonical(field_fn(i, a))), mom)

    def momentum_or_zero(self) -> tuple:
        if self.momentum is not None:
            return self.momentum
        return _grid((self.n, self.N, self.n), lambda *_: sp.Integer(0))

    def depends_on_fiber(self, chart: FiberedChart) -> bool:
        fiber = set(chart.phi) | {p for row in chart.pi for p in row}
        exprs = [c for row in self.field for c in row]
        exprs += [c for b in self.momentum_or_zero() for row in b for c in row]
        return any(e.free_symbols & fiber for e in exprs)


def apply_projection(V: VerticalProjection, u: TangentVector) -> TangentVector:
    """V(u): components V^I_a u^a + u^I (and V^b_{I a} u^a + u^b_I on P)."""
    n, N = V.n, V.N
    if len(u.x) != n or len(u.phi) != N:
        raise ValueError(f"tangent vector shape ({len(u.x)}, {len(u.phi)}) does not match ({n}, {N})")
    phi = tuple(canonical(sum(V.field[i][a] * u.x[a] for a in range(n)) + u.phi[i]) for i in range(N))
    pi = None
    if u.pi is not None:
        if len(u.pi) != n or any(len(r) != N for r in u.pi):
            raise ValueError("momentum components do not match the chart")
        W = V.momentum_or_zero()
        pi = _grid((n, N), lambda b, i: canonical(
            sum(W[b][i][a] * u.x[a] for a in range(n)) + u.pi[b][i]))
    return TangentVector(tuple(sp.Integer(0) for _ in range(n)), phi, pi)


@dataclass(frozen=True)
class FieldSection:
    """Section x -> (phi^I(x), pi^a_I(x)) over a chart."""

    chart: FiberedChart = field(repr=False)
    phi: tuple
    pi: Optional[tuple] = None   # [a][I]

    def __post_init__(self):
        fiber = set(self.chart.phi) | set(self.chart.velocities)
        fiber |= {p for row in self.chart.pi for p in row}
        for c in self.components():
            if sp.sympify(c).free_symbols & fiber:
                raise SymbolError("section components must depend on base coordinates only")

    def components(self) -> tuple:
        out = tuple(self.phi)
        if self.pi is not None:
            out += tuple(c for row in self.pi for c in row)
        return out

    @classmethod
    def generic(cls, chart: FiberedChart, prefix: str = "") -> "FieldSection":
        """Section with opaque component functions phiI(x), pi^a_I(x)."""
        x = chart.x
        phi = tuple(sp.Function(f"{prefix}phi{i}")(*x) for i in range(chart.N))
        pi = tuple(tuple(sp.Function(f"{prefix}pi^{a}_{i}")(*x) for i in range(chart.N))
                   for a in range(chart.n))
        return cls(chart, phi, pi)

    def point(self) -> dict:
        """Substitution map from fiber coordinates to section components."""
        out = dict(zip(self.chart.phi, self.phi))
        if self.pi is not None:
            for a in range(self.chart.n):
                out.update(zip(self.chart.pi[a], self.pi[a]))
        return out

    def at(self, e) -> sp.Expr:
        """Pull an expression on P back along the section."""
        return sp.sympify(e).xreplace(self.point())

    def tangent(self, a: int) -> TangentVector:
        """Push-forward of d/dx^a."""
        x = self.chart.x
        ex = tuple(sp.Integer(int(b == a)) for b in range(self.chart.n))
        phi = tuple(sp.diff(c, x[a]) for c in self.phi)
        pi = None if self.pi is None else _grid(
            (self.chart.n, self.chart.N), lambda b, i: sp.diff(self.pi[b][i], x[a]))
        return TangentVector(ex, phi, pi)


@dataclass(frozen=True)
class VerticalVector:
    """Vertical vector field along a section: fiber components over base."""

    base: FieldSection
    phi: tuple
    pi: Optional[tuple] = None


def vertical_lift(u: FieldSection, v: FieldSection) -> VerticalVector:
    """vl_u v, from w(f) = d/ds f(u + s v) at s = 0 on fiber coordinates."""
    if u.chart is not v.chart:
        if (u.chart.n, u.chart.N) != (v.chart.n, v.chart.N):
            raise ValueError("sections live on different charts")
    if (u.pi is None) != (v.pi is None):
        raise ValueError("sections of different bundles")
    s = sp.Dummy("s")

    def lift(a, b):
        return canonical(sp.diff(a + s * b, s).subs(s, 0))

    phi = tuple(lift(a, b) for a, b in zip(u.phi, v.phi))
    pi = None
    if u.pi is not None:
        pi = tuple(tuple(lift(a, b) for a, b in zip(ra, rb)) for ra, rb in zip(u.pi, v.pi))
    return VerticalVector(u, phi, pi)


# ---------------------------------------------------------------------------
# connection on P and its vertical lift
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovariantDerivative:
    """field[I][a] = nabla_a of the field part, momentum[b][I][a] likewise.

    With a contracting vector field Y, the last index is summed away.
    """

    field: tuple
    momentum: tuple
    vertical: bool = False

    def contract(self, Y: Sequence[sp.Expr]) -> "CovariantDerivative":
        f = tuple(canonical(sum(Y[a] * r[a] for a in range(len(Y)))) for r in self.field)
        m = tuple(tuple(canonical(sum(Y[a] * r[a] for a in range(len(Y)))) for r in b)
                  for b in self.momentum)
        return CovariantDerivative(f, m, self.vertical)


def _check_shapes(chart, A1, A2, Gamma):
    n, N = chart.n, chart.N
    if A1.rank != N or A2.rank != N or (A1.dimension, A2.dimension) != (n, n):
        raise ValueError("field potentials do not match the chart")
    if Gamma.rank != n or Gamma.dimension != n:
        raise ValueError("base connection does not match the chart")


def _nabla_on_P(chart, base_phi, phi, pi, A1, A2, Gamma):
    _check_shapes(chart, A1, A2, Gamma)
    n, N, x = chart.n, chart.N, chart.x
    at = dict(zip(chart.phi, base_phi))

    def pot(A, *idx):
        return A[idx].xreplace(at)

    nab = _grid((N, n), lambda i, a: sp.diff(phi[i], x[a]) + sum(pot(A1, i, j, a) * phi[j] for j in range(N)))
    if A1.mode == "antisymmetrized":
        if chart.field != "covector":
            raise ValueError("the antisymmetrized connection acts on covector fields only")
        field_part = _grid((N, n), lambda i, a: canonical((nab[i][a] - nab[a][i]) / 2))
    else:
        field_part = _grid((N, n), lambda i, a: canonical(nab[i][a]))
    mom = _grid((n, N, n), lambda b, i, a: canonical(
        sp.diff(pi[b][i], x[a])
        + sum(pi[b][j] * pot(A2, j, i, a) for j in range(N))
        + sum(pi[d][i] * Gamma[b, d, a] for d in range(n))))
    return field_part, mom


def nabla_P(gamma: FieldSection, A1: ConnectionCoefficients, A2: ConnectionCoefficients,
            Gamma: ConnectionCoefficients, Y: Optional[Sequence[sp.Expr]] = None) -> CovariantDerivative:
    """Connection induced on P, applied to the combined momentum components.

    field part:    d_a phi^I + phi^J A1^I_{J a}
    momentum part: d_a pi^b_I + pi^b_J A2^J_{I a} + pi^d_I Gamma^b_{d a}
    """
    if gamma.pi is None:
        raise ValueError("nabla_P needs a phase-space section")
    f, m = _nabla_on_P(gamma.chart, gamma.phi, gamma.phi, gamma.pi, A1, A2, Gamma)
    out = CovariantDerivative(f, m)
    return out.contract(Y) if Y is not None else out


def nabla_P_split(chart: FiberedChart, phi: Sequence[sp.Expr], splits, A1, A2, Gamma) -> CovariantDerivative:
    """nabla_P computed from an explicit factorization pi^b_I = sum_k g_{k,I} X_k^b.

    Each split term is differentiated as the tensor product of a dual field
    section g_k and a vector field X_k.
    """
    _check_shapes(chart, A1, A2, Gamma)
    n, N, x = chart.n, chart.N, chart.x
    at = dict(zip(chart.phi, phi))
    pi = _grid((n, N), lambda b, i: sum(g[i] * X[b] for g, X in splits))
    f, _ = _nabla_on_P(chart, phi, phi, pi, A1, A2, Gamma)

    def term(b, i, a):
        total = 0
        for g, X in splits:
            total += sp.diff(g[i] * X[b], x[a])
            total += X[b] * sum(g[j] * A2[j, i, a].xreplace(at) for j in range(N))
            total += g[i] * sum(X[d] * Gamma[b, d, a] for d in range(n))
        return canonical(total)

    return CovariantDerivative(f, _grid((n, N, n), term))


def nabla_VP(w: VerticalVector, A1: ConnectionCoefficients, A2: ConnectionCoefficients,
             Gamma: ConnectionCoefficients) -> CovariantDerivative:
    """Connection on VP with the potentials of nabla_P, applied to w = vl_g1 g2.

    Returns the vertical-vector-valued one-form vl_g1(nabla_P g2).
    """
    if w.pi is None:
        raise ValueError("nabla_VP needs a vertical vector on P")
    chart = w.base.chart
    f, m = _nabla_on_P(chart, w.phi, w.phi, w.pi, A1, A2, Gamma)
    return CovariantDerivative(f, m, vertical=True)
