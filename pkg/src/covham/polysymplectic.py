"""
Polysymplectic structures
-------------------------

Tautological tensor theta, the TM-valued two-form omega, the Poisson
sections sigma_f, the Poisson tensor Pi and the one-form valued bracket.

Two-forms are evaluated with the argument order of the source derivation,
(a ^ b)(u, v) = a(v) b(u) - a(u) b(v), so that
d(c_k dz^k)(u, v) = d_l c_k (u^k v^l - u^l v^k)
and omega(u, v) = beta_a (u^a_I v^I - u^I v^a_I).  With this order the
unknown of Hamilton's equations and of the Poisson-section condition sits
in the second slot: omega(v, X) = dH(v).

"""

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

import sympy as sp

from .geometry import TangentVector, VerticalProjection, _grid
from .kernel import FiberedChart, canonical, is_zero


# ---------------------------------------------------------------------------
# theta and omega
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TautologicalTensor:
    """theta = dphi[a][I] dphi^I (x) d_a + dx[a][b] dx^b (x) d_a."""

    chart: FiberedChart = field(repr=False)
    dphi: tuple   # [a][I] = pi^a_I
    dx: tuple     # [a][b] = pi^a_I V^I_b

    def contract(self, beta: Sequence[sp.Expr]) -> dict:
        """theta contracted with a base one-form beta: a one-form on P.

        Returned as {coordinate symbol: coefficient} over x and phi.
        """
        c = self.chart
        out = {}
        for b in range(c.n):
            out[c.x[b]] = canonical(sum(beta[a] * self.dx[a][b] for a in range(c.n)))
        for i in range(c.N):
            out[c.phi[i]] = canonical(sum(beta[a] * self.dphi[a][i] for a in range(c.n)))
        return out


def build_theta(chart: FiberedChart, V: VerticalProjection) -> TautologicalTensor:
    n, N = chart.n, chart.N
    if V.N != N or V.n != n:
        raise ValueError("projection does not match the chart")
    dphi = _grid((n, N), lambda a, i: chart.pi[a][i])
    dx = _grid((n, n), lambda a, b: canonical(sum(chart.pi[a][i] * V.field[i][b] for i in range(N))))
    return TautologicalTensor(chart, dphi, dx)


def _full(chart: FiberedChart, u: TangentVector) -> tuple:
    if len(u.x) != chart.n or len(u.phi) != chart.N:
        raise ValueError("tangent vector does not match the chart")
    pi = u.pi if u.pi is not None else _grid((chart.n, chart.N), lambda *_: 0)
    return tuple(u.x) + tuple(u.phi) + tuple(c for row in pi for c in row)


def exterior_derivative(form: dict, coords: Sequence[sp.Symbol], u: Sequence, v: Sequence) -> sp.Expr:
    """d(c_k dz^k)(u, v) for a one-form given as {z^k: c_k}."""
    total = 0
    index = {s: k for k, s in enumerate(coords)}
    # only directions carried by u or v contribute
    live = [(l, zl) for l, zl in enumerate(coords) if u[l] != 0 or v[l] != 0]
    for zk, ck in form.items():
        k = index[zk]
        if u[k] == 0 and v[k] == 0:
            continue
        for l, zl in live:
            d = sp.diff(ck, zl)
            if d != 0:
                total += d * (u[k] * v[l] - u[l] * v[k])
    return canonical(total)


class ProjectionDependenceError(AssertionError):
    """omega changed when the vertical projection was switched off."""


def build_omega(chart: FiberedChart, V: VerticalProjection, beta: Sequence[sp.Expr],
                u: TangentVector, v: TangentVector, certify: bool = True) -> sp.Expr:
    """-d(theta . beta)(u, v) for vertical u, v, computed from theta.

    With ``certify`` the value is recomputed with V = 0 and the two are
    required to agree exactly.
    """
    if not (u.is_vertical and v.is_vertical):
        raise ValueError("omega is defined on vertical vectors only")
    coords = chart.coordinates
    U, W = _full(chart, u), _full(chart, v)
    value = canonical(-exterior_derivative(build_theta(chart, V).contract(beta), coords, U, W))
    if certify:
        flat = -exterior_derivative(
            build_theta(chart, VerticalProjection.zero(chart)).contract(beta), coords, U, W)
        if not is_zero(value - flat):
            raise ProjectionDependenceError("omega depends on the vertical projection")
    return value


class PolysymplecticForm:
    """omega = dphi^I ^ dpi^a_I (x) d_a as a constant coordinate tensor."""

    def __init__(self, chart: FiberedChart):
        self.chart = chart

    def __call__(self, u: TangentVector, v: TangentVector) -> tuple:
        """TM-valued value: component a is u^a_I v^I - u^I v^a_I."""
        if not (u.is_vertical and v.is_vertical):
            raise ValueError("omega is defined on vertical vectors only")
        c = self.chart
        upi = u.pi or _grid((c.n, c.N), lambda *_: 0)
        vpi = v.pi or _grid((c.n, c.N), lambda *_: 0)
        return tuple(canonical(sum(upi[a][i] * v.phi[i] - u.phi[i] * vpi[a][i] for i in range(c.N)))
                     for a in range(c.n))

    def evaluate(self, u: TangentVector, v: TangentVector, beta: Sequence[sp.Expr]) -> sp.Expr:
        return canonical(sum(b * w for b, w in zip(beta, self(u, v))))

    def contract_one_form(self, v: TangentVector, s: Sequence[TangentVector]) -> sp.Expr:
        """omega(v, s) for a vertical-valued one-form s = s_a (x) dx^a.

        The TM value of omega(v, s_a) is paired with the dx^a slot of s.
        """
        return canonical(sum(self(v, s[a])[a] for a in range(self.chart.n)))


# ---------------------------------------------------------------------------
# Poisson sections, tensor and bracket
# ---------------------------------------------------------------------------

def _dphi(chart, f):
    return tuple(sp.diff(f, p) for p in chart.phi)


def _dpi(chart, f):
    return _grid((chart.n, chart.N), lambda a, i: sp.diff(f, chart.pi[a][i]))


@dataclass(frozen=True)
class PoissonSection:
    """s = field[I][a] d/dphi^I (x) dx^a + momentum[b][I][a] d/dpi^b_I (x) dx^a."""

    chart: FiberedChart = field(repr=False)
    field: tuple          # [I][a]
    momentum: tuple       # [b][I][a]
    trace_free: Optional[tuple] = None   # [b][I][a], trace over b = a vanishes

    def components(self) -> tuple:
        """Momentum components including the trace-free part."""
        if self.trace_free is None:
            return self.momentum
        c = self.chart
        return _grid((c.n, c.N, c.n), lambda b, i, a: canonical(
            self.momentum[b][i][a] + self.trace_free[b][i][a]))

    def vector(self, a: int) -> TangentVector:
        """The vertical vector s_a paired with dx^a."""
        c, mom = self.chart, self.components()
        return TangentVector.vertical(c.n, [self.field[i][a] for i in range(c.N)],
                                      _grid((c.n, c.N), lambda b, i: mom[b][i][a]))

    def __call__(self, dg: sp.Expr) -> tuple:
        """s(dg): one-form components over a, for a phase-space function g."""
        c, mom = self.chart, self.components()
        gphi, gpi = _dphi(c, dg), _dpi(c, dg)
        return tuple(canonical(sum(self.field[i][a] * gphi[i] for i in range(c.N))
                               + sum(mom[b][i][a] * gpi[b][i] for b in range(c.n) for i in range(c.N)))
                     for a in range(c.n))

    def trace(self) -> tuple:
        """Momentum-direction trace sum_a s^a_{I a}, one entry per I."""
        c, mom = self.chart, self.components()
        return tuple(canonical(sum(mom[a][i][a] for a in range(c.n))) for i in range(c.N))

    def family_residual(self, f: sp.Expr, v: TangentVector) -> sp.Expr:
        """omega(v, s) - df(v) for a vertical vector v."""
        c = self.chart
        omega = PolysymplecticForm(c)
        lhs = omega.contract_one_form(v, [self.vector(a) for a in range(c.n)])
        df = sum(sp.diff(f, c.phi[i]) * v.phi[i] for i in range(c.N))
        if v.pi is not None:
            df += sum(sp.diff(f, c.pi[a][i]) * v.pi[a][i] for a in range(c.n) for i in range(c.N))
        return canonical(lhs - df)


def sigma_section(f: sp.Expr, chart: FiberedChart) -> PoissonSection:
    """sigma_f = df/dpi^a_I d/dphi^I (x) dx^a - delta^b_a df/dphi^J d/dpi^b_J (x) dx^a."""
    f = sp.sympify(f)
    fphi, fpi = _dphi(chart, f), _dpi(chart, f)
    fld = _grid((chart.N, chart.n), lambda i, a: canonical(fpi[a][i]))
    mom = _grid((chart.n, chart.N, chart.n),
                lambda b, i, a: canonical(-fphi[i]) if a == b else sp.Integer(0))
    return PoissonSection(chart, fld, mom)


class PoissonTensor:
    """Pi = -d/dphi^I ^ d/dpi^a_I (x) dx^a.

    Covectors on P are given as {coordinate symbol: coefficient}; the value
    is a one-form on the base, one component per a.
    """

    def __init__(self, chart: FiberedChart):
        self.chart = chart

    def __call__(self, a: dict, b: dict) -> tuple:
        c = self.chart

        def comp(w, s):
            return w.get(s, 0)

        return tuple(canonical(sum(-comp(a, c.phi[i]) * comp(b, c.pi[al][i])
                                   + comp(a, c.pi[al][i]) * comp(b, c.phi[i]) for i in range(c.N)))
                     for al in range(c.n))

    def section(self, a: dict) -> PoissonSection:
        """Pi(-, a, -) as a vertical-valued one-form."""
        c = self.chart
        fld = _grid((c.N, c.n), lambda i, al: canonical(a.get(c.pi[al][i], 0)))
        mom = _grid((c.n, c.N, c.n),
                    lambda b, i, al: canonical(-a.get(c.phi[i], 0)) if al == b else sp.Integer(0))
        return PoissonSection(c, fld, mom)


def differential(f: sp.Expr, chart: FiberedChart) -> dict:
    """df as {coordinate: coefficient}."""
    f = sp.sympify(f)
    return {s: canonical(sp.diff(f, s)) for s in chart.coordinates}


def poisson_bracket(f: sp.Expr, g: sp.Expr, chart: FiberedChart) -> tuple:
    """{f, g}_a = df/dphi^I dg/dpi^a_I - df/dpi^a_I dg/dphi^I."""
    f, g = sp.sympify(f), sp.sympify(g)
    fphi, fpi, gphi, gpi = _dphi(chart, f), _dpi(chart, f), _dphi(chart, g), _dpi(chart, g)
    return tuple(canonical(sum(fphi[i] * gpi[a][i] - fpi[a][i] * gphi[i] for i in range(chart.N)))
                 for a in range(chart.n))


def jacobi_sum(f, g, h, chart: FiberedChart) -> tuple:
    """Componentwise would-be Jacobi sum J[a][b].

    J[a][b] = {f, {g,h}_b}_a + {g, {h,f}_b}_a + {h, {f,g}_b}_a.
    """
    gh, hf, fg = (poisson_bracket(p, q, chart) for p, q in ((g, h), (h, f), (f, g)))
    n = chart.n
    return _grid((n, n), lambda a, b: canonical(
        poisson_bracket(f, gh[b], chart)[a] + poisson_bracket(g, hf[b], chart)[a]
        + poisson_bracket(h, fg[b], chart)[a]))


def random_polynomial(chart: FiberedChart, rng: random.Random, terms: int = 3, degree: int = 2,
                      include_x: bool = False) -> sp.Expr:
    """Random polynomial with small integer coefficients in the fiber coordinates."""
    gens = list(chart.phi) + [p for row in chart.pi for p in row]
    if include_x:
        gens += list(chart.x)
    e = 0
    for _ in range(terms):
        mono = sp.Integer(rng.choice([-3, -2, -1, 1, 2, 3]))
        for _ in range(rng.randint(1, degree)):
            mono *= rng.choice(gens)
        e += mono
    return canonical(e)


def find_jacobi_witness(chart: FiberedChart, seed: int = 0, attempts: int = 200):
    """Search for (f, g, h) whose componentwise Jacobi sum does not vanish.

    Returns (f, g, h, J) with J verified nonzero symbolically, or None.
    """
    rng = random.Random(seed)
    for _ in range(attempts):
        f, g, h = (random_polynomial(chart, rng) for _ in range(3))
        J = jacobi_sum(f, g, h, chart)
        if any(not is_zero(c) for row in J for c in row):
            return f, g, h, J
    return None
