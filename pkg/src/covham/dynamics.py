"""
Dynamics
--------

Covariant Legendre transform, Hamilton's field equations by the projection
route and by the connection route, the modified Hamiltonian, and the
reduction of the first-order system to second-order PDEs.

Velocity and momentum vectors are ordered by (I, a) with I major:
velocity dphiI_a pairs with momentum pi^a_I.

"""

import random
from dataclasses import dataclass, field
from typing import Optional

import sympy as sp
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from .geometry import (ConnectionCoefficients, FieldSection, MetricField, TangentVector,
                       VerticalProjection, _grid, apply_projection, nabla_VP, vertical_lift)
from .kernel import FiberedChart, canonical, is_zero, opaque_atoms
from .polysymplectic import PolysymplecticForm


class LegendreError(ValueError):
    """The Lagrangian is outside the supported fragment."""


class NonInvertibleLegendre(Exception):
    """The velocity to momentum map cannot be inverted.

    Carries the symbolic momenta, the reason and the ranks found at the
    sample points.
    """

    def __init__(self, reason: str, momenta=None, ranks=None, size: Optional[int] = None):
        self.reason, self.momenta = reason, momenta
        self.ranks, self.size = list(ranks or []), size
        detail = f" (ranks {self.ranks} of {size})" if ranks else ""
        super().__init__(f"Legendre transform not invertible: {reason}{detail}")


class NonSolvableMomenta(Exception):
    """The momentum-definition equations cannot be solved for the momenta."""


SEPARATION_MODES = ("top-form", "volume-form")


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass
class LagrangianModel:
    """Action integrand relative to d^n x, written in velocity placeholders.

    In top-form mode the Lagrangian is the integrand itself; in volume-form
    mode it is the integrand divided by sqrtg.  ``jets`` lists placeholder
    symbols standing for second derivatives, if the integrand uses any.
    """

    chart: FiberedChart
    density: sp.Expr
    metric: Optional[MetricField] = None
    mode: str = "top-form"
    sources: dict = field(default_factory=dict)
    jets: tuple = ()

    def __post_init__(self):
        if self.mode not in SEPARATION_MODES:
            raise ValueError(f"unknown separation mode {self.mode!r}")
        if self.mode == "volume-form" and self.metric is None:
            raise ValueError("volume-form separation needs a metric")
        self.density = canonical(self.density)

    @property
    def lagrangian(self) -> sp.Expr:
        if self.mode == "volume-form":
            return canonical(self.density / self.metric.sqrtg)
        return self.density


@dataclass
class HamiltonianModel:
    """H on P.  ``constraint`` holds rows spanning the admissible momenta."""

    chart: FiberedChart
    H: sp.Expr
    metric: Optional[MetricField] = None
    provenance: dict = field(default_factory=dict)
    constraint: Optional[sp.Matrix] = None

    def __post_init__(self):
        self.H = canonical(self.H)
        if self.H.free_symbols & set(self.chart.velocities):
            raise ValueError("Hamiltonian depends on velocity placeholders")


@dataclass
class FieldEquations:
    """First-order field equations as residuals along a generic section.

    momentum[I][a] is D^a_I, divergence[I] is E_I.
    """

    chart: FiberedChart
    section: FieldSection
    momentum: tuple
    divergence: tuple
    route: str
    hamiltonian: HamiltonianModel
    correction: dict = field(default_factory=dict)

    @property
    def constraint(self):
        return self.hamiltonian.constraint

    def residuals(self) -> list:
        return [c for row in self.momentum for c in row] + list(self.divergence)


def _keys(chart):
    return [(i, a) for i in range(chart.N) for a in range(chart.n)]


def velocity_vector(chart):
    return [chart.velocity[i][a] for i, a in _keys(chart)]


def momentum_vector(chart):
    return [chart.pi[a][i] for i, a in _keys(chart)]


# ---------------------------------------------------------------------------
# exact rank at random points
# ---------------------------------------------------------------------------

def _rational(v) -> sp.Rational:
    return sp.Rational(v)


def to_domain(M) -> DomainMatrix:
    if isinstance(M, sp.MatrixBase):
        M = M.tolist()
    rows = [[QQ(int(_rational(e).p), int(_rational(e).q)) for e in row] for row in M]
    return DomainMatrix(rows, (len(rows), len(rows[0]) if rows else 0), QQ)


def exact_rank(M) -> int:
    return to_domain(M).rank()


def random_point(exprs, rng: random.Random, exclude=()) -> dict:
    """Random nonzero rationals for every symbol, opaque atom and derivative leaf."""
    atoms = set()
    for e in exprs:
        e = sp.sympify(e)
        atoms |= e.atoms(sp.Derivative)
        atoms |= opaque_atoms(e)
        atoms |= e.free_symbols
    atoms -= set(exclude)
    point = {}
    for a in sorted(atoms, key=sp.default_sort_key):
        v = sp.Rational(rng.randint(1, 29), rng.randint(1, 13))
        if not getattr(a, "opaque", False) and rng.random() < 0.5:
            v = -v
        point[a] = v
    return point


def _at(e, point):
    e = sp.sympify(e)
    ders = {d: point[d] for d in e.atoms(sp.Derivative) if d in point}
    e = e.xreplace(ders)
    funcs = {f: point[f] for f in opaque_atoms(e) if f in point}
    return sp.sympify(e.xreplace(funcs).xreplace(point))


def sample_matrix(M: sp.Matrix, point: dict) -> sp.Matrix:
    return M.applyfunc(lambda e: _at(e, point))


def _nullspace(M: sp.Matrix) -> sp.Matrix:
    ns = to_domain(M).nullspace().to_Matrix()
    return ns   # rows span the kernel


# ---------------------------------------------------------------------------
# Legendre transform
# ---------------------------------------------------------------------------

def legendre_transform(L: LagrangianModel, seed: int = 0, samples: int = 3) -> HamiltonianModel:
    """H = pi . v - L with v solved from pi = dL/dv.

    The velocity-to-momentum map must be affine.  A rank deficiency is
    accepted only when the kernel is a constant subspace along which L is
    invariant (a gauge direction); the transform is then taken on the
    complement and the admissible momenta are recorded as a constraint.
    """
    chart = L.chart
    lag = L.lagrangian
    v, p = velocity_vector(chart), momentum_vector(chart)
    momenta = [canonical(sp.diff(lag, s)) for s in v]
    used = lag.free_symbols & set(L.jets)
    if used:
        raise NonInvertibleLegendre("the Lagrangian depends on second derivatives "
                                    + ", ".join(sorted(map(str, used))), momenta)
    size = len(v)
    M = sp.Matrix(size, size, lambda r, c: canonical(sp.diff(momenta[r], v[c])))
    if any(e.free_symbols & set(v) for e in M):
        raise LegendreError("the Lagrangian is not quadratic in the velocities")
    zero = {s: 0 for s in v}
    b = sp.Matrix([canonical(m.xreplace(zero)) for m in momenta])

    rng = random.Random(seed)
    points = [random_point(list(M) + list(b), rng) for _ in range(samples)]
    mats = [sample_matrix(M, pt) for pt in points]
    ranks = [exact_rank(m) for m in mats]
    pvec = sp.Matrix(p)
    provenance = {"source": "legendre", "mode": L.mode, "ranks": ranks, "momenta": momenta}
    constraint = None
    if min(ranks) == size:
        vel = M.LUsolve(pvec - b)
    else:
        kernels = [_nullspace(m) for m in mats]
        dims = {k.rows for k in kernels}
        stacked = sp.Matrix.vstack(*kernels)
        K = kernels[0]
        gauge = (len(dims) == 1 and exact_rank(stacked) == K.rows
                 and all(is_zero(e) for e in M * K.T)
                 and all(is_zero(e) for e in (b.T * K.T)))
        if not gauge:
            raise NonInvertibleLegendre("rank-deficient velocity to momentum map", momenta, ranks, size)
        R = _nullspace(K)
        reduced = R * M * R.T
        vel = R.T * reduced.LUsolve(R * (pvec - b))
        constraint = R
        provenance["kernel"] = K
    vel = [canonical(e) for e in vel]
    sub = dict(zip(v, vel))
    H = canonical(sum(pi_ * ve for pi_, ve in zip(p, vel)) - lag.xreplace(sub))
    provenance["velocities"] = vel
    return HamiltonianModel(chart, H, L.metric, provenance, constraint)


def inverse_legendre(H: HamiltonianModel) -> sp.Expr:
    """L = pi . v - H with pi solved from v = dH/dpi (on the admissible momenta)."""
    chart = H.chart
    v, p = velocity_vector(chart), momentum_vector(chart)
    grad = [canonical(sp.diff(H.H, s)) for s in p]
    W = sp.Matrix(len(p), len(p), lambda r, c: canonical(sp.diff(grad[r], p[c])))
    h = sp.Matrix([canonical(g.xreplace({s: 0 for s in p})) for g in grad])
    vvec = sp.Matrix(v)
    if H.constraint is None:
        pis = W.LUsolve(vvec - h)
    else:
        R = H.constraint
        pis = R.T * (R * W * R.T).LUsolve(R * (vvec - h))
    sub = {s: canonical(e) for s, e in zip(p, pis)}
    return canonical(sum(sub[s] * ve for s, ve in zip(p, v)) - H.H.xreplace(sub))


def modified_hamiltonian(H: HamiltonianModel, V: VerticalProjection) -> HamiltonianModel:
    """H' = H - pi^a_I V^I_a + phi^I V^a_{I a}."""
    c = H.chart
    W = V.momentum_or_zero()
    Hp = (H.H - sum(c.pi[a][i] * V.field[i][a] for a in range(c.n) for i in range(c.N))
          + sum(c.phi[i] * W[a][i][a] for a in range(c.n) for i in range(c.N)))
    prov = dict(H.provenance, modified_by="projection")
    return HamiltonianModel(c, Hp, H.metric, prov, H.constraint)


# ---------------------------------------------------------------------------
# field equations
# ---------------------------------------------------------------------------

def _contract(H: HamiltonianModel, section: FieldSection, U) -> tuple:
    """Residuals from omega(v, U) = dH(v) for symbolic vertical v.

    U[a] is the vertical vector paired with dx^a.  The coefficient of
    v^a_I gives D^a_I, minus the coefficient of v^I gives E_I.
    """
    c = H.chart
    vphi = [sp.Dummy(f"v{i}") for i in range(c.N)]
    vpi = _grid((c.n, c.N), lambda a, i: sp.Dummy(f"v{a}_{i}"))
    v = TangentVector.vertical(c.n, vphi, vpi)
    lhs = PolysymplecticForm(c).contract_one_form(v, U)
    Hs = H.H
    dH = sum(section.at(sp.diff(Hs, c.phi[i])) * vphi[i] for i in range(c.N))
    dH += sum(section.at(sp.diff(Hs, c.pi[a][i])) * vpi[a][i] for a in range(c.n) for i in range(c.N))
    expr = sp.expand(lhs - dH)
    momentum = _grid((c.N, c.n), lambda i, a: canonical(expr.coeff(vpi[a][i])))
    divergence = tuple(canonical(-expr.coeff(vphi[i])) for i in range(c.N))
    return momentum, divergence


def derive_projection_equations(H: HamiltonianModel, V: VerticalProjection,
                                section: Optional[FieldSection] = None) -> FieldEquations:
    """Contract omega with the vertically projected tangent of a generic section."""
    c = H.chart
    section = section or FieldSection.generic(c)
    Vs = VerticalProjection(
        _grid((c.N, c.n), lambda i, a: section.at(V.field[i][a])),
        _grid((c.n, c.N, c.n), lambda b, i, a: section.at(V.momentum_or_zero()[b][i][a])))
    U = [apply_projection(Vs, section.tangent(a)) for a in range(c.n)]
    mom, div = _contract(H, section, U)
    return FieldEquations(c, section, mom, div, "projection", H, {"projection": V})


def derive_connection_equations(H: HamiltonianModel, A1: ConnectionCoefficients,
                                A2: ConnectionCoefficients, Gamma: ConnectionCoefficients,
                                section: Optional[FieldSection] = None) -> FieldEquations:
    """Contract omega with nabla_VP(vl_gamma gamma)."""
    c = H.chart
    section = section or FieldSection.generic(c)
    nab = nabla_VP(vertical_lift(section, section), A1, A2, Gamma)
    U = [TangentVector.vertical(c.n, [nab.field[i][a] for i in range(c.N)],
                                _grid((c.n, c.N), lambda b, i: nab.momentum[b][i][a]))
         for a in range(c.n)]
    mom, div = _contract(H, section, U)
    return FieldEquations(c, section, mom, div, "connection", H,
                          {"A1": A1, "A2": A2, "Gamma": Gamma})


def solve_momenta(eqs: FieldEquations, seed: int = 0) -> dict:
    """Solve the momentum-definition equations for the section momenta.

    Returns {pi^a_I(x): expression in field derivatives}.  With a momentum
    constraint the equations are projected onto the admissible subspace
    first.
    """
    c, s = eqs.chart, eqs.section
    keys = _keys(c)
    unknowns = [sp.Dummy(f"P{a}_{i}") for i, a in keys]
    pis = [s.pi[a][i] for i, a in keys]
    sub = dict(zip(pis, unknowns))
    res = [canonical(eqs.momentum[i][a].xreplace(sub)) for i, a in keys]
    for r in res:
        for d in r.atoms(sp.Derivative):
            if d.expr in pis:
                raise NonSolvableMomenta("momentum equations contain momentum derivatives")
    try:
        A, rhs = sp.linear_eq_to_matrix(res, unknowns)
    except ValueError:
        raise NonSolvableMomenta("momentum equations are not linear in the momenta") from None
    if any(e.free_symbols & set(unknowns) for e in A):
        raise NonSolvableMomenta("momentum equations are not linear in the momenta")
    R = eqs.constraint
    if R is not None:
        A_r, rhs_r = R * A * R.T, R * rhs
    else:
        A_r, rhs_r = A, rhs
    pt = random_point(list(A_r), random.Random(seed))
    if exact_rank(sample_matrix(A_r, pt)) < A_r.rows:
        raise NonSolvableMomenta("momentum equations are singular")
    try:
        w = A_r.LUsolve(rhs_r)
    except (ValueError, ZeroDivisionError) as exc:
        raise NonSolvableMomenta(str(exc)) from None
    sol = R.T * w if R is not None else w
    return {pi_: canonical(e) for pi_, e in zip(pis, sol)}


def reduce_to_second_order(eqs: FieldEquations) -> tuple:
    """Eliminate the momenta: one second-order residual per field component."""
    sol = solve_momenta(eqs)
    out = []
    for e in eqs.divergence:
        out.append(canonical(e.xreplace(sol).doit()))
    return tuple(out)
