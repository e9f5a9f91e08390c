"""
Einstein-Hilbert Legendre data
------------------------------

The metric components g_ab (a <= b) are the field coordinates; their first
derivatives d_c g_ab are the 40 velocities in four dimensions.  At a fixed
numeric metric the scalar curvature is exactly

    R = 1/2 d.Q.d + l.j

with d the first derivatives and j the second derivatives, so both the
quadratic form Q and the jet coefficients l are computed with exact
rationals from linear forms in d.

Two velocity-to-momentum maps are provided:

* the displayed five-term momentum structure, contracted with d, and
* the direct Hessian Q of R in the first derivatives.

"""

import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy as sp

from .dynamics import LagrangianModel, exact_rank
from .kernel import FiberedChart


def pairs(n: int) -> list:
    return [(a, b) for a in range(n) for b in range(a, n)]


def random_metric(rng: random.Random, n: int = 4, min_det: Fraction = Fraction(1, 2)) -> sp.Matrix:
    """Random rational Lorentzian (+,-,-,-) metric with |det g| >= min_det."""
    while True:
        A = sp.Matrix(n, n, lambda i, j: sp.Rational(rng.randint(-5, 5), rng.randint(1, 4)))
        G = (A + A.T) / 2 + sp.diag(3, *([-3] * (n - 1)))
        det = G.det()
        if abs(det) < sp.Rational(min_det.numerator, min_det.denominator):
            continue
        ev = np.linalg.eigvalsh(np.array(G.tolist(), dtype=float))
        if (ev > 0).sum() == 1:
            return G


def _fractions(M: sp.Matrix) -> list:
    return [[Fraction(int(e.p), int(e.q)) for e in row] for row in M.tolist()]


def _inverse(G: sp.Matrix) -> list:
    return _fractions(G.inv())


# ---------------------------------------------------------------------------
# displayed momentum structure
# ---------------------------------------------------------------------------

def displayed_coefficient(gi, al, be, ga, ze, et, th) -> Fraction:
    """Five-term coefficient of d_ga g_al,be in pi^{ze et th} (overall constant dropped)."""
    return (-4 * gi[al][et] * gi[be][ga] * gi[ze][th]
            + 2 * gi[al][ze] * gi[be][et] * gi[ga][th]
            - 2 * gi[al][be] * gi[ga][th] * gi[ze][et]
            + gi[al][be] * gi[ga][et] * gi[ze][th]
            + gi[al][ga] * gi[be][th] * gi[ze][et])


def displayed_momentum_map(G: sp.Matrix) -> list:
    """Matrix of the displayed map from d_c g_ab (a <= b) to the conjugate momenta.

    Rows and columns are ordered (pair, direction) with the pair major.  A
    row sums pi^{ze et th} over both orders of an off-diagonal pair and a
    column sums the coefficients of d g_ab and d g_ba, as the chain rule
    for symmetric coordinates requires.
    """
    n = G.rows
    gi = _inverse(G)
    P = pairs(n)
    idx = [(p, c) for p in P for c in range(n)]
    M = []
    for (ze, et), th in idx:
        row_orders = {(ze, et), (et, ze)}
        row = []
        for (a, b), g in idx:
            col_orders = {(a, b), (b, a)}
            row.append(sum((displayed_coefficient(gi, x, y, g, z, e, th)
                            for z, e in row_orders for x, y in col_orders), Fraction(0)))
        M.append(row)
    return M


# ---------------------------------------------------------------------------
# direct second-order data of R
# ---------------------------------------------------------------------------

def _unit(size, k):
    v = np.array([Fraction(0)] * size, dtype=object)
    v[k] = Fraction(1)
    return v


def curvature_forms(G: sp.Matrix):
    """(Q, l): Hessian of R in the first derivatives and jet coefficients.

    Q is indexed like the velocities; l is indexed by (pair, (c <= f)) for
    the second derivatives d_c d_f g_ab.
    """
    n = G.rows
    gi = _inverse(G)
    P = pairs(n)
    size = len(P) * n
    pidx = {p: k for k, p in enumerate(P)}
    zero = np.array([Fraction(0)] * size, dtype=object)

    def dg(a, b, c):
        return _unit(size, pidx[(min(a, b), max(a, b))] * n + c)

    D = [[[dg(a, b, c) for c in range(n)] for b in range(n)] for a in range(n)]
    S = [[[-D[b][d][e] + D[e][b][d] + D[d][e][b] for d in range(n)] for b in range(n)] for e in range(n)]
    half = Fraction(1, 2)
    Gam = [[[half * sum((gi[a][e] * S[e][b][d] for e in range(n)), zero) for d in range(n)]
            for b in range(n)] for a in range(n)]
    dinv = [[[-sum((gi[a][p] * gi[e][q] * D[p][q][c] for p in range(n) for q in range(n)), zero)
              for c in range(n)] for e in range(n)] for a in range(n)]

    Q = np.zeros((size, size), dtype=object)
    Q[:, :] = Fraction(0)

    def add(coef, l1, l2):
        o = np.outer(l1, l2)
        Q[:, :] = Q + coef * (o + o.T)

    for e in range(n):
        add(half, sum((dinv[c][e][c] for c in range(n)), zero),
            sum((gi[b][d] * S[e][b][d] for b in range(n) for d in range(n)), zero))
        add(Fraction(1), sum((Gam[c][e][c] for c in range(n)), zero),
            sum((gi[b][d] * Gam[e][b][d] for b in range(n) for d in range(n)), zero))
    for d in range(n):
        for c in range(n):
            for e in range(n):
                add(-half, dinv[c][e][d], sum((gi[b][d] * S[e][b][c] for b in range(n)), zero))
    for c in range(n):
        for e in range(n):
            for b in range(n):
                add(Fraction(-1), Gam[e][b][c], sum((gi[b][d] * Gam[c][e][d] for d in range(n)), zero))

    JP = [(c, f) for c in range(n) for f in range(c, n)]
    jidx = {(p, q): k for k, (p, q) in enumerate((p, q) for p in P for q in JP)}
    ell = [Fraction(0)] * len(jidx)

    def jet(a, b, c, f):
        return jidx[((min(a, b), max(a, b)), (min(c, f), max(c, f)))]

    for b in range(n):
        for d in range(n):
            for c in range(n):
                for e in range(n):
                    # + 1/2 g^bd g^ce d_c S_ebd - 1/2 g^bd g^ce d_d S_ebc
                    w = half * gi[b][d] * gi[c][e]
                    for sign, idx in ((-1, jet(b, d, e, c)), (1, jet(e, b, d, c)), (1, jet(d, e, b, c))):
                        ell[idx] += sign * w
                    for sign, idx in ((-1, jet(b, c, e, d)), (1, jet(e, b, c, d)), (1, jet(c, e, b, d))):
                        ell[idx] -= sign * w
    return Q.tolist(), ell


def jet_symbols(chart: FiberedChart) -> tuple:
    """Placeholders ddphiI_cf for d_c d_f phi^I, c <= f."""
    n = chart.n
    return tuple(sp.Symbol(f"ddphi{i}_{c}{f}") for i in range(chart.N)
                 for c in range(n) for f in range(c, n))


def gravity_chart(n: int = 4) -> FiberedChart:
    return FiberedChart(n, n * (n + 1) // 2, field="symmetric")


def einstein_hilbert_model(G: sp.Matrix, chart: FiberedChart = None) -> LagrangianModel:
    """Einstein-Hilbert Lagrangian R (overall constant dropped) at the fiber point g = G."""
    n = G.rows
    chart = chart or gravity_chart(n)
    Q, ell = curvature_forms(G)
    v = [chart.velocity[i][a] for i in range(chart.N) for a in range(n)]
    jets = jet_symbols(chart)
    size = len(v)
    quad = sum(sp.Rational(Q[r][c].numerator, Q[r][c].denominator) * v[r] * v[c]
               for r in range(size) for c in range(size) if Q[r][c]) / 2
    lin = sum(sp.Rational(w.numerator, w.denominator) * s for w, s in zip(ell, jets) if w)
    return LagrangianModel(chart, quad + lin, jets=jets)


@dataclass
class GravityCertificate:
    metrics: list
    displayed_ranks: list
    direct_ranks: list
    size: int
    jet_dependence: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return len(set(self.displayed_ranks)) == 1

    @property
    def deficient(self) -> bool:
        return self.consistent and self.displayed_ranks[0] < self.size


def gravity_certificate(seed: int = 0, points: int = 3, n: int = 4) -> GravityCertificate:
    """Exact ranks of both velocity-to-momentum maps at random metrics."""
    rng = random.Random(seed)
    metrics, shown, direct, jets = [], [], [], []
    for _ in range(points):
        G = random_metric(rng, n)
        metrics.append(G)
        shown.append(exact_rank(displayed_momentum_map(G)))
        Q, ell = curvature_forms(G)
        direct.append(exact_rank(Q))
        jets.append(any(ell))
    return GravityCertificate(metrics, shown, direct, len(pairs(n)) * n, jets)
