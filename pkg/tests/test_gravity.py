import random

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from covham.dynamics import NonInvertibleLegendre, legendre_transform
from covham.gravity import (curvature_forms, displayed_momentum_map, einstein_hilbert_model,
                            gravity_certificate, pairs, random_metric)


def brute_scalar_curvature(M, x, G):
    """R = g^bd R^c_bcd at x = 0 from a plain sympy metric with M(0) = G.

    Only two orders of the inverse survive at the origin, so the Neumann
    series truncated after the quadratic term is exact there.
    """
    n = len(x)
    Gi = G.inv()
    A = M - G
    Mi = Gi - Gi * A * Gi + Gi * A * Gi * A * Gi
    Gam = [[[sum(Mi[a, e] * (sp.diff(M[e, b], x[d]) + sp.diff(M[e, d], x[b]) - sp.diff(M[b, d], x[e]))
                 for e in range(n)) / 2 for d in range(n)] for b in range(n)] for a in range(n)]
    R = 0
    for b in range(n):
        for d in range(n):
            ric = sum(sp.diff(Gam[c][d][b], x[c]) - sp.diff(Gam[c][c][b], x[d])
                      + sum(Gam[c][c][e] * Gam[e][d][b] - Gam[c][d][e] * Gam[e][c][b] for e in range(n))
                      for c in range(n))
            R += Mi[b, d] * ric
    return R


def jet_metric(G, d, J, x):
    n = G.rows
    M = sp.Matrix(G)
    for (a, b) in pairs(n):
        k = pairs(n).index((a, b))
        e = sum(d[k * n + c] * x[c] for c in range(n))
        e += sum(J[(k, c, f)] * x[c] * x[f] for c in range(n) for f in range(n)) / 2
        M[a, b] += e
        if a != b:
            M[b, a] += e
    return M


@pytest.mark.parametrize("n", [2, 3])
@settings(max_examples=5)
@given(seed=st.integers(0, 10 ** 6))
def test_curvature_forms_match_brute_force(n, seed):
    rng = random.Random(seed)
    x = sp.symbols(f"x0:{n}")
    G = random_metric(rng, n)
    P = pairs(n)
    d = [sp.Rational(rng.randint(-3, 3), rng.randint(1, 3)) for _ in range(len(P) * n)]
    J = {}
    for k in range(len(P)):
        for c in range(n):
            for f in range(c, n):
                J[(k, c, f)] = J[(k, f, c)] = sp.Integer(rng.randint(-3, 3))
    M = jet_metric(G, d, J, x)
    R = brute_scalar_curvature(M, x, G).subs({s: 0 for s in x})
    Q, ell = curvature_forms(G)
    size = len(d)
    quad = sum(sp.Rational(Q[r][c].numerator, Q[r][c].denominator) * d[r] * d[c]
               for r in range(size) for c in range(size)) / 2
    jets = [J[(k, c, f)] for k in range(len(P)) for c in range(n) for f in range(c, n)]
    lin = sum(sp.Rational(w.numerator, w.denominator) * j for w, j in zip(ell, jets))
    assert sp.expand(R - quad - lin) == 0


def test_hessian_is_symmetric():
    Q, _ = curvature_forms(random_metric(random.Random(1), 3))
    assert all(Q[r][c] == Q[c][r] for r in range(len(Q)) for c in range(len(Q)))


def test_displayed_map_shape():
    M = displayed_momentum_map(random_metric(random.Random(2), 3))
    assert len(M) == len(M[0]) == 18


def test_einstein_hilbert_refuses_legendre():
    G = random_metric(random.Random(3), 3)
    L = einstein_hilbert_model(G)
    assert L.lagrangian.free_symbols & set(L.jets)
    with pytest.raises(NonInvertibleLegendre):
        legendre_transform(L)


def test_random_metric_is_lorentzian():
    import numpy as np
    for s in range(5):
        G = random_metric(random.Random(s), 4)
        ev = np.linalg.eigvalsh(np.array(G.tolist(), dtype=float))
        assert (ev > 0).sum() == 1 and abs(G.det()) >= sp.Rational(1, 2)


def test_certificate_small_dimension():
    cert = gravity_certificate(seed=0, points=3, n=2)
    assert cert.size == 6 and cert.consistent
    assert len(set(cert.direct_ranks)) == 1
    assert all(cert.jet_dependence)


def gamma_gamma_hessian(G):
    """Hessian in d_c g_ab of the first-order Lagrangian g^ab (G^c_ad G^d_bc - G^c_ab G^d_cd)."""
    n = G.rows
    Gi, P = G.inv(), pairs(n)
    d = sp.symbols(f"d0:{len(P) * n}")

    def dg(a, b, c):
        return d[P.index((min(a, b), max(a, b))) * n + c]

    Gam = [[[sum(Gi[a, e] * (dg(e, b, c) + dg(e, c, b) - dg(b, c, e)) for e in range(n)) / 2
             for c in range(n)] for b in range(n)] for a in range(n)]
    L = sum(Gi[a, b] * (Gam[c][a][e] * Gam[e][b][c] - Gam[c][a][b] * Gam[e][c][e])
            for a in range(n) for b in range(n) for c in range(n) for e in range(n))
    return sp.hessian(sp.expand(L), d)


def test_first_order_lagrangian_is_also_regular():
    # the divergence-reduced Lagrangian has a full-rank velocity Hessian too,
    # so the refusal rests on the second-derivative dependence of R alone
    from covham.dynamics import exact_rank
    G = random_metric(random.Random(0), 4)
    assert exact_rank(gamma_gamma_hessian(G)) == 40
    cert = gravity_certificate(seed=0, points=1, n=3)
    assert exact_rank(gamma_gamma_hessian(cert.metrics[0])) == cert.direct_ranks[0] == 18
