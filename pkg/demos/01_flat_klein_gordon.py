# %% [markdown]
# Flat Klein-Gordon field, end to end
#
# Start from the Lagrangian density, take the covariant Legendre transform
# (one momentum per spacetime direction), derive the first-order field
# equations from the polysymplectic form and eliminate the momenta.

# %%
import sympy as sp

from covham.dynamics import derive_projection_equations, legendre_transform, reduce_to_second_order
from covham.geometry import MetricField, VerticalProjection
from covham.kernel import serialize
from covham.polysymplectic import poisson_bracket
from covham.scenarios import kg_chart, kg_lagrangian

chart = kg_chart(4)
eta = MetricField.minkowski(4, chart.x)
L = kg_lagrangian(chart, eta)
print("L =", serialize(L.lagrangian))

# %% the Hamiltonian is quadratic in the four momenta pi^a_0
H = legendre_transform(L)
print("H =", serialize(H.H))

# %% first-order equations along a generic section (phi(x), pi^a(x))
eqs = derive_projection_equations(H, VerticalProjection.zero(chart))
for a, r in enumerate(eqs.momentum[0]):
    print(f"D^{a} =", serialize(r))
print("E   =", serialize(eqs.divergence[0]))

# %% solving D^a = 0 for the momenta gives back the wave operator plus mass
(R,) = reduce_to_second_order(eqs)
print("R   =", serialize(R))

# %% the bracket with H reproduces the momentum equation, one base direction per slot
phi = chart.phi[0]
print("{phi, H} =", [serialize(c) for c in poisson_bracket(phi, H.H, chart)])
print("{phi, pi^2} =", poisson_bracket(phi, chart.pi[2][0], chart))
