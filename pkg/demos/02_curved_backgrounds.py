# %% [markdown]
# Curved backgrounds: two ways to separate the Lagrangian
#
# On a curved metric the action integrand is sqrtg * L.  Taking the
# Legendre transform of the whole density (top-form split) puts sqrtg into
# the Hamiltonian; dividing it out first (volume-form split) keeps H simple
# and moves the curvature into the connection terms of the divergence
# equation.  Both routes must give the same second-order equation.

# %%
from covham.dynamics import (derive_connection_equations, derive_projection_equations,
                             legendre_transform, reduce_to_second_order)
from covham.geometry import VerticalProjection, christoffel
from covham.kernel import canonical, is_zero, serialize
from covham.scenarios import (curved_metric, kg_chart, kg_lagrangian, zero_potentials,
                              maxwell_chart, maxwell_lagrangian, maxwell_sources)

n = 3
chart = kg_chart(n)
g = curved_metric(chart)          # opaque diagonal metric g_aa(x) with sqrtg(x)

# %% top-form split, flat projection route
H_top = legendre_transform(kg_lagrangian(chart, g, "top-form"))
print("H (top-form)    =", serialize(H_top.H))
(R_top,) = reduce_to_second_order(derive_projection_equations(H_top, VerticalProjection.zero(chart)))

# %% volume-form split, Levi-Civita connection route
H_vol = legendre_transform(kg_lagrangian(chart, g, "volume-form"))
print("H (volume-form) =", serialize(H_vol.H))
A1, A2, _ = zero_potentials(chart)
eqs = derive_connection_equations(H_vol, A1, A2, christoffel(g))
print("E (connection)  =", serialize(eqs.divergence[0]))
(R_vol,) = reduce_to_second_order(eqs)

# %% the two reduced equations differ by the overall density factor only
print("R_top - sqrtg * R_vol is zero:", is_zero(R_top - g.sqrtg * R_vol))

# %% Maxwell on the same kind of background: the momentum map has a gauge kernel
mc = maxwell_chart(n)
mg = curved_metric(mc)
HM = legendre_transform(maxwell_lagrangian(mc, mg, "volume-form"))
print("Maxwell momentum map rank:", HM.constraint.rows, "of", n * n)
print("sources:", [serialize(j) for j in maxwell_sources(mc)])
