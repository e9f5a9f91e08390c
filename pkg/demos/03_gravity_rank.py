# %% [markdown]
# Why the covariant Legendre transform refuses Einstein-Hilbert
#
# The scalar curvature is quadratic in the first derivatives of the metric
# and linear in its second derivatives.  At a fixed numeric metric both
# parts are computed exactly: R = 1/2 d.Q.d + l.j.  The transform refuses
# because l does not vanish.  The rank of the velocity-to-momentum map is
# measured along the way, for the displayed momentum structure and for the
# direct Hessian Q.
#
# Pass a dimension on the command line (default 3; 4 takes about a minute).

# %%
import random
import sys

from covham.dynamics import NonInvertibleLegendre, legendre_transform
from covham.gravity import curvature_forms, einstein_hilbert_model, gravity_certificate, random_metric

n = int(sys.argv[1]) if len(sys.argv) > 1 else 3

G = random_metric(random.Random(0), n)
print("sample metric:\n", G)
Q, ell = curvature_forms(G)
print("first-derivative variables:", len(Q), " nonzero jet coefficients:", sum(1 for w in ell if w))

# %%
try:
    legendre_transform(einstein_hilbert_model(G))
except NonInvertibleLegendre as exc:
    print("refused:", exc.reason[:70], "...")

# %% ranks at three independent points
cert = gravity_certificate(seed=0, points=3, n=n)
print("displayed map ranks:", cert.displayed_ranks, "of", cert.size)
print("direct Hessian ranks:", cert.direct_ranks, "of", cert.size)
