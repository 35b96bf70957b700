"""Hyperbolic toral automorphisms and the two-dimensional obstruction.

The cat map is hyperbolic with one stable and one unstable direction. Used as
the monodromy along a homotopy from a periodic orbit to the inverse of
another, its two eigen-slopes have opposite signs, so any continuous slope
path between them crosses the rational 0/1 and produces a circle leaf.
"""

import math

from anosov_forge.obstruction import (
    SlopePath, circle_leaf_contradiction, eigen_slopes, fiberwise_obstruction_report, find_rational_crossing,
)
from anosov_forge.toral_dynamics import CAT_MAP, block_diag, is_hyperbolic, stable_unstable_dims

ok, moduli = is_hyperbolic(CAT_MAP)
print(f"cat map hyperbolic: {ok}, eigenvalue moduli {moduli.round(6).tolist()}")
print(f"stable/unstable dims: {stable_unstable_dims(CAT_MAP)}")

su, ss = eigen_slopes(CAT_MAP)
t0, p, q = find_rational_crossing(SlopePath.linear(su, ss))
print(f"eigen-slopes {su:.6f} (unstable), {ss:.6f} (stable); crossing {p}/{q} at t0 = {t0:.6f}")

for A, name in ((CAT_MAP, "cat"), (block_diag(CAT_MAP, CAT_MAP), "cat x cat")):
    print(f"{name:10s} -> {fiberwise_obstruction_report(A, True).verdict}")

# a circle leaf of length 1 contracting at rate 1/e drops below systole 0.1 after ln 10
print(f"time to shrink below the systole: {circle_leaf_contradiction(1, math.exp(-1), 0.1):.12f}")
