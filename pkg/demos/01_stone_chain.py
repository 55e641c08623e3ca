"""Entropy of the round spheres, and what the optimizer finds on meshes.

The closed form gives lambda_n = (n / (2 pi e))**(n/2) * |S^n|, a strictly
decreasing chain 2 > lambda_1 > 3/2 > lambda_2 > ... > 1.  Meshes of the
same spheres, at any size and position, should land on the same numbers:
the entropy does not see translations or dilations.
"""
import math

import numpy as np

from shrinkflow import mesh as M
from shrinkflow.entropy import entropy, f_functional, lambda_round

print("n   lambda_n (closed form)")
for n in range(1, 8):
    print(f"{n:<3d} {lambda_round(n):.7f}")

# F at the shrinker scale is already the sup (sphere of radius sqrt(2n))
print("\nF[circle r=sqrt 2]  =", round(f_functional(M.circle(math.sqrt(2), 2048)), 7))
print("F[sphere r=2]       =", round(f_functional(M.icosphere(2.0, 5)), 7))

# a small sphere far from the origin: F is tiny, the entropy is not
s = M.icosphere(0.3, 4, (4.0, -1.0, 2.0))
rep = entropy(s)
print(f"\nsphere r=0.3 at (4,-1,2): F = {f_functional(s):.2e}, lambda = {rep.lam:.5f}")
print("  optimal centre", np.round(rep.best_center, 3), " scale", round(rep.best_scale, 3),
      "(expect 2/0.3 =", round(2 / 0.3, 3), ")")

# anything else sits above lambda_2
for name, m in [("ellipsoid (2,1,1)", M.ellipsoid((2.0, 1.0, 1.0), 4)),
                ("torus (2, 0.5)", M.torus(2.0, 0.5, 96, 32))]:
    lam = entropy(m).lam
    print(f"{name:18s} lambda = {lam:.4f}  (excess over lambda_2 {lam - lambda_round(2):+.4f})")
