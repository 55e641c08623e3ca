"""Collapsed or not?  Thick balls on both sides of a shrinking measure.

At time s = -1 the shrinker scale is sqrt(-s) = 1, so the threshold
radius is 2 sqrt(2).  A plane has half-spaces on both sides and a ball
sees both thickly; a sphere of radius 2 and a tube of radius sqrt 2 have
insides thinner than the threshold everywhere, so no ball witnesses
two-sided thickness.
"""
import math
import time

from shrinkflow.fields import Grid, signed_distance_init
from shrinkflow.shapes import Cylinder, HalfSpace, Sphere
from shrinkflow.shrinker import collapsed_test

g = Grid.centered(3, 8.0, 0.25)
for name, shape in [("plane", HalfSpace((-1.0, 0.0, 0.0))),
                    ("sphere r=2", Sphere(2.0)),
                    ("tube r=sqrt2", Cylinder(math.sqrt(2)))]:
    t0 = time.perf_counter()
    rep = collapsed_test(signed_distance_init(shape, g), s=-1.0, tau=0.0)
    print(f"{name:14s} {rep.verdict:14s} ({time.perf_counter() - t0:.2f}s)")
    if rep.witness:
        w = rep.witness
        print(f"{'':14s} witness ball R={w['R']:.2f} at {w['center']}, inradii {w['inradii']}")
    else:
        # a region thinner than the threshold everywhere is ruled out before any search
        print(f"{'':14s} thinnest side, global inradius: {min(rep.diagnostics['global_inradius']):.3f}"
              f" < {2 * math.sqrt(2):.3f}")
