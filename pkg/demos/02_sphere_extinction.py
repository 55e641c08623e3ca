"""A sphere under level-set mean curvature flow.

The radius should follow r(t) = sqrt(r0^2 - 2 n t) and vanish at
T0 = r0^2 / (2n); for r0 = 2 in R^3 that is T0 = 1.  The run here is the
coarse h = 0.1 one (a few seconds); the acceptance tests repeat it at
h = 0.05 on 128^3 nodes.
"""
import numpy as np

from shrinkflow.fields import Grid, extract_interface, signed_distance_init
from shrinkflow.levelset import evolve
from shrinkflow.shapes import Sphere

h, n_cells = 0.1, 64
g = Grid((-0.5 * n_cells * h,) * 3, h, (n_cells,) * 3)
trace = evolve(signed_distance_init(Sphere(2.0), g), t_max=1.2)

print("   t      r(t)     exact    err")
for t, f in zip(trace.times[::4], trace.fields[::4]):
    m = extract_interface(f)
    if m.is_empty:
        break
    r = np.linalg.norm(m.vertices, axis=1).mean()
    exact = np.sqrt(max(4.0 - 4.0 * t, 0.0))
    print(f"{t:6.3f}  {r:7.4f}  {exact:7.4f}  {r - exact:+.1e}")

print(f"\nextinction time {trace.extinction_time:.5f} (exact 1), "
      f"at {np.round(trace.extinction_point, 3)}")
