"""
Poincare section near the unstable point
========================================

A deep barrier with strong interactions (V0 = 8.75, gamma = 0.1), started next
to the (z = 0, theta = pi) point. The section at theta0 = pi scatters over an
area instead of tracing a curve. Writes poincare.png.
"""
import math
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from dwell4 import IntegratorConfig, PendulumState, integrate, model_params
from dwell4.dynamics import chaos_candidate, hull_area, poincare_section

p = model_params(8.75, 0.1)
start = PendulumState(0.05, math.pi, 0.02, math.pi - 0.1, 0.0, 0.0)
tr = integrate(start, p, IntegratorConfig(t_end=2e4, sample_interval=0.05))
pts = poincare_section(tr, ("theta0", math.pi), 1, ("z1", "theta1"))

fig, ax = plt.subplots(figsize=(5, 4))
ax.plot(pts[:, 0], pts[:, 1], ".", ms=3)
ax.set_xlabel("z1")
ax.set_ylabel("theta1")
fig.savefig("poincare.png", dpi=120, bbox_inches="tight")

print(len(pts), "crossings, hull area", hull_area(pts), "chaos candidate:", chaos_candidate(pts))
print("energy drift", tr.max_energy_drift)
