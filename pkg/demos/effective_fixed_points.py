"""
Effective fixed points of the excited modes
===========================================

Freeze the slow ground imbalance z0 and look for stationary points of the
fast (z1, theta1) motion at point C. Two stable islands at theta1 = pi merge
with the saddle between them as |z0| grows. Writes effective_fixed_points.png.
"""
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from dwell4 import model_params
from dwell4.fixed_points import critical_imbalance, effective_fixed_points, effective_merge
from dwell4.model import eom_averaged

p = model_params(8.75, 2.5e-2)
z2 = 0.0
z1 = np.linspace(-0.4999, 0.4999, 2000)

fig, ax = plt.subplots(figsize=(6, 4))
for z0 in (0.0, 0.1, 0.2):
    rate = [eom_averaged((z0, 0.0, z, np.pi), p, z2=z2)[3] for z in z1]
    ax.plot(z1, rate, label=f"z0 = {z0}")
    roots = effective_fixed_points(p, z2, z0)
    print(f"z0 = {z0}: {len(roots)} roots",
          [(round(r.z1_0, 4), round(r.theta1_0, 2), r.stability.value) for r in roots])
ax.axhline(0.0, color="k", lw=0.5)
ax.set_xlabel("z1")
ax.set_ylabel("d theta1 / dt at theta1 = pi")
ax.legend()
fig.savefig("effective_fixed_points.png", dpi=120, bbox_inches="tight")

z0m, z1m = effective_merge(p, z2)
print("islands merge at z0 =", z0m, "with |z1| =", abs(z1m), "closed form", critical_imbalance(p, z2))
