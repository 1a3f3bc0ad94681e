"""
Dragging of excited atoms
=========================

At point B (V0 = 5, gamma = 2.5e-3) with 60% of the atoms in the ground
level, a ground-mode imbalance drags the excited atoms along. Compare with
the two-mode model, where the excited atoms stay put. Writes dragging.png.
"""
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from dwell4 import IntegratorConfig, PendulumState, integrate, model_params
from dwell4.dynamics import default_t_end, estimate_frequency

p = model_params(5.0, 2.5e-3)
start = PendulumState(z0=0.1, z2=0.6)
t_end = default_t_end(p, 0.6, periods=3)

four = integrate(start, p, IntegratorConfig(t_end=t_end, sample_interval=t_end / 4000))
two = integrate(start, p, IntegratorConfig(t_end=t_end, sample_interval=t_end / 4000, model="two-mode"))

fig, (a, b) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
a.plot(four.times, four.column("z0"), label="four-mode")
a.plot(two.times, two.column("z0"), "--", label="two-mode")
a.set_ylabel("z0")
a.legend()
b.plot(four.times, four.column("z1"))
b.set_ylabel("z1")
b.set_xlabel("t [hbar/E_r]")
fig.savefig("dragging.png", dpi=120, bbox_inches="tight")

print("max |z1| (four-mode):", np.abs(four.column("z1")).max())
# the coupling slows the ground-mode oscillation down
print("ground frequency four/two:", estimate_frequency(four)[0] / estimate_frequency(two)[0])
