"""Error floor, load threshold and fixed points of the Example 1 protocol.

Run: python demos/de_threshold.py
"""
import numpy as np

from irsagmac.density_evolution import DeParams, ErrorProfile, error_floor, exit_crossings, run_de
from irsagmac.protocol import IrsaDistribution
from irsagmac.threshold import ThresholdQuery, boundary_for, g0_onset, threshold_gmac

dist = IrsaDistribution.from_pairs([(2, 0.5102), (4, 0.4898)])
print(f"Lambda = {dist.probs}, eta = {dist.efficiency:.4f}")

# below the threshold the loss settles on the floor sum_d Lambda_d P_E|1^d
for t in (1, 2, 3, 4):
    pe = ErrorProfile.uniform(t, 0.2)
    print(f"T={t}: floor {error_floor(dist, pe):.5f}, "
          f"PLR at G=0.5 {run_de(DeParams(dist, pe, 0.5)).plr(dist):.5f}")

# T=2: the threshold sits where a second fixed point appears above the floor
pe = ErrorProfile.uniform(2, 0.2)
g_star = threshold_gmac(ThresholdQuery(dist, pe, e=0.5))
g0 = g0_onset(dist, pe, g_hi=10.0)
cb = boundary_for(dist, pe, 0.5)
print(f"\nT=2: G* = {g_star:.4f}, onset G0 = {g0:.4f}, convergence boundary {cb.g_cb:.4f} ({cb.binding.value})")

for g in (1.40, g0 + 0.01, 1.60):
    xs = exit_crossings(DeParams(dist, pe, g))
    desc = ", ".join(f"p={c.p:.4f}{'' if c.stable else ' (unstable)'}" for c in xs)
    print(f"  G={g:.3f}: fixed points {desc}")

# PLR across the load, the shape of the density-evolution curve
gs = np.arange(0.2, 2.01, 0.2)
plr = [run_de(DeParams(dist, pe, g)).plr(dist) for g in gs]
print("\n  G     PLR")
for g, p in zip(gs, plr):
    print(f"  {g:.1f}  {p:.5f}")
