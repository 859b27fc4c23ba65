"""Finite-frame SIC simulation against the asymptotic prediction.

Run: python demos/mc_vs_de.py [n_frames]
With 400 slots the simulation follows density evolution on the floor but
leaves it earlier than the asymptotic threshold; longer frames close the gap.
"""
import sys

from irsagmac.density_evolution import DeParams, ErrorProfile, run_de
from irsagmac.montecarlo import FixedKa, SimConfig, estimate_plr
from irsagmac.protocol import IrsaDistribution

n_frames = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
dist = IrsaDistribution.from_pairs([(2, 0.5102), (4, 0.4898)])
pe = ErrorProfile.uniform(2, 0.2)

print(f"{'G':>5} {'N_s':>6} {'MC PLR':>10} {'CI95':>9} {'DE PLR':>9}")
for n_slots in (400, 2000):
    for g in (0.8, 1.2, 1.4):
        cfg = SimConfig(dist, pe, n_slots, FixedKa(round(g * n_slots)), n_frames, rng_seed=1)
        r = estimate_plr(cfg, workers=4)
        de = run_de(DeParams(dist, pe, g)).plr(dist)
        print(f"{g:5.1f} {n_slots:6d} {r.plr_mean:10.5f} {r.plr_ci95_halfwidth:9.5f} {de:9.5f}")
