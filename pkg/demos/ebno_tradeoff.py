"""Energy per bit needed at a given spectrum efficiency.

Run: python demos/ebno_tradeoff.py
Compares the convergence-boundary limit (best possible IRSA protocol with
Lambda_1 = 0) with the Example 1 protocol and slotted ALOHA, for several
multi-packet reception capabilities T.  Uses the normal-approximation
surrogate for the sum-rate bound, so values are indicative, not exact.
"""
import math

from irsagmac.errors import Infeasible
from irsagmac.protocol import IrsaDistribution
from irsagmac.tradeoff import ScenarioSpec, achievable_ebno_asymptotic, boundary_ebno

example1 = IrsaDistribution.from_pairs([(2, 0.5102), (4, 0.4898)])
sa = IrsaDistribution((1.0,))


def fmt(fn, spec):
    try:
        return f"{fn(spec).ebno_db:7.2f}"
    except Infeasible:
        return "   inf."


print("Eb/N0 [dB], log2 M = 100, eps = 0.005, Option 1")
print(f"{'T':>2} {'S':>5} {'boundary':>9} {'Example1':>9} {'SA':>7}")
for t in (1, 2, 4):
    for s in (0.05, 0.25, 0.5, 1.0):
        base = dict(log2_m=100, target_eps=0.005, t_mpr=t, spectrum_efficiency=s)
        b = fmt(boundary_ebno, ScenarioSpec(lambda1=0.0, **base))
        a = fmt(achievable_ebno_asymptotic, ScenarioSpec(dist=example1, **base))
        z = fmt(achievable_ebno_asymptotic, ScenarioSpec(dist=sa, **base))
        print(f"{t:2d} {s:5.2f} {b:>9} {a:>9} {z:>7}")
