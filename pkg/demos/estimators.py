"""How often the receiver misjudges the number of users in a slot.

Run: python demos/estimators.py
The energy estimator thresholds the received power; the pilot estimator
correlates against known pilot symbols.  Both feed an effective error profile.
"""
from irsagmac.density_evolution import ErrorProfile
from irsagmac.phy import EstimatorModel, effective_profile, energy_estimator_failure, pilot_estimator_failure

snr, n = 5.0, 200
print(f"energy estimator, n={n}, snr={snr}")
for t in range(5):
    print(f"  t={t}: {energy_estimator_failure(t, snr, n):.3e}")
print("pilot estimator")
for n_p in (1, 2, 4, 6, 8, 12):
    print(f"  n_p={n_p:2d}: {pilot_estimator_failure(n_p, snr):.3e}")

base = ErrorProfile.uniform(2, 0.01)
for est in (EstimatorModel.perfect(2), EstimatorModel.energy(2, snr, n), EstimatorModel.pilot(2, 6, snr)):
    probs = ", ".join(f"{p:.4f}" for p in effective_profile(base, est).probs)
    print(f"{est.kind.value:>11}: effective P_E = ({probs})")
