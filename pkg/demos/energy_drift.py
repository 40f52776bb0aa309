"""Energy gain from collapses of a free particle.

Each jump multiplies the wave function by a Gaussian of width a, which narrows
it in position and widens it in momentum. On average this adds hbar^2/(4 m a^2)
of kinetic energy per jump, so the ensemble-mean energy grows linearly at rate
lambda times that amount.
"""
import warnings

from chronocollapse import experiments as ex

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    rep = ex.run_energy_drift(ex.default_config("energy-drift", seed=5, trajectories=400))

m = rep.metrics
print(f"{m['jumps']} jumps: mean gain {m['mean_gain_per_jump']:.4f} +- {m['gain_standard_error']:.4f} "
      f"(expected {m['expected_gain_per_jump']})")
print(f"slope {m['slope']:.3f} +- {m['slope_standard_error']:.3f} (expected {m['expected_slope']})")
print("\n  time   <E>")
for t, e, _ in rep.table("series").rows:
    print(f"  {t:4.2f}  {e:.4f}")
