"""Boundary-conditioned collapse probabilities on a small random model.

A 3-level system passes through four steps, each a random unitary followed by
a two-outcome POVM. With a final-time condition (the state must end in a
chosen 2-dimensional subspace) the outcome distribution at step 1 is obtained
two ways: exactly, by enumerating every history and weighting it by its
terminal projection, and by rejection sampling.
"""
import math

from chronocollapse import discrete as dm
from chronocollapse.persistence import split_stream

rng = split_stream(99, 0)
model = dm.random_model(3, 4, rng, outcomes=2)
psi = dm.random_state(3, rng)
cond = dm.BoundaryCondition.onto("final", dm.random_state(3, rng), dm.random_state(3, rng))

hist = dm.enumerate_histories(model, psi, "forward")
print(f"{len(hist)} histories, total probability {sum(h.probability for h in hist):.12f}")
print(f"P(final condition) = {dm.condition_probability(model, psi, cond):.6f}")

plain = dm.outcome_distribution(model, psi, 1, "forward")
exact = dm.conditioned_distribution(model, psi, 1, cond)
est = dm.rejection_sample(model, psi, 1, cond, 100_000, rng)
print(f"{'outcome':>8} {'plain':>9} {'given C':>9} {'sampled':>9} {'sigma':>6}")
for k in exact:
    se = est.standard_error(k, exact[k])
    z = abs(est.frequencies[k] - exact[k]) / se if se else math.nan
    print(f"{k:>8} {plain[k]:9.5f} {exact[k]:9.5f} {est.frequencies[k]:9.5f} {z:6.2f}")
print(f"accepted {est.accepted} of {est.runs} sampled histories")
