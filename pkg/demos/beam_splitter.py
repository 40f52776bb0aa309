"""The beam-splitter photon, forward, backward and with an initial condition.

A photon leaves the source S, meets a 50/50 beam splitter and is detected at D
or at the ceiling C. Read forward, D and C are equally likely. Read backward
from a detection at D, the photon is equally likely to have come from the
source or from the floor F. Once we also know the photon started in S, the
backward rule conditioned on that initial state puts all weight on S.
"""
from pathlib import Path

from chronocollapse import discrete as dm
from chronocollapse.persistence import load_model, split_stream

report = dm.beam_splitter_scenario(runs=100_000, rng=split_stream(1, 0))
print(report.to_text())

# the same model read from the text format
model = load_model(Path(__file__).with_name("beam_splitter.model"))
det = model.basis_state("D")
dist = dm.outcome_distribution(model, det, 0, "backward")
print("\nfrom file, backward from D:", {model.outcome_label(0, k): round(p, 12) for k, p in dist.items()})
check = dm.replay_consistency_check(model, model.basis_state("S"))
print(f"forward histories replayed backward: {check.histories}, violations: {len(check.violations)}")
