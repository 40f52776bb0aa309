"""A single forward GRW trajectory in a harmonic trap.

Start from a displaced Gaussian, let it evolve under the Schroedinger
equation, and interrupt it at Poisson times with Gaussian jumps whose centres
are drawn from the Born-rule density. The collapse record is printed in its
on-disk text format at the end.
"""
import numpy as np

from chronocollapse import (
    GridSpec,
    ModelParams,
    PotentialSpec,
    expected_energy,
    gaussian_packet,
    generate_trajectory,
    split_stream,
)
from chronocollapse.persistence import format_record
from chronocollapse.state import mean_position, position_variance

grid = GridSpec(256, -16.0, 0.125)
params = ModelParams(a=1.0, rate=1.0, potential=PotentialSpec.harmonic(1.0), max_substep=0.01)
psi0 = gaussian_packet(grid, center=1.5, sigma=1.8)

print(f"initial <x> = {mean_position(psi0):+.3f}, var = {position_variance(psi0):.3f}, "
      f"E = {expected_energy(psi0, params):.3f}")


def show(before, after, event):
    print(f"  t = {event.time:6.3f}  z = {event.center:+.3f}  "
          f"var {position_variance(before):.3f} -> {position_variance(after):.3f}")


traj = generate_trajectory(psi0, params, 8.0, split_stream(2024, 0), on_event=show)

print(f"{len(traj.record)} jumps; final E = {expected_energy(traj.state, params):.3f}")
print("PIT values of the realized centres:", np.round(traj.pits, 3))
print()
print(format_record(traj.record))
