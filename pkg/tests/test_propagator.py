import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronocollapse.errors import BoundaryLeakWarning
from chronocollapse.propagator import evolve, evolve_to, substeps
from chronocollapse.state import (
    Direction,
    GridSpec,
    ModelParams,
    PotentialSpec,
    WaveFunction,
    expected_energy,
    fidelity,
    gaussian_packet,
    mean_position,
    norm,
    position_variance,
)

FREE = ModelParams(potential=PotentialSpec.free())
TRAP = ModelParams(potential=PotentialSpec.harmonic(1.0))


def test_substeps_never_exceed_cap():
    assert substeps(1.0, 1e-3) == (1000, 1e-3)
    n, h = substeps(0.0105, 1e-3)
    assert n == 11 and h <= 1e-3
    assert substeps(1e-6, 1e-3) == (1, 1e-6)


def test_free_packet_spreading(wide_grid):
    psi = gaussian_packet(wide_grid, 0.0, 1.0)
    out = evolve(psi, 2.0, FREE)
    # sigma^2(t) = sigma0^2 (1 + (t / (2 sigma0^2))^2) with hbar = m = 1
    assert abs(position_variance(out) - 2.0) < 1e-3
    assert out.time == 2.0


def test_spreading_with_mass_and_hbar(wide_grid):
    params = ModelParams(mass=2.0, hbar=0.5, potential=PotentialSpec.free())
    s0, t = 0.8, 3.0
    out = evolve(gaussian_packet(wide_grid, 0.0, s0), t, params)
    expected = s0 ** 2 * (1 + (params.hbar * t / (2 * params.mass * s0 ** 2)) ** 2)
    assert abs(position_variance(out) - expected) < 1e-3


def test_free_packet_drifts_with_momentum(wide_grid):
    out = evolve(gaussian_packet(wide_grid, -3.0, 1.0, momentum=1.5), 2.0, FREE)
    assert abs(mean_position(out) - 0.0) < 1e-6


def test_norm_preserved(trap_grid):
    psi = gaussian_packet(trap_grid, 1.0, 0.6, momentum=0.8)
    for dt in (0.01, 0.37, 2.0):
        assert abs(norm(evolve(psi, dt, TRAP)) - 1.0) < 1e-10


def test_unitarity_drift_per_thousand_substeps(trap_grid):
    psi = gaussian_packet(trap_grid, 1.0, 0.6, momentum=0.8)
    n0 = norm(psi)
    out = evolve(psi, 1000 * TRAP.max_substep, TRAP)
    assert abs(norm(out) - n0) < 1e-9


@pytest.mark.parametrize("params", [FREE, TRAP], ids=["free", "harmonic"])
def test_forward_then_backward_is_identity(trap_grid, params):
    psi = gaussian_packet(trap_grid, -1.0, 0.7, momentum=1.1)
    there = evolve(psi, 1.3, params)
    back = evolve(there, 1.3, params, direction=Direction.BACKWARD)
    assert fidelity(back, psi) >= 1 - 1e-9
    assert back.time == pytest.approx(0.0, abs=1e-15)


def test_backward_is_conjugated_forward(trap_grid):
    psi = gaussian_packet(trap_grid, 0.5, 0.9, momentum=-0.4, direction=Direction.BACKWARD)
    back = evolve(psi, 0.8, TRAP)
    fwd = evolve(WaveFunction(trap_grid, np.conj(psi.amplitudes)), 0.8, TRAP)
    np.testing.assert_array_equal(back.amplitudes, np.conj(fwd.amplitudes))
    assert back.time == pytest.approx(-0.8)


def test_backward_focusing_undoes_spreading(wide_grid):
    psi = gaussian_packet(wide_grid, 0.0, 1.0)
    spread = evolve(psi, 2.0, FREE).with_direction(Direction.BACKWARD)
    focused = evolve(spread, 2.0, FREE)
    assert abs(position_variance(focused) - 1.0) < 1e-9


def test_energy_conserved_in_trap(trap_grid):
    psi = gaussian_packet(trap_grid, 1.5, 0.6, momentum=0.5)
    e0 = expected_energy(psi, TRAP)
    assert abs(expected_energy(evolve(psi, 10.0, TRAP), TRAP) - e0) < 1e-6


def test_harmonic_period_returns_state(trap_grid):
    psi = gaussian_packet(trap_grid, 2.0, 0.5)
    out = evolve(psi, 2 * math.pi, TRAP)
    assert fidelity(out, psi) > 1 - 1e-6


def test_rejects_non_positive_interval(trap_grid):
    psi = gaussian_packet(trap_grid)
    for dt in (0.0, -1.0):
        with pytest.raises(ValueError):
            evolve(psi, dt, TRAP)


def test_leak_guard_warns():
    g = GridSpec(128, -8.0, 0.125)
    psi = gaussian_packet(g, 5.0, 0.5, momentum=4.0)
    with pytest.warns(BoundaryLeakWarning):
        evolve(psi, 1.0, FREE)


def test_leak_guard_quiet_for_contained_state(trap_grid):
    with warnings.catch_warnings():
        warnings.simplefilter("error", BoundaryLeakWarning)
        evolve(gaussian_packet(trap_grid), 1.0, TRAP)


def test_evolve_to_sets_clock_exactly(trap_grid):
    psi = gaussian_packet(trap_grid)
    t = 0.1
    for _ in range(7):
        psi = evolve_to(psi, t, TRAP)
        t += 0.1
    assert psi.time == t - 0.1
    assert evolve_to(psi, psi.time, TRAP) is psi


def test_evolve_to_refuses_wrong_way(trap_grid):
    fwd = gaussian_packet(trap_grid, time=1.0)
    with pytest.raises(ValueError):
        evolve_to(fwd, 0.5, TRAP)
    bwd = fwd.with_direction(Direction.BACKWARD)
    assert evolve_to(bwd, 0.5, TRAP).time == 0.5


def test_two_particle_free_evolution_factorizes():
    g2 = GridSpec(64, -8.0, 0.25, num_particles=2)
    g1 = GridSpec(64, -8.0, 0.25)
    psi = gaussian_packet(g2, (0.5, -1.0), (0.8, 1.1), momentum=(0.3, 0.0))
    out = evolve(psi, 0.7, FREE)
    a = evolve(gaussian_packet(g1, 0.5, 0.8, momentum=0.3), 0.7, FREE).amplitudes
    b = evolve(gaussian_packet(g1, -1.0, 1.1), 0.7, FREE).amplitudes
    np.testing.assert_allclose(out.amplitudes, np.multiply.outer(a, b), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(center=st.floats(-2, 2), sigma=st.floats(0.5, 2.0), k=st.floats(-1, 1), dt=st.floats(0.01, 1.5))
def test_reversibility_property(center, sigma, k, dt):
    g = GridSpec(256, -16.0, 0.125)
    psi = gaussian_packet(g, center, sigma, momentum=k)
    there = evolve(psi, dt, TRAP)
    assert abs(norm(there) - 1.0) < 1e-10
    back = evolve(there, dt, TRAP, direction=Direction.BACKWARD)
    assert fidelity(back, psi) >= 1 - 1e-9
