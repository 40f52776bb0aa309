import math

import numpy as np
import pytest
from scipy import integrate, stats

from chronocollapse.errors import DegenerateCollapseError
from chronocollapse.grw import (
    CollapseDensity,
    CollapseEvent,
    CollapseRecord,
    apply_jump,
    collapse_density,
    generate_trajectory,
    jump_amplitude,
    jump_kernel_squared,
    povm_completeness_error,
    sample_center,
    schedule_jumps,
    z_grid,
)
from chronocollapse.persistence import format_record, split_stream
from chronocollapse.propagator import evolve
from chronocollapse.state import (
    Direction,
    GridSpec,
    ModelParams,
    PotentialSpec,
    WaveFunction,
    fidelity,
    gaussian_packet,
    mean_position,
    normalize,
    position_density,
)
from chronocollapse.stats import chi_square_uniform_bins

TRAP = ModelParams(potential=PotentialSpec.harmonic(1.0))


def test_jump_amplitude_peak():
    # (pi a^2)^(-1/4) at x = z
    assert abs(jump_amplitude(0.0, 0.0, 1.0) - 0.751126) < 1e-6
    assert jump_amplitude(1.3, 1.3, 2.0) == pytest.approx((4 * math.pi) ** -0.25)


def test_jump_amplitude_is_even():
    x = np.linspace(-4, 4, 33)
    np.testing.assert_array_equal(jump_amplitude(x, 0.7, 1.3), jump_amplitude(1.4 - x, 0.7, 1.3))


def test_jump_amplitude_rejects_bad_width():
    with pytest.raises(ValueError):
        jump_amplitude(0.0, 0.0, 0.0)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_povm_completeness_by_quadrature(a):
    for x in (-3.0, 0.0, 2.5):
        total, _ = integrate.quad(lambda z: jump_amplitude(x, z, a) ** 2, -np.inf, np.inf, epsabs=1e-13)
        assert abs(total - 1.0) < 1e-9


def test_kernel_squared_matches_amplitude():
    d = np.linspace(-5, 5, 41)
    np.testing.assert_allclose(jump_kernel_squared(d, 1.2), jump_amplitude(d, 0.0, 1.2) ** 2, rtol=1e-14)


@pytest.mark.parametrize("a", [0.5, 1.0, 1.7])
def test_povm_completeness_on_grid(trap_grid, a):
    assert povm_completeness_error(trap_grid, a) < 1e-9


def test_z_grid_extends_six_widths(trap_grid):
    z, pad = z_grid(trap_grid, 1.0)
    assert pad == 48
    assert z[0] == pytest.approx(trap_grid.x_min - 6.0)
    assert z[-1] == pytest.approx(trap_grid.x[-1] + 6.0)


def test_jump_on_localized_state_keeps_mean():
    # sigma = 1e-5 << a; the posterior mean moves by ~ z sigma^2 / a^2
    g = GridSpec(256, 3.0 - 128e-6, 1e-6)
    psi = gaussian_packet(g, 3.0, 1e-5)
    x0 = mean_position(psi)
    for z in (-2.0, 3.5, 6.0):
        out = apply_jump(psi, CollapseEvent(0.0, 1, z), 1.0)
        assert abs(mean_position(out) - x0) < 1e-8


def test_jump_selects_branch_of_superposition():
    g = GridSpec(512, -20.0, 0.078125)
    x = g.x
    amps = np.exp(-(x - 10) ** 2 / 2) + np.exp(-(x + 10) ** 2 / 2)
    psi = normalize(WaveFunction(g, amps))
    out = apply_jump(psi, CollapseEvent(0.0, 1, 10.0), 1.0)
    right = position_density(out)[x > 0].sum() * g.dx
    # oracle: multiply by the jump profile explicitly
    direct = np.abs(amps * np.exp(-(x - 10) ** 2 / 2)) ** 2
    oracle = direct[x > 0].sum() / direct.sum()
    assert right >= 1 - 1e-6
    assert abs(right - oracle) < 1e-12


@pytest.mark.parametrize("sigma,z,a", [(1.3, 0.8, 1.0), (0.6, -2.0, 1.0), (2.0, 1.5, 0.7)])
def test_posterior_mean_of_gaussian(trap_grid, sigma, z, a):
    # amplitude exp(-x^2 / 2 sigma^2): the shift is z sigma^2 / (sigma^2 + a^2)
    psi = normalize(WaveFunction(trap_grid, np.exp(-trap_grid.x ** 2 / (2 * sigma ** 2))))
    out = apply_jump(psi, CollapseEvent(0.0, 1, z), a)
    assert abs(mean_position(out) - z * sigma ** 2 / (sigma ** 2 + a ** 2)) < 1e-6
    # density variance s^2 times j^2 (variance a^2 / 2)
    s = sigma
    psi = gaussian_packet(trap_grid, 0.0, s)
    out = apply_jump(psi, CollapseEvent(0.0, 1, z), a)
    assert abs(mean_position(out) - z * s ** 2 / (s ** 2 + a ** 2 / 2)) < 1e-6


def test_jump_far_outside_support_is_degenerate(trap_grid):
    g = GridSpec(256, -2.0, 0.01)
    psi = gaussian_packet(g, 0.0, 0.05)
    # every occupied point sees the same tiny factor; renormalization rescues it
    out = apply_jump(psi, CollapseEvent(0.0, 1, 40.0), 1.0)
    assert mean_position(out) > mean_position(psi)
    empty = np.zeros(g.size, dtype=complex)
    empty[0] = 1e-160
    with pytest.raises(DegenerateCollapseError):
        apply_jump(WaveFunction(g, empty), CollapseEvent(0.0, 1, 0.0), 1.0)


def test_jump_acts_on_one_particle_only():
    g = GridSpec(64, -8.0, 0.25, num_particles=2)
    psi = gaussian_packet(g, (0.0, 0.0), (1.5, 1.5))
    out = apply_jump(psi, CollapseEvent(0.0, 2, 2.0), 1.0)
    np.testing.assert_allclose(position_density(out, 1), position_density(psi, 1), atol=1e-12)
    assert mean_position(out, 2) > 0.5
    assert out.grid == psi.grid


@pytest.mark.parametrize("mu,sigma", [(0.0, 1.0), (1.5, 0.6), (-2.0, 2.0)])
def test_collapse_density_of_gaussian(trap_grid, mu, sigma):
    psi = gaussian_packet(trap_grid, mu, sigma)
    dens = collapse_density(psi, 1, 1.0)
    analytic = stats.norm.pdf(dens.z, mu, math.sqrt(sigma ** 2 + 0.5))
    assert np.max(np.abs(dens.values - analytic)) < 1e-6
    assert abs(np.trapezoid(dens.values, dens.z) - 1.0) < 1e-9


def test_collapse_density_against_direct_quadrature(trap_grid):
    x = trap_grid.x
    amps = np.exp(-(x - 1) ** 2 / 1.5) + 0.6 * np.exp(-(x + 2.5) ** 2 / 0.5) * np.exp(1j * x)
    psi = normalize(WaveFunction(trap_grid, amps))
    dens = collapse_density(psi, 1, 1.0)
    rho = np.abs(psi.amplitudes) ** 2
    # oracle: P(z) = sum_x |j(z - x) psi(x)|^2 dx, evaluated point by point
    oracle = np.array([np.sum(jump_amplitude(x, z, 1.0) ** 2 * rho) * trap_grid.dx for z in dens.z])
    assert np.max(np.abs(dens.values - oracle)) < 1e-9


def test_collapse_density_of_point_state(trap_grid):
    amps = np.zeros(trap_grid.size)
    k0 = 140
    amps[k0] = 1.0
    dens = collapse_density(WaveFunction(trap_grid, amps), 1, 1.0)
    x0 = trap_grid.x[k0]
    np.testing.assert_allclose(dens.values, jump_kernel_squared(dens.z - x0, 1.0), atol=1e-10)


def test_collapse_density_second_particle():
    g = GridSpec(64, -8.0, 0.25, num_particles=2)
    psi = gaussian_packet(g, (-1.0, 1.0), (0.7, 1.2))
    dens = collapse_density(psi, 2, 1.0)
    assert dens.mean() == pytest.approx(1.0, abs=1e-6)
    assert dens.variance() == pytest.approx(1.2 ** 2 + 0.5, abs=1e-6)


def _uniform_density(dz=0.01):
    z = np.arange(0.0, 1.0 + dz / 2, dz)
    return CollapseDensity.from_values(z, np.ones_like(z))


class _FixedDraw:
    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def test_sample_center_median_of_uniform():
    dens = _uniform_density()
    assert abs(sample_center(dens, _FixedDraw(0.5)) - 0.5) <= dens.dz


def test_quantile_inverts_cdf():
    dens = collapse_density(gaussian_packet(GridSpec(256, -16.0, 0.125), 0.3, 0.8), 1, 1.0)
    u = np.linspace(1e-6, 1 - 1e-6, 501)
    np.testing.assert_allclose(dens.cdf(dens.quantile(u)), u, atol=1e-12)


def test_sample_center_is_deterministic(trap_grid):
    dens = collapse_density(gaussian_packet(trap_grid, 0.0, 1.0), 1, 1.0)
    a = [sample_center(dens, r) for r in [split_stream(5, 0)] for _ in range(50)]
    b = [sample_center(dens, r) for r in [split_stream(5, 0)] for _ in range(50)]
    assert a == b


def test_samples_follow_analytic_gaussian(trap_grid):
    dens = collapse_density(gaussian_packet(trap_grid, 0.5, 1.0), 1, 1.0)
    rng = split_stream(11, 0)
    z = np.array([sample_center(dens, rng) for _ in range(10_000)])
    res = stats.kstest(z, stats.norm(0.5, math.sqrt(1.5)).cdf)
    assert res.pvalue > 0.01


def test_sample_frequencies_chi_square(trap_grid):
    dens = collapse_density(gaussian_packet(trap_grid, -0.5, 0.8), 1, 1.0)
    rng = split_stream(12, 0)
    z = np.array([sample_center(dens, rng) for _ in range(10_000)])
    assert chi_square_uniform_bins(dens.cdf(z), bins=50) > 0.001


def test_schedule_empty_without_collapse():
    assert schedule_jumps(ModelParams(rate=0.0), 100.0, 2, split_stream(1, 0)) == []


def test_schedule_mean_count():
    params = ModelParams(rate=1.0)
    counts = np.array([len(schedule_jumps(params, 100.0, 2, split_stream(3, k))) for k in range(1000)])
    se = math.sqrt(200 / 1000)
    assert abs(counts.mean() - 200) < 3 * se


def test_schedule_strictly_increasing_and_in_range():
    params = ModelParams(rate=3.0)
    sched = schedule_jumps(params, 10.0, 3, split_stream(4, 0), t_start=2.0)
    times = np.array([t for t, _ in sched])
    assert np.all(np.diff(times) > 0)
    assert times[0] > 2.0 and times[-1] <= 12.0
    assert {p for _, p in sched} == {1, 2, 3}


class _ConstantGaps:
    def exponential(self, scale):
        return 1.0


def test_schedule_breaks_ties_by_one_ulp():
    sched = schedule_jumps(ModelParams(rate=1.0), 3.5, 2, _ConstantGaps())
    times = [t for t, _ in sched]
    assert [p for _, p in sched] == [1, 2, 1, 2, 1, 2]
    assert times[1] == np.nextafter(1.0, 2.0)
    assert all(b > a for a, b in zip(times, times[1:]))


def test_schedule_rejects_bad_duration():
    with pytest.raises(ValueError):
        schedule_jumps(ModelParams(), 0.0, 1, split_stream(1, 0))


def test_record_validation(trap_grid):
    ev = lambda t, i=1, z=0.0: CollapseEvent(t, i, z)
    with pytest.raises(ValueError):
        CollapseRecord(TRAP, trap_grid, (ev(1.0), ev(1.0)), 0.0, 2.0)
    with pytest.raises(ValueError):
        CollapseRecord(TRAP, trap_grid, (ev(3.0),), 0.0, 2.0)
    with pytest.raises(IndexError):
        CollapseRecord(TRAP, trap_grid, (ev(1.0, 2),), 0.0, 2.0)
    with pytest.raises(ValueError):
        CollapseRecord(TRAP, trap_grid, (ev(1.0, 1, math.inf),), 0.0, 2.0)


def test_trajectory_without_collapse_is_unitary(trap_grid):
    params = TRAP.with_(rate=0.0)
    psi = gaussian_packet(trap_grid, 1.0, 0.7)
    traj = generate_trajectory(psi, params, 2.5, split_stream(1, 0))
    assert len(traj.record) == 0 and traj.record.t_end == 2.5
    assert fidelity(traj.state, evolve(psi, 2.5, params)) >= 1 - 1e-9


def test_trajectory_record_and_state(trap_grid):
    psi = gaussian_packet(trap_grid, 0.0, 1.0)
    traj = generate_trajectory(psi, TRAP.with_(rate=2.0, max_substep=0.01), 5.0, split_stream(2, 0))
    rec = traj.record
    assert len(rec) == len(traj.pits) > 0
    assert np.all(np.diff(rec.times) > 0)
    assert traj.state.time == 5.0
    assert np.all((traj.pits >= 0) & (traj.pits <= 1))


def test_trajectory_is_reproducible(trap_grid):
    psi = gaussian_packet(trap_grid, 0.3, 1.1)
    params = TRAP.with_(rate=2.0, max_substep=0.01)
    a = generate_trajectory(psi, params, 4.0, split_stream(9, 3)).record
    b = generate_trajectory(psi, params, 4.0, split_stream(9, 3)).record
    assert format_record(a) == format_record(b)


def test_trajectory_event_cap(trap_grid):
    psi = gaussian_packet(trap_grid)
    traj = generate_trajectory(psi, TRAP.with_(rate=5.0, max_substep=0.01), 10.0, split_stream(1, 1), max_events=1)
    assert len(traj.record) == 1
    assert traj.record.t_end == traj.record.events[0].time == traj.state.time


def test_trajectory_needs_forward_state(trap_grid):
    psi = gaussian_packet(trap_grid, direction=Direction.BACKWARD)
    with pytest.raises(ValueError):
        generate_trajectory(psi, TRAP, 1.0, split_stream(1, 0))
