"""GRW jumps: the Gaussian jump operator, collapse-centre densities,
sampling, Poisson scheduling and forward trajectory generation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import DegenerateCollapseError, DegenerateStateError
from .propagator import evolve_to
from .state import (
    Direction,
    GridSpec,
    ModelParams,
    WaveFunction,
    normalize,
    position_density,
)

KERNEL_HALF_WIDTH = 6.0  # in units of a
UNDERFLOW_NORM = 1e-150


def jump_amplitude(x, z, a: float):
    """GRW jump profile (pi a^2)^(-1/4) exp(-(x - z)^2 / (2 a^2)).

    Works elementwise on arrays. Its square integrates to one over ``z``.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    x = np.asarray(x, dtype=float)
    out = (math.pi * a * a) ** -0.25 * np.exp(-((x - z) ** 2) / (2 * a * a))
    return float(out) if out.ndim == 0 else out


def jump_kernel_squared(offsets, a: float):
    """j^2 as a function of displacement: Gaussian of variance a^2 / 2."""
    offsets = np.asarray(offsets, dtype=float)
    return np.exp(-(offsets ** 2) / (a * a)) / math.sqrt(math.pi * a * a)


@dataclass(frozen=True)
class CollapseEvent:
    time: float
    particle: int
    center: float


@dataclass(frozen=True)
class CollapseRecord:
    """Time-ordered collapse centres shared by the forward and backward pictures."""

    params: ModelParams
    grid: GridSpec
    events: Tuple[CollapseEvent, ...] = ()
    t_start: float = 0.0
    t_end: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.t_end < self.t_start:
            raise ValueError("t_end precedes t_start")
        prev = -math.inf
        for k, ev in enumerate(self.events):
            if not ev.time > prev:
                raise ValueError(f"event {k} at t={ev.time!r} breaks strict time ordering")
            if not self.t_start <= ev.time <= self.t_end:
                raise ValueError(f"event {k} at t={ev.time!r} outside record span")
            self.grid.check_particle(ev.particle)
            if not math.isfinite(ev.center):
                raise ValueError(f"event {k} has a non-finite centre")
            prev = ev.time

    def __len__(self):
        return len(self.events)

    @property
    def centers(self) -> np.ndarray:
        return np.array([ev.center for ev in self.events])

    @property
    def times(self) -> np.ndarray:
        return np.array([ev.time for ev in self.events])


@dataclass(frozen=True, eq=False)
class CollapseDensity:
    """Probability density of collapse centres on a uniform z grid.

    ``cumulative`` is the CDF at the nodes; between nodes the CDF is linear.
    """

    z: np.ndarray
    values: np.ndarray
    cumulative: np.ndarray = field(repr=False)

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])

    @classmethod
    def from_values(cls, z, values) -> "CollapseDensity":
        z = np.asarray(z, dtype=float)
        values = np.clip(np.asarray(values, dtype=float), 0.0, None)
        dz = z[1] - z[0]
        cells = 0.5 * (values[1:] + values[:-1]) * dz
        cumulative = np.concatenate([[0.0], np.cumsum(cells)])
        total = cumulative[-1]
        if not total > 0:
            raise DegenerateStateError("collapse density has no mass")
        values = values / total
        cumulative = cumulative / total
        cumulative[-1] = 1.0
        for arr in (z, values, cumulative):
            arr.setflags(write=False)
        return cls(z, values, cumulative)

    def cdf(self, z):
        return np.interp(z, self.z, self.cumulative, left=0.0, right=1.0)

    def quantile(self, u):
        """Inverse of :meth:`cdf` for ``u`` in [0, 1]."""
        u = np.asarray(u, dtype=float)
        cum = self.cumulative
        idx = np.searchsorted(cum, u, side="right") - 1
        idx = np.clip(idx, 0, len(cum) - 2)
        # skip zero-width cells so the slope below is finite
        lo, hi = cum[idx], cum[idx + 1]
        flat = hi <= lo
        if np.any(flat):
            idx = np.where(flat, np.searchsorted(cum, u, side="left") - 1, idx)
            idx = np.clip(idx, 0, len(cum) - 2)
            lo, hi = cum[idx], cum[idx + 1]
        frac = np.where(hi > lo, (u - lo) / np.where(hi > lo, hi - lo, 1.0), 0.0)
        out = self.z[idx] + np.clip(frac, 0.0, 1.0) * self.dz
        return float(out) if out.ndim == 0 else out

    def mean(self) -> float:
        return float(np.trapezoid(self.values * self.z, self.z))

    def variance(self) -> float:
        mu = self.mean()
        return float(np.trapezoid(self.values * (self.z - mu) ** 2, self.z))


def z_grid(grid: GridSpec, a: float) -> Tuple[np.ndarray, int]:
    """Position axis extended by ``6a`` on each side, and the pad width in points."""
    pad = int(math.ceil(KERNEL_HALF_WIDTH * a / grid.dx))
    z = grid.x_min + grid.dx * np.arange(-pad, grid.num_points + pad)
    return z, pad


def convolve_with_jump(marginal: np.ndarray, grid: GridSpec, a: float) -> Tuple[np.ndarray, np.ndarray]:
    """Spectral linear convolution of a position density with j^2."""
    z, pad = z_grid(grid, a)
    kernel = jump_kernel_squared(grid.dx * np.arange(-pad, pad + 1), a)
    size = len(marginal) + len(kernel) - 1
    nfft = 1 << (size - 1).bit_length()
    out = np.fft.irfft(np.fft.rfft(marginal, nfft) * np.fft.rfft(kernel, nfft), nfft)[:size]
    return z, out * grid.dx


def collapse_density(psi: WaveFunction, i: int, a: float) -> CollapseDensity:
    """Born-rule density of the next collapse centre for particle ``i``."""
    marginal = position_density(psi, i)
    z, values = convolve_with_jump(marginal, psi.grid, a)
    return CollapseDensity.from_values(z, values)


def povm_completeness_error(grid: GridSpec, a: float) -> float:
    """max over grid x of |sum_z j^2(z - x) dz - 1| on the collapse z grid."""
    z, _ = z_grid(grid, a)
    worst = 0.0
    for x in grid.x:
        total = np.sum(jump_kernel_squared(z - x, a)) * grid.dx
        worst = max(worst, abs(total - 1.0))
    return worst


def apply_jump(psi: WaveFunction, event: CollapseEvent, a: float) -> WaveFunction:
    """Multiply by j(z - x_i) along particle ``i``'s axis and renormalize."""
    grid = psi.grid
    axis = grid.check_particle(event.particle)
    exponent = -((grid.x - event.center) ** 2) / (2 * a * a)
    # shift the exponent so the largest factor over occupied points is 1;
    # the overall scale is removed by renormalization anyway
    occupied = position_density(psi, event.particle) > 0
    exponent = exponent - exponent[occupied].max()
    shape = [1] * grid.num_particles
    shape[axis] = grid.num_points
    amps = psi.amplitudes * np.exp(exponent).reshape(shape)
    n = math.sqrt(float(np.sum(np.abs(amps) ** 2)) * grid.cell_volume)
    if not n > UNDERFLOW_NORM:
        raise DegenerateCollapseError(
            f"jump about z={event.center!r} for particle {event.particle} annihilated the state"
        )
    return normalize(psi.evolved_to(amps, psi.time))


def sample_center(density: CollapseDensity, rng: np.random.Generator) -> float:
    """Inverse-CDF draw of a collapse centre (one uniform from ``rng``)."""
    return density.quantile(rng.random())


def schedule_jumps(
    params: ModelParams,
    duration: float,
    num_particles: int,
    rng: np.random.Generator,
    t_start: float = 0.0,
) -> List[Tuple[float, int]]:
    """Merged Poisson jump times in ``(t_start, t_start + duration]``.

    One independent process of rate ``params.rate`` per particle. Times come
    out strictly increasing; a collision is resolved by moving the later-drawn
    time up by one ulp.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    if params.rate == 0:
        return []
    t_end = t_start + duration
    drawn = []
    scale = 1.0 / params.rate
    for particle in range(1, num_particles + 1):
        t = t_start
        while True:
            t = t + rng.exponential(scale)
            if t > t_end:
                break
            drawn.append((t, particle))
    order = sorted(range(len(drawn)), key=lambda k: (drawn[k][0], k))
    out = []
    prev = -math.inf
    for k in order:
        t, particle = drawn[k]
        if t <= prev:
            t = float(np.nextafter(prev, math.inf))
        out.append((t, particle))
        prev = t
    return out


class Trajectory(NamedTuple):
    state: WaveFunction
    record: CollapseRecord
    pits: np.ndarray  # CDF value of each realized centre under its own density


def generate_trajectory(
    psi0: WaveFunction,
    params: ModelParams,
    duration: float,
    rng: np.random.Generator,
    max_events: Optional[int] = None,
    on_event=None,
) -> Trajectory:
    """Forward GRW dynamics: unitary evolution interrupted by sampled jumps.

    With ``max_events`` the run stops right after that many jumps. ``on_event``
    is called as ``on_event(before, after, event)`` around every jump.
    """
    if psi0.direction is not Direction.FORWARD:
        raise ValueError("forward trajectories need a forward-tagged state")
    psi = normalize(psi0)
    t_start = psi.time
    schedule = schedule_jumps(params, duration, psi.grid.num_particles, rng, t_start)
    if max_events is not None:
        schedule = schedule[:max_events]
    events, pits = [], []
    for t, particle in schedule:
        psi = evolve_to(psi, t, params)
        density = collapse_density(psi, particle, params.a)
        z = sample_center(density, rng)
        event = CollapseEvent(t, particle, z)
        after = apply_jump(psi, event, params.a)
        if on_event is not None:
            on_event(psi, after, event)
        pits.append(float(density.cdf(z)))
        events.append(event)
        psi = after
    if max_events is not None and len(schedule) == max_events:
        t_end = psi.time
    else:
        t_end = t_start + duration
        psi = evolve_to(psi, t_end, params)
    record = CollapseRecord(params, psi.grid, tuple(events), t_start, t_end)
    return Trajectory(psi, record, np.array(pits))
