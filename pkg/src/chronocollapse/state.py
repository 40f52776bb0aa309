"""N-particle wave functions on a uniform periodic position grid.

Amplitudes are stored as an ``N``-dimensional array of shape
``(num_points,) * N`` (row-major, axis ``i-1`` belongs to particle ``i``).
Particle indices are 1-based throughout the package.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateStateError,
    IncompatibleGridError,
    InvalidStateError,
)

# documented physical GRW values; simulations run in natural units
GRW_WIDTH_METRES = 1e-7
GRW_RATE_PER_SECOND = 1e-16


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class GridSpec:
    num_points: int
    x_min: float
    dx: float
    num_particles: int = 1

    def __post_init__(self):
        if int(self.num_points) != self.num_points or self.num_points < 2:
            raise ValueError("num_points must be an integer >= 2")
        if not (self.dx > 0 and math.isfinite(self.dx)):
            raise ValueError("dx must be positive and finite")
        if not math.isfinite(self.x_min):
            raise ValueError("x_min must be finite")
        if int(self.num_particles) != self.num_particles or self.num_particles < 1:
            raise ValueError("num_particles must be a positive integer")

    @classmethod
    def centered(cls, num_points: int, length: float, num_particles: int = 1) -> "GridSpec":
        """Grid of ``num_points`` cells spanning ``[-length/2, length/2)``."""
        dx = length / num_points
        return cls(num_points, -length / 2, dx, num_particles)

    @property
    def shape(self) -> tuple:
        return (self.num_points,) * self.num_particles

    @property
    def size(self) -> int:
        return self.num_points ** self.num_particles

    @property
    def length(self) -> float:
        return self.num_points * self.dx

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.num_points)

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.num_particles

    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.num_points, d=self.dx)

    def check_particle(self, i: int) -> int:
        """Return the array axis of 1-based particle ``i``."""
        if int(i) != i or not 1 <= i <= self.num_particles:
            raise IndexError(f"particle index {i} outside [1, {self.num_particles}]")
        return int(i) - 1


@dataclass(frozen=True)
class PotentialSpec:
    """External potential: ``free``, ``harmonic`` (with ``omega``) or ``tabulated``.

    Tabulated values are either one value per grid point (applied to every
    particle) or a full table over the N-particle grid, flattened row-major.
    """

    kind: str = "free"
    omega: float = 1.0
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("free", "harmonic", "tabulated"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "harmonic" and not (self.omega > 0 and math.isfinite(self.omega)):
            raise ValueError("harmonic omega must be positive")
        if self.kind == "tabulated":
            if self.values is None:
                raise ValueError("tabulated potential needs values")
            vals = np.asarray(self.values, dtype=float)
            if vals.ndim != 1 or not np.all(np.isfinite(vals)):
                raise ValueError("tabulated values must be a finite 1-d sequence")
            object.__setattr__(self, "values", tuple(float(v) for v in vals))

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def harmonic(cls, omega: float = 1.0):
        return cls("harmonic", omega=float(omega))

    @classmethod
    def tabulated(cls, values: Sequence[float]):
        return cls("tabulated", values=tuple(values))

    def on_grid(self, grid: GridSpec, mass: float = 1.0) -> np.ndarray:
        """Potential energy over the full N-particle grid."""
        if self.kind == "free":
            return np.zeros(grid.shape)
        if self.kind == "harmonic":
            single = 0.5 * mass * self.omega ** 2 * grid.x ** 2
            return _sum_over_particles(single, grid)
        vals = np.asarray(self.values, dtype=float)
        if vals.size == grid.num_points:
            return _sum_over_particles(vals, grid)
        if vals.size == grid.size:
            return vals.reshape(grid.shape)
        raise IncompatibleGridError(
            f"tabulated potential has {vals.size} values; grid needs "
            f"{grid.num_points} or {grid.size}"
        )

    def describe(self) -> str:
        if self.kind == "free":
            return "free"
        if self.kind == "harmonic":
            return f"harmonic:{self.omega!r}"
        return "tabulated:" + ",".join(repr(v) for v in self.values)

    @classmethod
    def parse(cls, text: str) -> "PotentialSpec":
        kind, _, rest = text.strip().partition(":")
        if kind == "free":
            return cls.free()
        if kind == "harmonic":
            return cls.harmonic(float(rest) if rest else 1.0)
        if kind == "tabulated":
            return cls.tabulated([float(v) for v in rest.split(",")])
        raise ValueError(f"unknown potential {text!r}")


def _sum_over_particles(single: np.ndarray, grid: GridSpec) -> np.ndarray:
    total = np.zeros(grid.shape)
    for axis in range(grid.num_particles):
        shape = [1] * grid.num_particles
        shape[axis] = grid.num_points
        total = total + single.reshape(shape)
    return total


@dataclass(frozen=True)
class ModelParams:
    """Collapse and Hamiltonian parameters in natural units.

    ``rate`` is the jump rate per particle per unit time (the GRW lambda).
    ``max_substep`` bounds the split-step size used by the propagator.
    """

    a: float = 1.0
    rate: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    max_substep: float = 1e-3

    def __post_init__(self):
        for name in ("a", "mass", "hbar", "max_substep"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite")
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ValueError("rate must be non-negative and finite")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: GridSpec
    amplitudes: np.ndarray
    time: float = 0.0
    direction: Direction = Direction.FORWARD

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.size != self.grid.size:
            raise IncompatibleGridError(
                f"{amps.size} amplitudes for a grid of {self.grid.size} points"
            )
        amps = amps.reshape(self.grid.shape)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "direction", Direction(self.direction))

    def flat(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def evolved_to(self, amplitudes, time) -> "WaveFunction":
        return WaveFunction(self.grid, amplitudes, time, self.direction)

    def with_direction(self, direction) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes, self.time, direction)


def _checked(psi: WaveFunction) -> np.ndarray:
    amps = psi.amplitudes
    if not np.all(np.isfinite(amps)):
        raise InvalidStateError("amplitudes contain non-finite values")
    return amps


def norm(psi: WaveFunction) -> float:
    amps = _checked(psi)
    return math.sqrt(float(np.sum(amps.real ** 2 + amps.imag ** 2)) * psi.grid.cell_volume)


def normalize(psi: WaveFunction) -> WaveFunction:
    n = norm(psi)
    if n == 0.0:
        raise DegenerateStateError("cannot normalize a zero state")
    out = psi.amplitudes / n
    # a second pass removes the last ulp-level drift
    out = out / math.sqrt(float(np.sum(np.abs(out) ** 2)) * psi.grid.cell_volume)
    return psi.evolved_to(out, psi.time)


def inner_product(psi: WaveFunction, phi: WaveFunction) -> complex:
    """<psi|phi> on the grid, antilinear in the first argument."""
    if psi.grid != phi.grid:
        raise IncompatibleGridError("states live on different grids")
    return complex(np.vdot(_checked(psi), _checked(phi)) * psi.grid.cell_volume)


def fidelity(psi: WaveFunction, phi: WaveFunction) -> float:
    """Squared normalized overlap, in [0, 1]."""
    ov = inner_product(psi, phi)
    return float(abs(ov) ** 2 / (norm(psi) ** 2 * norm(phi) ** 2))


def position_density(psi: WaveFunction, i: int = 1) -> np.ndarray:
    """Marginal probability density of particle ``i`` over its grid axis.

    Normalized so that ``density.sum() * dx == 1``.
    """
    axis = psi.grid.check_particle(i)
    prob = np.abs(_checked(psi)) ** 2
    others = tuple(ax for ax in range(psi.grid.num_particles) if ax != axis)
    marginal = prob.sum(axis=others) if others else prob
    total = marginal.sum() * psi.grid.dx
    if total == 0.0:
        raise DegenerateStateError("zero state has no position density")
    return marginal / total


def mean_position(psi: WaveFunction, i: int = 1) -> float:
    rho = position_density(psi, i)
    return float(np.sum(rho * psi.grid.x) * psi.grid.dx)


def position_variance(psi: WaveFunction, i: int = 1) -> float:
    rho = position_density(psi, i)
    x = psi.grid.x
    mu = np.sum(rho * x) * psi.grid.dx
    return float(np.sum(rho * (x - mu) ** 2) * psi.grid.dx)


def kinetic_energy(psi: WaveFunction, params: ModelParams) -> float:
    amps = _checked(psi)
    grid = psi.grid
    spectrum = np.fft.fftn(amps)
    k = grid.wavenumbers()
    k2 = _sum_over_particles(k ** 2, grid)
    weight = np.abs(spectrum) ** 2
    total = weight.sum()
    if total == 0.0:
        raise DegenerateStateError("zero state has no energy")
    return float(params.hbar ** 2 / (2 * params.mass) * np.sum(k2 * weight) / total)


def potential_energy(psi: WaveFunction, params: ModelParams) -> float:
    prob = np.abs(_checked(psi)) ** 2
    total = prob.sum()
    if total == 0.0:
        raise DegenerateStateError("zero state has no energy")
    v = params.potential.on_grid(psi.grid, params.mass)
    return float(np.sum(v * prob) / total)


def expected_energy(psi: WaveFunction, params: ModelParams) -> float:
    """<H> with the kinetic term evaluated in Fourier space."""
    return kinetic_energy(psi, params) + potential_energy(psi, params)


def gaussian_packet(
    grid: GridSpec,
    center: float = 0.0,
    sigma: float = 1.0,
    momentum: float = 0.0,
    time: float = 0.0,
    direction=Direction.FORWARD,
) -> WaveFunction:
    """Normalized single-particle Gaussian with position variance ``sigma**2``.

    For multi-particle grids the same packet is used for every particle
    (a product state); pass sequences for per-particle centres and widths.
    """
    n = grid.num_particles
    centers = np.broadcast_to(np.asarray(center, dtype=float), (n,))
    sigmas = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    momenta = np.broadcast_to(np.asarray(momentum, dtype=float), (n,))
    factors = [
        np.exp(-((grid.x - c) ** 2) / (4 * s ** 2) + 1j * p * grid.x)
        for c, s, p in zip(centers, sigmas, momenta)
    ]
    return normalize(WaveFunction(grid, product_amplitudes(factors), time, direction))


def product_amplitudes(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Outer product of single-particle amplitude arrays."""
    out = np.asarray(factors[0], dtype=complex)
    for f in factors[1:]:
        out = np.multiply.outer(out, np.asarray(f, dtype=complex))
    return out


def boundary_leak(psi: WaveFunction, width: int = 5) -> float:
    """Largest marginal density found within ``width`` points of the wrap seam."""
    worst = 0.0
    for i in range(1, psi.grid.num_particles + 1):
        rho = position_density(psi, i)
        edge = np.concatenate([rho[:width], rho[-width:]])
        worst = max(worst, float(edge.max()))
    return worst
