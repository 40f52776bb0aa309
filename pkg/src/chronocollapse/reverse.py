"""Replaying a fixed collapse record, backward (and forward) in time.

A backward-in-time state meets the record's events in decreasing time order.
At each event it arrives on the ``t+`` side, the Born-rule density for the
centre is evaluated there, and the jump produces the ``t-`` side state.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import DepletedSupportWarning, IncompatibleGridError
from .grw import (
    CollapseDensity,
    CollapseEvent,
    CollapseRecord,
    apply_jump,
    collapse_density,
)
from .propagator import evolve_to
from .state import Direction, ModelParams, WaveFunction, normalize, position_density

DEPLETED_MASS = 1e-12
SUPPORT_WINDOW = 3.0  # in units of a


def backward_collapse_density(psi_bar: WaveFunction, i: int, a: float) -> CollapseDensity:
    """Born-rule density of a collapse centre for a backward-in-time state.

    The formula is the forward one applied to the backward state.
    """
    if psi_bar.direction is not Direction.BACKWARD:
        raise ValueError("expected a backward-tagged state")
    return collapse_density(psi_bar, i, a)


def pit_value(density: CollapseDensity, z: float) -> float:
    """Probability integral transform of ``z``; clamps to 0 or 1 off the grid."""
    return float(density.cdf(z))


@dataclass(frozen=True)
class EventLogEntry:
    event: CollapseEvent
    u: float
    depleted: bool = False


@dataclass(frozen=True, eq=False)
class ReplayResult:
    final_state: WaveFunction
    pit_values: np.ndarray
    per_event_log: Tuple[EventLogEntry, ...]

    @property
    def depleted_count(self) -> int:
        return sum(entry.depleted for entry in self.per_event_log)


def _local_mass(psi: WaveFunction, event: CollapseEvent, a: float) -> float:
    rho = position_density(psi, event.particle)
    window = np.abs(psi.grid.x - event.center) <= SUPPORT_WINDOW * a
    return float(rho[window].sum() * psi.grid.dx)


def _check_compatible(psi: WaveFunction, record: CollapseRecord):
    if psi.grid != record.grid:
        raise IncompatibleGridError("state grid does not match the record grid")


def _replay(psi, record, params, events, t_final, on_event):
    a = params.a
    pits, log = [], []
    for event in events:
        psi = evolve_to(psi, event.time, params)
        density = collapse_density(psi, event.particle, a)
        u = pit_value(density, event.center)
        depleted = _local_mass(psi, event, a) < DEPLETED_MASS
        if depleted:
            warnings.warn(
                f"record centre z={event.center!r} at t={event.time!r} lies where "
                "the replayed state has almost no mass",
                DepletedSupportWarning,
                stacklevel=3,
            )
        after = apply_jump(psi, event, a)
        if on_event is not None:
            on_event(psi, after, event)
        pits.append(u)
        log.append(EventLogEntry(event, u, depleted))
        psi = after
    psi = evolve_to(psi, t_final, params)
    return ReplayResult(psi, np.array(pits), tuple(log))


def replay_backward(
    psi_bar_end: WaveFunction,
    record: CollapseRecord,
    params: Optional[ModelParams] = None,
    on_event=None,
) -> ReplayResult:
    """Evolve a backward-in-time state from ``record.t_end`` to ``record.t_start``
    through the record's jumps in reverse order, collecting PIT values.

    The state is taken to sit at ``record.t_end`` whatever its clock says.
    ``pit_values`` come out in replay order (latest event first).
    """
    params = params or record.params
    _check_compatible(psi_bar_end, record)
    if psi_bar_end.direction is not Direction.BACKWARD:
        raise ValueError("backward replay needs a backward-tagged state")
    psi = normalize(psi_bar_end)
    psi = psi.evolved_to(psi.amplitudes, record.t_end)
    return _replay(psi, record, params, reversed(record.events), record.t_start, on_event)


def replay_forward(
    psi_start: WaveFunction,
    record: CollapseRecord,
    params: Optional[ModelParams] = None,
    on_event=None,
) -> ReplayResult:
    """Drive a forward state with an existing record instead of sampling.

    Replaying a record on the state that generated it reproduces the original
    trajectory and its PIT values exactly.
    """
    params = params or record.params
    _check_compatible(psi_start, record)
    if psi_start.direction is not Direction.FORWARD:
        raise ValueError("forward replay needs a forward-tagged state")
    psi = normalize(psi_start)
    psi = psi.evolved_to(psi.amplitudes, record.t_start)
    return _replay(psi, record, params, record.events, record.t_end, on_event)
