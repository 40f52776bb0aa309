"""Experiment drivers shared by the command line and the test-suite.

Every driver is a pure function of a :class:`RunConfig` (seed included) and
returns an :class:`ExperimentReport`; writing files is left to the caller.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import discrete
from .errors import BoundaryLeakWarning, DepletedSupportWarning
from .grw import (
    CollapseEvent,
    CollapseRecord,
    apply_jump,
    collapse_density,
    generate_trajectory,
    sample_center,
    schedule_jumps,
)
from .persistence import RunConfig, split_stream
from .propagator import evolve_to
from .reverse import replay_backward
from .state import (
    Direction,
    WaveFunction,
    expected_energy,
    fidelity,
    gaussian_packet,
    normalize,
)
from .stats import KSResult, direction_test, ks_uniform

PASS, FAIL, INFO = "pass", "fail", "informational"

_TRAP = {"potential": "harmonic", "omega": 1.0, "num_points": 256, "x_min": -16.0, "dx": 0.125}

# per-subcommand defaults, applied under any config file and flags
EXPERIMENT_DEFAULTS = {
    "simulate": {**_TRAP, "rate": 1.0, "duration": 30.0, "trajectories": 200,
                 "min_events": 15, "max_substep": 0.01},
    "reverse-test": {**_TRAP, "rate": 1.0, "duration": 30.0, "trajectories": 200,
                     "min_events": 15, "washout": 5, "max_substep": 0.01},
    "direction-test": {**_TRAP, "rate": 1.0, "duration": 30.0, "trajectories": 200,
                       "min_events": 15, "washout": 5, "max_substep": 0.01},
    "born-rule": {**_TRAP, "rate": 20.0, "duration": 10.0, "trajectories": 10000,
                  "min_events": 0},
    "energy-drift": {"potential": "free", "rate": 10.0, "duration": 0.3, "trajectories": 3400,
                     "num_points": 512, "x_min": -20.0, "dx": 0.078125, "min_events": 0,
                     "init_center_min": -1.0, "init_center_max": 1.0,
                     "init_width_min": 0.7, "init_width_max": 1.5, "sample_interval": 0.05},
    "converge": {"potential": "harmonic", "omega": 1.0, "rate": 5.0, "duration": 14.0,
                 "num_points": 512, "x_min": -20.0, "dx": 0.078125, "sample_interval": 0.5,
                 "init_center_min": -1.0, "init_center_max": 1.0,
                 "init_width_min": 0.7, "init_width_max": 1.5,
                 "test_center_min": -1.0, "test_center_max": 1.0,
                 "test_width_min": 0.7, "test_width_max": 1.5},
    "beamsplitter": {"mc_runs": 100000},
    "oracle-check": {"mc_runs": 100000, "oracle_models": 8},
}


def default_config(experiment: str, **overrides) -> RunConfig:
    """Built-in configuration for ``experiment`` with ``overrides`` applied."""
    return RunConfig().merged({**EXPERIMENT_DEFAULTS.get(experiment, {}), **overrides})


@dataclass
class Table:
    name: str
    header: Tuple[str, ...]
    rows: List[tuple] = field(default_factory=list)


@dataclass
class ExperimentReport:
    name: str
    inputs: Dict[str, object]
    metrics: Dict[str, float] = field(default_factory=dict)
    verdict: str = INFO
    tables: List[Table] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    records: List[CollapseRecord] = field(default_factory=list)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def to_text(self) -> str:
        lines = [f"== {self.name} ==", "config:"]
        lines += [f"  {k} = {'' if v is None else v}" for k, v in self.inputs.items()]
        lines.append("metrics:")
        for k, v in self.metrics.items():
            lines.append(f"  {k} = {v:.10g}" if isinstance(v, float) else f"  {k} = {v}")
        lines += [f"note: {n}" for n in self.notes]
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)


def _gaussian(cfg, rng, prefix, direction=Direction.FORWARD, time=0.0):
    lo_c, hi_c = getattr(cfg, f"{prefix}_center_min"), getattr(cfg, f"{prefix}_center_max")
    lo_w, hi_w = getattr(cfg, f"{prefix}_width_min"), getattr(cfg, f"{prefix}_width_max")
    n = cfg.num_particles
    centers = rng.uniform(lo_c, hi_c, size=n)
    widths = rng.uniform(lo_w, hi_w, size=n)
    return gaussian_packet(cfg.grid(), centers, widths, time=time, direction=direction)


def initial_state(cfg: RunConfig, rng) -> WaveFunction:
    """Forward initial state: Gaussian packet with centre/width drawn from the init ranges."""
    return _gaussian(cfg, rng, "init")


def test_state(cfg: RunConfig, rng, forward_final: Optional[WaveFunction] = None,
               time: float = 0.0) -> WaveFunction:
    """Backward test state, per ``cfg.test_state``."""
    if cfg.test_state == "forward_final":
        if forward_final is None:
            raise ValueError("test_state=forward_final needs the forward final state")
        return forward_final.with_direction(Direction.BACKWARD)
    return _gaussian(cfg, rng, "test", Direction.BACKWARD, time)


def _echo(cfg: RunConfig) -> Dict[str, object]:
    return dict(cfg.items())


class _WarningCounter:
    """Count (and silence) leak / depleted-support warnings inside a block."""

    def __enter__(self):
        self._ctx = warnings.catch_warnings(record=True)
        self.caught = self._ctx.__enter__()
        warnings.simplefilter("always", BoundaryLeakWarning)
        warnings.simplefilter("always", DepletedSupportWarning)
        return self

    def __exit__(self, *exc):
        self._ctx.__exit__(*exc)
        passthrough = [w for w in self.caught
                       if not issubclass(w.category, (BoundaryLeakWarning, DepletedSupportWarning))]
        for w in passthrough:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
        return False

    def count(self, category) -> int:
        return sum(issubclass(w.category, category) for w in self.caught)


# ---------------------------------------------------------------------------
# forward ensemble + backward replay


@dataclass
class EnsembleMember:
    index: int
    record: CollapseRecord
    forward_pits: np.ndarray   # chronological
    backward_pits: Optional[np.ndarray]  # reverse chronological
    depleted: int = 0


def run_ensemble(cfg: RunConfig, replay: bool = True) -> Tuple[List[EnsembleMember], Dict[str, int]]:
    """Forward trajectories (and optionally their backward replays).

    Trajectory ``k`` uses stream ``split_stream(seed, k)``. Trajectories with
    fewer than ``min_events`` jumps are skipped; indices keep counting until
    ``trajectories`` members are collected.
    """
    seed = cfg.require_seed()
    params = cfg.params()
    members: List[EnsembleMember] = []
    skipped = 0
    index = 0
    with _WarningCounter() as counter:
        while len(members) < cfg.trajectories:
            if index >= 20 * cfg.trajectories + 100:
                raise RuntimeError("too many trajectories below min_events; raise rate or duration")
            rng = split_stream(seed, index)
            psi0 = initial_state(cfg, rng)
            traj = generate_trajectory(psi0, params, cfg.duration, rng,
                                       max_events=cfg.max_events or None)
            if len(traj.record) < cfg.min_events:
                skipped += 1
                index += 1
                continue
            backward = None
            depleted = 0
            if replay:
                test = test_state(cfg, rng, traj.state, traj.record.t_end)
                result = replay_backward(test, traj.record, params)
                backward = result.pit_values
                depleted = result.depleted_count
            members.append(EnsembleMember(index, traj.record, traj.pits, backward, depleted))
            index += 1
    counts = {
        "skipped_short": skipped,
        "boundary_leak_warnings": counter.count(BoundaryLeakWarning),
        "depleted_support_events": sum(m.depleted for m in members),
    }
    return members, counts


def pooled(pits: Sequence[np.ndarray], washout: int) -> np.ndarray:
    """Concatenate per-trajectory PIT sequences after dropping the first ``washout``."""
    parts = [np.asarray(p)[washout:] for p in pits]
    return np.concatenate(parts) if parts else np.array([])


def _ks_metrics(prefix: str, res: KSResult) -> Dict[str, float]:
    return {f"{prefix}_D": res.statistic, f"{prefix}_n": res.n, f"{prefix}_p": res.p_value}


def run_simulate(cfg: RunConfig) -> ExperimentReport:
    members, counts = run_ensemble(cfg, replay=False)
    report = ExperimentReport("simulate", _echo(cfg), verdict=INFO)
    rows = [(m.index, len(m.record), m.record.t_end) for m in members]
    report.tables.append(Table("trajectories", ("trajectory", "events", "t_end"), rows))
    report.records = [m.record for m in members]
    events = [len(m.record) for m in members]
    report.metrics.update({
        "trajectories": len(members),
        "total_events": int(sum(events)),
        "mean_events": float(np.mean(events)),
        **counts,
    })
    return report


def _pit_table(members: Sequence[EnsembleMember], washout: int) -> Table:
    rows = []
    for m in members:
        events = m.record.events
        n = len(events)
        for k, u in enumerate(m.forward_pits):
            ev = events[k]
            rows.append((m.index, "forward", k, ev.time, ev.particle, ev.center, float(u), k >= washout))
        if m.backward_pits is not None:
            for k, u in enumerate(m.backward_pits):
                ev = events[n - 1 - k]
                rows.append((m.index, "backward", k, ev.time, ev.particle, ev.center, float(u),
                             k >= washout))
    return Table("pits", ("trajectory", "direction", "order", "time", "particle", "center",
                          "u", "pooled"), rows)


def run_reverse_test(cfg: RunConfig, members=None, counts=None) -> ExperimentReport:
    """Replay forward records backward on Gaussian test states; KS-test the pooled PITs.

    The first ``washout`` backward events of each trajectory are left out of
    the pool: there the arbitrary test state, acting as a boundary condition,
    still dominates. The untrimmed pool is reported alongside.
    """
    if members is None:
        members, counts = run_ensemble(cfg, replay=True)
    backward = [m.backward_pits for m in members]
    res = ks_uniform(pooled(backward, cfg.washout))
    raw = ks_uniform(pooled(backward, 0))
    report = ExperimentReport("reverse-test", _echo(cfg))
    report.metrics.update(_ks_metrics("backward", res))
    report.metrics.update(_ks_metrics("backward_untrimmed", raw))
    first = [p[0] for p in backward if len(p)]
    if len(first) >= 8:
        report.metrics["first_backward_event_p"] = ks_uniform(first).p_value
    report.metrics["min_events"] = int(min(len(m.record) for m in members))
    report.metrics.update(counts or {})
    report.verdict = PASS if res.p_value > cfg.alpha else FAIL
    report.tables.append(Table("ks", ("pool", "D", "n", "p"), [
        ("backward", res.statistic, res.n, res.p_value),
        ("backward_untrimmed", raw.statistic, raw.n, raw.p_value),
    ]))
    report.tables.append(_pit_table(members, cfg.washout))
    report.records = [m.record for m in members]
    report.notes.append(
        f"pooled over {len(members)} trajectories after dropping the first {cfg.washout} "
        "backward events of each (test-state washout)"
    )
    return report


def run_direction_test(cfg: RunConfig, members=None, counts=None) -> ExperimentReport:
    """Forward vs backward PIT pools from the same ensemble, plus a broken-rule control."""
    if members is None:
        members, counts = run_ensemble(cfg, replay=True)
    fwd = pooled([m.forward_pits for m in members], cfg.washout)
    bwd = pooled([m.backward_pits for m in members], cfg.washout)
    rep = direction_test(fwd, bwd, cfg.alpha)
    control = direction_test(fwd, np.full(bwd.size, 0.99), cfg.alpha)
    report = ExperimentReport("direction-test", _echo(cfg))
    report.metrics.update(_ks_metrics("forward", rep.forward))
    report.metrics.update(_ks_metrics("backward", rep.backward))
    report.metrics.update(_ks_metrics("two_sample", rep.two_sample))
    report.metrics["control_two_sample_p"] = control.two_sample.p_value
    report.metrics.update(counts or {})
    ok = rep.indistinguishable and not control.indistinguishable and control.two_sample.p_value < 1e-6
    report.verdict = PASS if ok else FAIL
    rows = rep.rows() + [("control_two_sample", control.two_sample.statistic,
                          int(round(control.two_sample.effective_n)), control.two_sample.p_value)]
    report.tables.append(Table("ks", ("pool", "D", "n", "p"), rows))
    report.notes.append(rep.to_text().replace("\n", "\n  "))
    report.notes.append(f"control (backward pool forced to 0.99): {control.verdict}")
    return report


# ---------------------------------------------------------------------------
# forward Born rule from a stationary state


def run_born_rule(cfg: RunConfig) -> ExperimentReport:
    """Single-jump trajectories from the harmonic ground state; KS of the centres
    against the collapse density of that stationary state."""
    seed = cfg.require_seed()
    params = cfg.params()
    omega = params.potential.omega
    sigma = math.sqrt(params.hbar / (2 * params.mass * omega))
    ground = gaussian_packet(cfg.grid(), 0.0, sigma)
    reference = collapse_density(ground, 1, params.a)
    centers = []
    for k in range(cfg.trajectories):
        rng = split_stream(seed, k)
        traj = generate_trajectory(ground, params, cfg.duration, rng, max_events=1)
        if len(traj.record):
            centers.append(traj.record.events[0].center)
    centers = np.array(centers)
    res = ks_uniform(reference.cdf(centers))
    report = ExperimentReport("born-rule", _echo(cfg))
    report.metrics.update(_ks_metrics("born", res))
    report.metrics["sample_mean"] = float(centers.mean())
    report.metrics["sample_variance"] = float(centers.var(ddof=1))
    report.metrics["density_variance"] = reference.variance()
    report.verdict = PASS if res.p_value > cfg.alpha else FAIL
    report.tables.append(Table("centers", ("trajectory", "center", "u"),
                               [(k, float(z), float(reference.cdf(z))) for k, z in enumerate(centers)]))
    return report


# ---------------------------------------------------------------------------
# energy drift


def _ols(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    xm = x - x.mean()
    return float(np.dot(xm, y - y.mean()) / np.dot(xm, xm))


def run_energy_drift(cfg: RunConfig) -> ExperimentReport:
    """Ensemble-mean energy against time, and the energy change across each jump.

    The slope is fitted per trajectory; its standard error is the spread of
    those independent fits.
    """
    seed = cfg.require_seed()
    params = cfg.params()
    times = np.arange(0.0, cfg.duration + 1e-12, cfg.sample_interval)
    energies = np.zeros((cfg.trajectories, times.size))
    gains: List[float] = []
    slopes = []
    with _WarningCounter() as counter:
        for k in range(cfg.trajectories):
            rng = split_stream(seed, k)
            psi = initial_state(cfg, rng)
            schedule = schedule_jumps(params, cfg.duration, cfg.num_particles, rng)
            timeline = sorted([(t, 0, j) for j, t in enumerate(times)] +
                              [(t, 1, j) for j, (t, _) in enumerate(schedule)])
            for t, kind, j in timeline:
                psi = evolve_to(psi, t, params)
                if kind == 0:
                    energies[k, j] = expected_energy(psi, params)
                    continue
                particle = schedule[j][1]
                before = expected_energy(psi, params)
                z = sample_center(collapse_density(psi, particle, params.a), rng)
                psi = apply_jump(psi, CollapseEvent(t, particle, z), params.a)
                gains.append(expected_energy(psi, params) - before)
            slopes.append(_ols(times, energies[k]))
    slopes = np.array(slopes)
    gains = np.array(gains)
    slope = float(slopes.mean())
    slope_se = float(slopes.std(ddof=1) / math.sqrt(slopes.size)) if slopes.size > 1 else 0.0
    expected_gain = params.hbar ** 2 / (4 * params.mass * params.a ** 2)
    report = ExperimentReport("energy-drift", _echo(cfg))
    m = report.metrics
    m["jumps"] = int(gains.size)
    m["expected_gain_per_jump"] = expected_gain
    if gains.size:
        m["mean_gain_per_jump"] = float(gains.mean())
        m["gain_standard_error"] = float(gains.std(ddof=1) / math.sqrt(gains.size)) if gains.size > 1 else 0.0
        m["relative_gain_error"] = abs(float(gains.mean()) - expected_gain) / expected_gain
    m["slope"] = slope
    m["slope_standard_error"] = slope_se
    m["slope_significance"] = slope / slope_se if slope_se > 0 else (math.inf if slope > 0 else 0.0)
    m["expected_slope"] = expected_gain * params.rate * cfg.num_particles
    m["boundary_leak_warnings"] = counter.count(BoundaryLeakWarning)
    if params.rate == 0:
        report.verdict = PASS if abs(slope) < 1e-6 else FAIL
    else:
        ok = gains.size > 0 and m["relative_gain_error"] < 0.05 and m["slope_significance"] >= 5
        report.verdict = PASS if ok else FAIL
    mean_e = energies.mean(axis=0)
    report.tables.append(Table("series", ("time", "mean_energy", "trajectories"),
                               [(float(t), float(e), cfg.trajectories) for t, e in zip(times, mean_e)]))
    return report


# ---------------------------------------------------------------------------
# record-driven convergence


def _lockstep(states, record, params, sample_times, direction):
    """Drive several states through one record together; yields fidelity rows."""
    events = list(record.events)
    if direction is Direction.BACKWARD:
        events.reverse()
        marks = sorted(sample_times, reverse=True)
        key = lambda item: -item[0]
    else:
        marks = sorted(sample_times)
        key = lambda item: item[0]
    timeline = sorted([(t, 0, None) for t in marks] + [(ev.time, 1, ev) for ev in events],
                      key=lambda item: (key(item), item[1]))
    rows = [(states[0].time, 0, fidelity(states[0], states[1]))]
    n_events = 0
    for t, kind, ev in timeline:
        states = [evolve_to(s, t, params) for s in states]
        if kind == 1:
            states = [apply_jump(s, ev, params.a) for s in states]
            n_events += 1
        rows.append((t, n_events, fidelity(states[0], states[1])))
    return states, rows


def run_convergence(cfg: RunConfig) -> ExperimentReport:
    """Record from state A, replayed on a different state B; fidelity over time."""
    seed = cfg.require_seed()
    params = cfg.params()
    rng = split_stream(seed, 0)
    psi_a = initial_state(cfg, rng)
    psi_b = _gaussian(cfg, rng, "test")
    traj = generate_trajectory(psi_a, params, cfg.duration, rng)
    record = traj.record
    direction = Direction(cfg.direction)
    span = record.t_end - record.t_start
    marks = list(record.t_start + cfg.sample_interval * np.arange(1, int(span / cfg.sample_interval) + 1))
    marks = [t for t in marks if t < record.t_end]
    with _WarningCounter() as counter:
        if direction is Direction.FORWARD:
            start = [normalize(psi_a), psi_b]
            marks = marks + [record.t_end]
        else:
            start = [traj.state.with_direction(Direction.BACKWARD),
                     psi_b.evolved_to(psi_b.amplitudes, record.t_end).with_direction(Direction.BACKWARD)]
            marks = marks + [record.t_start]
        initial_fid = fidelity(start[0], start[1])
        _, rows = _lockstep(start, record, params, marks, direction)
    report = ExperimentReport("converge", _echo(cfg))
    fids = np.array([r[2] for r in rows])
    report.metrics.update({
        "events": len(record),
        "initial_fidelity": initial_fid,
        "final_fidelity": float(fids[-1]),
        "min_fidelity": float(fids.min()),
        "max_fidelity_change": float(np.max(np.abs(fids - fids[0]))),
        "boundary_leak_warnings": counter.count(BoundaryLeakWarning),
    })
    if params.rate == 0:
        ok = report.metrics["max_fidelity_change"] < 1e-9
    else:
        ok = len(record) >= 50 and fids[-1] >= 0.99
    report.verdict = PASS if ok else FAIL
    report.tables.append(Table("series", ("time", "events", "fidelity"), rows))
    report.records = [record]
    return report


def convergence_controls(cfg: RunConfig) -> Dict[str, float]:
    """Identical-state and no-collapse controls for the convergence run."""
    seed = cfg.require_seed()
    params = cfg.params()
    rng = split_stream(seed, 0)
    psi_a = initial_state(cfg, rng)
    traj = generate_trajectory(psi_a, params, cfg.duration, rng)
    marks = list(np.arange(cfg.sample_interval, traj.record.t_end, cfg.sample_interval)) + [traj.record.t_end]
    _, same = _lockstep([normalize(psi_a), normalize(psi_a)], traj.record, params, marks, Direction.FORWARD)
    quiet = cfg.merged({"rate": 0.0})
    rep = run_convergence(quiet)
    fids = np.array([r[2] for r in rep.table("series").rows])
    return {
        "identical_max_deviation": float(max(abs(r[2] - 1.0) for r in same)),
        "no_collapse_max_change": float(np.max(np.abs(fids - fids[0]))),
    }


# ---------------------------------------------------------------------------
# discrete oracle


def run_beamsplitter(cfg: RunConfig) -> ExperimentReport:
    runs = cfg.mc_runs
    rng = split_stream(cfg.seed if cfg.seed is not None else 0, 0)
    bs = discrete.beam_splitter_scenario(runs=runs, rng=rng)
    report = ExperimentReport("beamsplitter", _echo(cfg))
    exact = {"forward": bs.forward, "backward": bs.backward,
             "conditioned_backward": bs.conditioned_backward}
    targets = {"forward": {"D": 0.5, "C": 0.5}, "backward": {"S": 0.5, "F": 0.5},
               "conditioned_backward": {"S": 1.0, "F": 0.0}}
    worst_exact, worst_z = 0.0, 0.0
    rows = []
    for case, dist in exact.items():
        n = bs.accepted[case]
        for label, p in dist.items():
            worst_exact = max(worst_exact, abs(p - targets[case][label]))
            freq = bs.monte_carlo[case][label]
            se = math.sqrt(p * (1 - p) / n) if n else math.inf
            dev = abs(freq - p)
            z = dev / se if se > 0 else (0.0 if dev == 0 else math.inf)
            worst_z = max(worst_z, z)
            rows.append((case, label, p, freq, n, z))
    report.metrics.update({"max_exact_error": worst_exact, "max_mc_sigma": worst_z})
    report.verdict = PASS if worst_exact < 1e-10 and worst_z <= 3.0 else FAIL
    report.tables.append(Table("distributions", ("case", "label", "probability", "mc_frequency",
                                                 "mc_accepted", "mc_sigma"), rows))
    report.notes.append(bs.to_text().replace("\n", "\n  "))
    return report


def oracle_cases(cfg: RunConfig):
    """Seeded random models with random states and boundary conditions."""
    seed = cfg.require_seed()
    cases = []
    for k in range(cfg.oracle_models):
        rng = split_stream(seed, k)
        dim = int(rng.integers(2, cfg.oracle_max_dim + 1))
        steps = int(rng.integers(2, cfg.oracle_max_steps + 1))
        model = discrete.random_model(dim, steps, rng, outcomes=int(rng.integers(2, 4)))
        psi = discrete.random_state(dim, rng)
        kind = "initial" if k % 2 == 0 else "final"
        rank = int(rng.integers(1, dim))
        vectors = [discrete.random_state(dim, rng) for _ in range(rank)]
        condition = discrete.BoundaryCondition.onto(kind, *vectors)
        step = int(rng.integers(0, steps))
        cases.append((k, model, psi, step, condition, rng))
    return cases


def run_oracle_check(cfg: RunConfig) -> ExperimentReport:
    """Enumerated conditioned distributions against rejection sampling."""
    rows = []
    worst = 0.0
    if cfg.model_file:
        from .persistence import load_model
        model = load_model(cfg.model_file)
        rng = split_stream(cfg.require_seed(), 0)
        psi = discrete.random_state(model.dim, rng)
        consistency = discrete.replay_consistency_check(model, psi)
        report = ExperimentReport("oracle-check", _echo(cfg))
        report.metrics.update({"histories": consistency.histories,
                               "violations": len(consistency.violations),
                               "min_backward_weight": consistency.min_weight})
        report.verdict = PASS if consistency.ok else FAIL
        return report
    violations = 0
    for k, model, psi, step, condition, rng in oracle_cases(cfg):
        exact = discrete.conditioned_distribution(model, psi, step, condition)
        est = discrete.rejection_sample(model, psi, step, condition, cfg.mc_runs, rng)
        for outcome, p in exact.items():
            se = est.standard_error(outcome, p)
            dev = abs(est.frequencies[outcome] - p)
            z = dev / se if se > 0 else (0.0 if dev < 1e-12 else math.inf)
            worst = max(worst, z)
            rows.append((k, model.dim, len(model.steps), step, condition.kind, outcome, p,
                         est.frequencies[outcome], est.accepted, z))
        violations += len(discrete.replay_consistency_check(model, psi).violations)
    report = ExperimentReport("oracle-check", _echo(cfg))
    report.metrics.update({"comparisons": len(rows), "max_sigma": worst,
                           "consistency_violations": violations})
    report.verdict = PASS if worst <= 3.0 and violations == 0 else FAIL
    report.tables.append(Table("comparison", ("model", "dim", "steps", "step", "condition",
                                              "outcome", "exact", "mc_frequency", "accepted",
                                              "sigma"), rows))
    return report
