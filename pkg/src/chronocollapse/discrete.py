"""Exact finite-dimensional collapse models.

A model is a list of steps; each step applies a unitary and then, optionally,
a collapse drawn from a POVM. Collapses act through the positive square roots
of the effects (the discrete counterpart of the Gaussian jump), so the Born
weight of outcome ``k`` on a normalized state is ``<psi|E_k|psi>``.

Forward enumeration starts before step 0. Backward enumeration starts after
the last step and meets each step's collapse before its (adjoint) unitary.
Outcome tuples are always indexed by step, with ``None`` for steps that do
not collapse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConditioningError, DegenerateStateError
from .state import Direction

UNITARY_TOL = 1e-10
PRUNE_WEIGHT = 1e-14
MAX_TREE = 10 ** 6


def _psd_sqrt(effect: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(effect)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


@dataclass(frozen=True, eq=False)
class Step:
    unitary: np.ndarray
    povm: Optional[Tuple[np.ndarray, ...]] = None

    @property
    def collapses(self) -> bool:
        return self.povm is not None


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    steps: Tuple[Step, ...]
    labels: Tuple[str, ...]
    povm_labels: Optional[Tuple[str, ...]] = None
    jumps: Tuple[Optional[Tuple[np.ndarray, ...]], ...] = field(init=False, repr=False)

    def __post_init__(self):
        d = len(self.labels)
        if not 1 <= d <= 16:
            raise ValueError("model dimension must be between 1 and 16")
        steps = []
        for k, step in enumerate(self.steps):
            u = np.asarray(step.unitary, dtype=complex)
            if u.shape != (d, d):
                raise ValueError(f"step {k}: unitary has shape {u.shape}, expected {(d, d)}")
            if np.max(np.abs(u.conj().T @ u - np.eye(d))) > UNITARY_TOL:
                raise ValueError(f"step {k}: matrix is not unitary")
            povm = None
            if step.povm is not None:
                povm = tuple(np.asarray(e, dtype=complex) for e in step.povm)
                check_povm(povm, d, where=f"step {k}")
            steps.append(Step(u, povm))
        object.__setattr__(self, "steps", tuple(steps))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(
            self,
            "jumps",
            tuple(None if s.povm is None else tuple(_psd_sqrt(e) for e in s.povm) for s in steps),
        )

    @property
    def dim(self) -> int:
        return len(self.labels)

    def basis_state(self, label: str) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.labels.index(label)] = 1.0
        return v

    def outcome_label(self, step: int, k: int) -> str:
        names = self.povm_labels
        if names is not None and len(names) == len(self.steps[step].povm):
            return names[k]
        return str(k)

    def tree_size(self) -> int:
        size = 1
        for step in self.steps:
            if step.collapses:
                size *= len(step.povm)
        return size


def check_povm(effects: Sequence[np.ndarray], dim: int, where: str = "povm"):
    total = np.zeros((dim, dim), dtype=complex)
    for j, e in enumerate(effects):
        if e.shape != (dim, dim):
            raise ValueError(f"{where}: effect {j} has shape {e.shape}")
        if np.max(np.abs(e - e.conj().T)) > UNITARY_TOL:
            raise ValueError(f"{where}: effect {j} is not Hermitian")
        if np.min(np.linalg.eigvalsh(e)) < -UNITARY_TOL:
            raise ValueError(f"{where}: effect {j} is not positive")
        total = total + e
    if np.max(np.abs(total - np.eye(dim))) > UNITARY_TOL:
        raise ValueError(f"{where}: effects do not sum to the identity")


def basis_povm(dim: int) -> Tuple[np.ndarray, ...]:
    out = []
    for k in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[k, k] = 1.0
        out.append(e)
    return tuple(out)


@dataclass(frozen=True)
class BoundaryCondition:
    """Subspace membership at the initial or final time.

    ``initial`` conditions constrain backward-in-time dynamics; ``final``
    conditions constrain forward-in-time dynamics.
    """

    kind: str
    projector: np.ndarray

    def __post_init__(self):
        if self.kind not in ("initial", "final"):
            raise ValueError("boundary condition kind must be 'initial' or 'final'")
        p = np.asarray(self.projector, dtype=complex)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("projector must be square")
        if np.max(np.abs(p - p.conj().T)) > UNITARY_TOL or np.max(np.abs(p @ p - p)) > UNITARY_TOL:
            raise ValueError("projector must be Hermitian and idempotent")
        object.__setattr__(self, "projector", p)

    @classmethod
    def onto(cls, kind: str, *vectors) -> "BoundaryCondition":
        """Projector onto the span of ``vectors``."""
        mat = np.column_stack([np.asarray(v, dtype=complex) for v in vectors])
        q, _ = np.linalg.qr(mat)
        return cls(kind, q @ q.conj().T)

    @property
    def direction(self) -> Direction:
        return Direction.BACKWARD if self.kind == "initial" else Direction.FORWARD

    def weight(self, state: np.ndarray) -> float:
        """Squared projection weight of a normalized state."""
        return float(np.real(np.vdot(state, self.projector @ state)))


@dataclass(frozen=True, eq=False)
class History:
    outcomes: Tuple[Optional[int], ...]
    probability: float
    terminal_state: np.ndarray
    weights: Tuple[float, ...] = ()  # stepwise Born weights, in replay order


def _check_input(model: DiscreteModel, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (model.dim,):
        raise ValueError(f"state must have shape ({model.dim},)")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError("input state must be normalized")
    return psi


def _schedule(model: DiscreteModel, direction: Direction):
    """(step index, operation) pairs in the order a state meets them."""
    ops = []
    for k, step in enumerate(model.steps):
        ops.append((k, "unitary"))
        if step.collapses:
            ops.append((k, "collapse"))
    if direction is Direction.BACKWARD:
        ops.reverse()
    return ops


def _apply_unitary(model, k, psi, direction):
    u = model.steps[k].unitary
    return u @ psi if direction is Direction.FORWARD else u.conj().T @ psi


def _branch(model, k, psi):
    """(outcome, Born weight, post-collapse state) for every outcome of step k."""
    for j, (effect, jump) in enumerate(zip(model.steps[k].povm, model.jumps[k])):
        w = float(np.real(np.vdot(psi, effect @ psi)))
        if w > PRUNE_WEIGHT:
            yield j, w, (jump @ psi) / math.sqrt(w)


def enumerate_histories(model: DiscreteModel, psi0, direction="forward") -> List[History]:
    """All collapse histories with non-zero probability, depth first.

    Each probability is the product of the stepwise Born weights.
    """
    direction = Direction(direction)
    psi0 = _check_input(model, psi0)
    if model.tree_size() > MAX_TREE:
        raise ValueError(f"outcome tree of {model.tree_size()} leaves exceeds {MAX_TREE}")
    ops = _schedule(model, direction)
    n_steps = len(model.steps)
    out: List[History] = []

    def walk(pos, psi, prob, outcomes, weights):
        if pos == len(ops):
            out.append(History(tuple(outcomes), prob, psi, tuple(weights)))
            return
        k, kind = ops[pos]
        if kind == "unitary":
            walk(pos + 1, _apply_unitary(model, k, psi, direction), prob, outcomes, weights)
            return
        for j, w, nxt in _branch(model, k, psi):
            outcomes[k] = j
            walk(pos + 1, nxt, prob * w, outcomes, weights + [w])
        outcomes[k] = None

    walk(0, psi0, 1.0, [None] * n_steps, [])
    return out


def _distribution_at(histories, step, weights=None) -> Dict[int, float]:
    acc: Dict[int, float] = {}
    total = 0.0
    for n, h in enumerate(histories):
        p = h.probability * (1.0 if weights is None else weights[n])
        outcome = h.outcomes[step]
        acc[outcome] = acc.get(outcome, 0.0) + p
        total += p
    return {k: v / total for k, v in acc.items()}, total


def _full(model, step, dist):
    n = len(model.steps[step].povm)
    return {k: dist.get(k, 0.0) for k in range(n)}


def outcome_distribution(model: DiscreteModel, psi, step: int, direction="forward") -> Dict[int, float]:
    """Unconditioned Born distribution of the outcome at ``step``."""
    if not model.steps[step].collapses:
        raise ValueError(f"step {step} has no collapse")
    dist, _ = _distribution_at(enumerate_histories(model, psi, direction), step)
    return _full(model, step, dist)


def condition_probability(model: DiscreteModel, psi, condition: BoundaryCondition) -> float:
    hist = enumerate_histories(model, psi, condition.direction)
    return float(sum(h.probability * condition.weight(h.terminal_state) for h in hist))


def conditioned_distribution(
    model: DiscreteModel, psi, step: int, condition: BoundaryCondition
) -> Dict[int, float]:
    """Outcome distribution at ``step`` reweighted by a boundary condition.

    P(k | C) = P(k and C) / P(C), where a history satisfies C with its
    terminal state's squared projection weight. An initial condition runs the
    backward dynamics from ``psi`` (the state after the last step); a final
    condition runs the forward dynamics from ``psi`` (the state before step 0).
    """
    if not model.steps[step].collapses:
        raise ValueError(f"step {step} has no collapse")
    hist = enumerate_histories(model, psi, condition.direction)
    weights = [condition.weight(h.terminal_state) for h in hist]
    if sum(h.probability * w for h, w in zip(hist, weights)) <= PRUNE_WEIGHT:
        raise ConditioningError("boundary condition has zero probability")
    dist, _ = _distribution_at(hist, step, weights)
    return _full(model, step, dist)


def sample_history(model: DiscreteModel, psi0, direction, rng: np.random.Generator) -> History:
    """One history drawn by sequential Born-rule sampling."""
    direction = Direction(direction)
    psi = _check_input(model, psi0)
    outcomes: List[Optional[int]] = [None] * len(model.steps)
    prob = 1.0
    weights = []
    for k, kind in _schedule(model, direction):
        if kind == "unitary":
            psi = _apply_unitary(model, k, psi, direction)
            continue
        branches = list(_branch(model, k, psi))
        ws = np.array([w for _, w, _ in branches])
        pick = min(int(np.searchsorted(np.cumsum(ws) / ws.sum(), rng.random(), side="right")),
                   len(branches) - 1)
        j, w, psi = branches[pick]
        outcomes[k] = j
        prob *= w
        weights.append(w)
    return History(tuple(outcomes), prob, psi, tuple(weights))


def sample_histories(model: DiscreteModel, psi0, direction, runs: int,
                     rng: np.random.Generator):
    """Draw ``runs`` histories at once by sequential Born-rule sampling.

    Returns ``(outcomes, terminal_states)`` with outcomes shaped
    ``(runs, n_steps)`` (``-1`` where a step does not collapse).
    """
    direction = Direction(direction)
    psi = np.tile(_check_input(model, psi0), (runs, 1))
    outcomes = np.full((runs, len(model.steps)), -1, dtype=int)
    for k, kind in _schedule(model, direction):
        if kind == "unitary":
            u = model.steps[k].unitary
            op = u if direction is Direction.FORWARD else u.conj().T
            psi = psi @ op.T
            continue
        effects = model.steps[k].povm
        w = np.stack([np.real(np.einsum("ri,ij,rj->r", psi.conj(), e, psi)) for e in effects], axis=1)
        w = np.clip(w, 0.0, None)
        cum = np.cumsum(w, axis=1)
        cum /= cum[:, -1:]
        pick = (rng.random((runs, 1)) >= cum).sum(axis=1)
        pick = np.minimum(pick, len(effects) - 1)
        outcomes[:, k] = pick
        new = np.empty_like(psi)
        for j, jump in enumerate(model.jumps[k]):
            rows = pick == j
            if np.any(rows):
                new[rows] = psi[rows] @ jump.T
        psi = new / np.linalg.norm(new, axis=1, keepdims=True)
    return outcomes, psi


@dataclass
class RejectionEstimate:
    frequencies: Dict[int, float]
    counts: Dict[int, int]
    accepted: int
    runs: int

    def standard_error(self, k: int, p: Optional[float] = None) -> float:
        p = self.frequencies.get(k, 0.0) if p is None else p
        return math.sqrt(max(p * (1 - p), 0.0) / self.accepted) if self.accepted else math.inf


def rejection_sample(
    model: DiscreteModel,
    psi,
    step: int,
    condition: Optional[BoundaryCondition],
    runs: int,
    rng: np.random.Generator,
    direction="forward",
) -> RejectionEstimate:
    """Monte Carlo estimate of the (conditioned) outcome distribution.

    Histories are sampled by the unconditioned Born rule and kept with
    probability equal to their terminal projection weight.
    """
    if condition is not None:
        direction = condition.direction
    outcomes, terminal = sample_histories(model, psi, direction, runs, rng)
    keep_draw = rng.random(runs)
    if condition is None:
        kept = np.ones(runs, dtype=bool)
    else:
        weights = np.real(np.einsum("ri,ij,rj->r", terminal.conj(), condition.projector, terminal))
        kept = keep_draw < weights
    accepted = int(kept.sum())
    n_out = len(model.steps[step].povm)
    tally = np.bincount(outcomes[kept, step], minlength=n_out)
    counts = {k: int(tally[k]) for k in range(n_out)}
    freqs = {k: (c / accepted if accepted else 0.0) for k, c in counts.items()}
    return RejectionEstimate(freqs, counts, accepted, runs)


@dataclass
class ConsistencyReport:
    histories: int
    min_weight: float
    violations: List[Tuple[Tuple[Optional[int], ...], int, float]]

    @property
    def ok(self) -> bool:
        return not self.violations


def replay_consistency_check(model: DiscreteModel, psi0, tol: float = 1e-12) -> ConsistencyReport:
    """Replay every forward history's outcomes backward from its terminal state.

    A violation is a backward stepwise weight at or below ``tol``: the shared
    record would then be impossible for the backward-in-time state.
    """
    violations = []
    min_w = math.inf
    hist = enumerate_histories(model, psi0, Direction.FORWARD)
    for h in hist:
        psi = h.terminal_state
        for k, kind in _schedule(model, Direction.BACKWARD):
            if kind == "unitary":
                psi = _apply_unitary(model, k, psi, Direction.BACKWARD)
                continue
            j = h.outcomes[k]
            w = float(np.real(np.vdot(psi, model.steps[k].povm[j] @ psi)))
            min_w = min(min_w, w)
            if w <= tol:
                violations.append((h.outcomes, k, w))
                break
            psi = (model.jumps[k][j] @ psi) / math.sqrt(w)
    return ConsistencyReport(len(hist), min_w, violations)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_povm(dim: int, outcomes: int, rng: np.random.Generator) -> Tuple[np.ndarray, ...]:
    """Generic POVM from a random isometry split into ``outcomes`` blocks."""
    rows = dim * outcomes
    z = (rng.standard_normal((rows, dim)) + 1j * rng.standard_normal((rows, dim))) / math.sqrt(2)
    v, _ = np.linalg.qr(z)
    effects = []
    for k in range(outcomes):
        block = v[k * dim:(k + 1) * dim]
        e = block.conj().T @ block
        effects.append(0.5 * (e + e.conj().T))
    return tuple(effects)


def random_model(
    dim: int, n_steps: int, rng: np.random.Generator, outcomes: int = 2, projective: bool = False
) -> DiscreteModel:
    """Seeded random model; every step collapses."""
    steps = []
    for _ in range(n_steps):
        if projective:
            basis = random_unitary(dim, rng)
            povm = tuple(np.outer(basis[:, k], basis[:, k].conj()) for k in range(dim))
        else:
            povm = random_povm(dim, outcomes, rng)
        steps.append(Step(random_unitary(dim, rng), povm))
    return DiscreteModel(tuple(steps), tuple(f"q{k}" for k in range(dim)))


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


# ---------------------------------------------------------------------------
# beam splitter

BEAM_LABELS = ("S", "F", "D", "C")


def beam_splitter_model() -> DiscreteModel:
    """Photon paths S (source), F (floor) -> beam splitter -> D (detector), C (ceiling).

    Step 0 is emission/absorption at S or F; step 1 is the 50/50 splitter
    followed by detection at D or C. Both steps collapse in the path basis,
    standing in for the apparatus that becomes entangled with the photon.
    """
    s = 1 / math.sqrt(2)
    # rows D, C; columns S, F
    splitter = np.array([[s, 1j * s], [1j * s, s]])
    u = np.zeros((4, 4), dtype=complex)
    u[2:, :2] = splitter
    u[:2, 2:] = splitter.conj().T
    povm = basis_povm(4)
    steps = (Step(np.eye(4, dtype=complex), povm), Step(u, povm))
    return DiscreteModel(steps, BEAM_LABELS, povm_labels=BEAM_LABELS)


@dataclass
class BeamSplitterReport:
    forward: Dict[str, float]
    backward: Dict[str, float]
    conditioned_backward: Dict[str, float]
    monte_carlo: Optional[Dict[str, Dict[str, float]]] = None
    accepted: Optional[Dict[str, int]] = None

    def rows(self):
        out = []
        for case, dist in (("forward_from_S", self.forward),
                           ("backward_from_D", self.backward),
                           ("backward_from_D_given_initial_S", self.conditioned_backward)):
            for label, p in dist.items():
                out.append((case, label, p))
        return out

    def to_text(self) -> str:
        def fmt(d):
            return "{" + ", ".join(f"{k}: {round(v, 10)!r}" for k, v in d.items() if v > 0) + "}"

        lines = [
            "beam splitter (photon paths S, F -> B -> D, C)",
            f"  (a) forward from S:                       {fmt(self.forward)}",
            f"  (b) backward from D, unconditioned:       {fmt(self.backward)}",
            f"  (c) backward from D, initial state in S:  {fmt(self.conditioned_backward)}",
            "  collapse stands for the entangling apparatus, not the bare photon",
        ]
        if self.monte_carlo:
            for case, freqs in self.monte_carlo.items():
                lines.append(f"  monte carlo {case}: {fmt(freqs)}")
        return "\n".join(lines)


def _labelled(model, step, dist, keep):
    return {model.outcome_label(step, k): p for k, p in dist.items()
            if model.outcome_label(step, k) in keep}


def beam_splitter_scenario(runs: int = 0, rng: Optional[np.random.Generator] = None) -> BeamSplitterReport:
    """Forward, backward and initially-conditioned backward photon statistics.

    With ``runs > 0`` each case is also estimated by (rejection) sampling.
    """
    model = beam_splitter_model()
    src, det = model.basis_state("S"), model.basis_state("D")
    at_source = BoundaryCondition.onto("initial", src)
    fwd = outcome_distribution(model, src, 1, "forward")
    bwd = outcome_distribution(model, det, 0, "backward")
    cond = conditioned_distribution(model, det, 0, at_source)
    report = BeamSplitterReport(
        forward=_labelled(model, 1, fwd, ("D", "C")),
        backward=_labelled(model, 0, bwd, ("S", "F")),
        conditioned_backward=_labelled(model, 0, cond, ("S", "F")),
    )
    if runs:
        rng = rng if rng is not None else np.random.default_rng(0)
        mc, accepted = {}, {}
        for case, psi, step, condition, direction, keep in (
            ("forward", src, 1, None, "forward", ("D", "C")),
            ("backward", det, 0, None, "backward", ("S", "F")),
            ("conditioned_backward", det, 0, at_source, "backward", ("S", "F")),
        ):
            est = rejection_sample(model, psi, step, condition, runs, rng, direction)
            mc[case] = _labelled(model, step, est.frequencies, keep)
            accepted[case] = est.accepted
        report.monte_carlo = mc
        report.accepted = accepted
    return report
