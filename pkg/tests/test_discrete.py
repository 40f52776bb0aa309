import itertools
import math

import numpy as np
import pytest

from chronocollapse import discrete as dm
from chronocollapse.errors import ConditioningError
from chronocollapse.persistence import split_stream


def _brute_force(model, psi0, direction):
    """Oracle: history probability = squared norm of the unnormalized branch."""
    d = model.dim
    coll = [k for k, s in enumerate(model.steps) if s.collapses]
    out = {}
    for combo in itertools.product(*[range(len(model.steps[k].povm)) for k in coll]):
        pick = dict(zip(coll, combo))
        v = np.array(psi0, dtype=complex)
        order = range(len(model.steps)) if direction == "forward" else reversed(range(len(model.steps)))
        for k in order:
            u = model.steps[k].unitary
            if direction == "forward":
                v = u @ v
                if k in pick:
                    v = dm._psd_sqrt(model.steps[k].povm[pick[k]]) @ v
            else:
                if k in pick:
                    v = dm._psd_sqrt(model.steps[k].povm[pick[k]]) @ v
                v = u.conj().T @ v
        p = float(np.vdot(v, v).real)
        if p > 1e-14:
            out[combo] = (p, v / math.sqrt(p))
    return coll, out


def _model(seed, dim=3, steps=3, outcomes=2, projective=False):
    rng = split_stream(seed, 0)
    return dm.random_model(dim, steps, rng, outcomes=outcomes, projective=projective), dm.random_state(dim, rng)


@pytest.mark.parametrize("seed", [1, 2, 3])
@pytest.mark.parametrize("direction", ["forward", "backward"])
def test_histories_match_brute_force(seed, direction):
    model, psi = _model(seed)
    hist = dm.enumerate_histories(model, psi, direction)
    coll, oracle = _brute_force(model, psi, direction)
    got = {tuple(h.outcomes[k] for k in coll): h for h in hist}
    assert set(got) == set(oracle)
    for key, (p, v) in oracle.items():
        assert got[key].probability == pytest.approx(p, abs=1e-12)
        assert abs(abs(np.vdot(got[key].terminal_state, v)) - 1) < 1e-10
    assert sum(h.probability for h in hist) == pytest.approx(1.0, abs=1e-10)


def test_model_validation():
    with pytest.raises(ValueError):
        dm.DiscreteModel((dm.Step(np.array([[1, 1], [0, 1]])),), ("a", "b"))
    bad = (np.eye(2) * 0.4, np.eye(2) * 0.4)
    with pytest.raises(ValueError):
        dm.DiscreteModel((dm.Step(np.eye(2), bad),), ("a", "b"))
    with pytest.raises(ValueError):
        dm.DiscreteModel((), tuple(str(k) for k in range(17)))


def test_input_state_must_be_normalized():
    model, _ = _model(1)
    with pytest.raises(ValueError):
        dm.enumerate_histories(model, np.array([1.0, 1.0, 0.0]))


def test_tree_size_guard():
    model = dm.DiscreteModel(tuple(dm.Step(np.eye(2), dm.basis_povm(2)) for _ in range(21)), ("a", "b"))
    assert model.tree_size() == 2 ** 21
    with pytest.raises(ValueError):
        dm.enumerate_histories(model, np.array([1.0, 0.0]))


def test_beam_splitter_forward():
    model = dm.beam_splitter_model()
    dist = dm.outcome_distribution(model, model.basis_state("S"), 1, "forward")
    assert dist[2] == pytest.approx(0.5, abs=1e-10)
    assert dist[3] == pytest.approx(0.5, abs=1e-10)


def test_beam_splitter_backward():
    model = dm.beam_splitter_model()
    dist = dm.outcome_distribution(model, model.basis_state("D"), 0, "backward")
    assert dist[0] == pytest.approx(0.5, abs=1e-10)
    assert dist[1] == pytest.approx(0.5, abs=1e-10)


def test_beam_splitter_scenario():
    rep = dm.beam_splitter_scenario()
    assert rep.forward == pytest.approx({"D": 0.5, "C": 0.5}, abs=1e-10)
    assert rep.backward == pytest.approx({"S": 0.5, "F": 0.5}, abs=1e-10)
    assert rep.conditioned_backward == pytest.approx({"S": 1.0, "F": 0.0}, abs=1e-10)
    assert "(c) backward from D, initial state in S:  {S: 1.0}" in rep.to_text()


def test_beam_splitter_monte_carlo():
    rep = dm.beam_splitter_scenario(runs=20_000, rng=split_stream(1, 0))
    for case in ("forward", "backward", "conditioned_backward"):
        exact = getattr(rep, case)
        n = rep.accepted[case]
        for label, p in exact.items():
            se = math.sqrt(p * (1 - p) / n)
            assert abs(rep.monte_carlo[case][label] - p) <= max(3 * se, 1e-12)
    assert rep.accepted["conditioned_backward"] == pytest.approx(10_000, abs=500)


def test_conditioning_on_full_space_is_identity():
    model, psi = _model(4, dim=3, steps=4)
    for kind, direction in (("initial", "backward"), ("final", "forward")):
        cond = dm.BoundaryCondition(kind, np.eye(3))
        for step in range(4):
            plain = dm.outcome_distribution(model, psi, step, direction)
            cdist = dm.conditioned_distribution(model, psi, step, cond)
            for k in plain:
                assert cdist[k] == pytest.approx(plain[k], abs=1e-12)


def test_conditioned_distribution_against_bayes_oracle():
    model, psi = _model(5, dim=3, steps=3, outcomes=3)
    rng = split_stream(5, 1)
    cond = dm.BoundaryCondition.onto("final", dm.random_state(3, rng))
    coll, oracle = _brute_force(model, psi, "forward")
    joint = np.zeros(3)
    for combo, (p, v) in oracle.items():
        joint[combo[1]] += p * cond.weight(v)
    expected = joint / joint.sum()
    got = dm.conditioned_distribution(model, psi, 1, cond)
    np.testing.assert_allclose([got[k] for k in range(3)], expected, atol=1e-12)
    assert sum(got.values()) == pytest.approx(1.0, abs=1e-10)
    assert min(got.values()) >= 0


def test_zero_probability_condition():
    model = dm.beam_splitter_model()
    # a backward photon from D never reaches C at the initial time
    cond = dm.BoundaryCondition.onto("initial", model.basis_state("C"))
    with pytest.raises(ConditioningError):
        dm.conditioned_distribution(model, model.basis_state("D"), 0, cond)


def test_boundary_condition_validation():
    with pytest.raises(ValueError):
        dm.BoundaryCondition("middle", np.eye(2))
    with pytest.raises(ValueError):
        dm.BoundaryCondition("final", np.array([[1.0, 0.5], [0.5, 0.0]]))
    bc = dm.BoundaryCondition.onto("initial", [1, 1, 0], [0, 1, 1])
    assert np.allclose(bc.projector @ bc.projector, bc.projector)
    assert bc.direction.value == "backward"


@pytest.mark.parametrize("seed", [6, 7])
def test_rejection_sampling_matches_enumeration(seed):
    model, psi = _model(seed, dim=3, steps=4, outcomes=2)
    rng = split_stream(seed, 9)
    cond = dm.BoundaryCondition.onto("initial", dm.random_state(3, rng), dm.random_state(3, rng))
    exact = dm.conditioned_distribution(model, psi, 2, cond)
    est = dm.rejection_sample(model, psi, 2, cond, 100_000, rng)
    for k, p in exact.items():
        assert abs(est.frequencies[k] - p) <= 3 * est.standard_error(k, p)


def test_vectorized_sampler_agrees_with_sequential():
    model, psi = _model(8, dim=2, steps=3)
    exact = dm.outcome_distribution(model, psi, 2, "forward")
    rng = split_stream(8, 1)
    seq = [dm.sample_history(model, psi, "forward", rng).outcomes[2] for _ in range(4000)]
    for k, p in exact.items():
        freq = seq.count(k) / len(seq)
        assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / len(seq))


def test_consistency_projective_identity_model():
    model = dm.DiscreteModel(tuple(dm.Step(np.eye(3), dm.basis_povm(3)) for _ in range(3)), ("a", "b", "c"))
    rep = dm.replay_consistency_check(model, np.ones(3) / math.sqrt(3))
    assert rep.ok and rep.histories == 3
    assert rep.min_weight == pytest.approx(1.0, abs=1e-14)


def test_consistency_beam_splitter_and_random_models():
    model = dm.beam_splitter_model()
    assert dm.replay_consistency_check(model, model.basis_state("S")).ok
    for seed in (1, 2):
        m, psi = _model(seed, dim=3, steps=4, outcomes=3)
        assert dm.replay_consistency_check(m, psi).ok
        m, psi = _model(seed, dim=3, steps=3, projective=True)
        assert dm.replay_consistency_check(m, psi).ok


def test_random_generators_are_valid():
    rng = split_stream(1, 0)
    u = dm.random_unitary(4, rng)
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-12)
    dm.check_povm(dm.random_povm(4, 3, rng), 4)
    psi = dm.random_state(4, rng)
    assert np.linalg.norm(psi) == pytest.approx(1.0)
