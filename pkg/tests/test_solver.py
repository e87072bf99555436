import numpy as np
import pytest

from topsimp.assignment import wasserstein
from topsimp.fixtures import terrain
from topsimp.grid import ScalarField
from topsimp.persistence import PersistenceDiagram, PersistencePair, compute_diagram
from topsimp.solver import (AdamState, SolverConfig, TargetError, TargetSpec, adam_step, build_target,
                            count_persistent, field_distances, fixed_assignment_loss, gradient_step, loss,
                            loss_gradient, run, signal_displacement_stats)


def pair(b, d, bv=0, dv=1, dim=0, finite=True):
    return PersistencePair(dim, -1, -1, bv, dv, b, d, finite)


def path_field():
    # pairs: (1, 2) finite with birth vertex 2, death vertex 1; (0, 3) infinite
    return ScalarField((4,), np.array([0.0, 2.0, 1.0, 3.0]))


def test_threshold_target():
    D = PersistenceDiagram([pair(0, 0.005, 0, 1), pair(0, 0.5, 2, 3), pair(0, 1, 4, 5, finite=False)])
    DT = build_target(D, TargetSpec(threshold=0.01), value_range=1.0)
    assert [p.point for p in DT] == [(0, 0.5), (0, 1)]


def test_remove_dimension_and_infinite_only_targets():
    D = PersistenceDiagram([pair(0, 0.5, 0, 1), pair(0.1, 0.6, 2, 3, dim=1), pair(0, 1, 4, 5, finite=False)])
    assert [p.dim for p in build_target(D, TargetSpec(remove_dims=(1,)), 1.0)] == [0, 0]
    only = build_target(D, TargetSpec(keep_infinite_only=True), 1.0)
    assert len(only) == 1 and not only[0].finite


def test_explicit_target_must_keep_infinite_pairs():
    D = PersistenceDiagram([pair(0, 0.5, 0, 1), pair(0, 1, 4, 5, finite=False)])
    with pytest.raises(TargetError):
        build_target(D, TargetSpec(signal_keys=frozenset({D[0].key})), 1.0)
    kept = build_target(D, TargetSpec(signal_keys=frozenset({D[1].key})), 1.0)
    assert len(kept) == 1


def test_loss_examples():
    D = PersistenceDiagram([pair(0, 1)])
    assert loss(D, D)[0] == pytest.approx(0.0)
    assert loss(D, PersistenceDiagram([]))[0] == pytest.approx(0.5)


def test_halfway_step_and_cutting():
    values = np.array([0.2, 0.8])
    f = ScalarField((2,), values)
    D = PersistenceDiagram([pair(0.2, 0.8)])
    DT = PersistenceDiagram([])
    _, a = wasserstein(D, DT)
    st = gradient_step(f, D, DT, a, 0.5, 0.5)
    assert st.values.tolist() == [0.5, 0.5]
    assert st.updated.tolist() == [0, 1]
    cut = gradient_step(f, D, DT, a, 0.5, 0.0)
    assert cut.values.tolist() == [0.5, 0.8]
    assert cut.max_death_change == 0.0


def test_signal_pair_on_target_does_not_move():
    f = ScalarField((2,), np.array([0.2, 0.8]))
    D = PersistenceDiagram([pair(0.2, 0.8)])
    _, a = wasserstein(D, D)
    st = gradient_step(f, D, D, a, 0.5, 0.5)
    assert st.updated.size == 0 and np.array_equal(st.values, f.values)


def test_infinite_pairs_only_pull_birth():
    values = np.array([0.3, 1.0])
    D = PersistenceDiagram([pair(0.3, 1.0, finite=False)])
    DT = PersistenceDiagram([pair(0.1, 1.0, finite=False)])
    _, a = wasserstein(D, DT)
    gb, gd = loss_gradient(values, D, DT, a)
    assert gb.tolist() == pytest.approx([0.4, 0.0])
    assert not gd.any()


def test_shared_vertex_contributions_sum():
    values = np.array([0.0, 1.0, 0.4])
    D = PersistenceDiagram([pair(0.0, 1.0, 0, 1), pair(0.4, 1.0, 2, 1)])
    DT = PersistenceDiagram([])
    _, a = wasserstein(D, DT)
    _, gd = loss_gradient(values, D, DT, a)
    assert gd[1] == pytest.approx(2 * (1.0 - 0.5) + 2 * (1.0 - 0.7))


def test_descent_with_fixed_assignment(rng):
    for _ in range(20):
        n = 12
        values = rng.random(n)
        idx = rng.permutation(n)
        D = PersistenceDiagram([pair(min(values[a], values[b]), max(values[a], values[b]),
                                     *(sorted([a, b], key=lambda v: values[v])))
                                for a, b in idx.reshape(-1, 2)])
        DT = PersistenceDiagram([D[0]])
        _, a = wasserstein(D, DT)
        before = fixed_assignment_loss(values, D, DT, a)
        alpha = rng.uniform(0.05, 0.5)
        st = gradient_step(ScalarField((n,), values), D, DT, a, alpha, alpha)
        assert fixed_assignment_loss(st.values, D, DT, a) <= before + 1e-12


def test_adam_first_step_closed_form():
    state = AdamState(lr=1e-2)
    x = np.array([1.0, 2.0, 3.0])
    g = np.array([0.5, -2.0, 0.0])
    out = adam_step(x, g, state)
    # at t = 1 the bias-corrected ratio is g / (|g| + eps)
    assert out == pytest.approx(x - 1e-2 * g / (np.abs(g) + 1e-8))
    assert adam_step(out, np.zeros(3), AdamState()).tolist() == out.tolist()


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(alpha_b=0, alpha_d=0)
    with pytest.raises(ValueError):
        SolverConfig(method="fast")
    with pytest.raises(ValueError):
        SolverConfig(stop=1.5)
    SolverConfig(alpha_b=0, alpha_d=0, optimizer="adam")


def test_field_distances():
    f = ScalarField((3,), np.zeros(3))
    assert field_distances(f, f) == {"l2": 0.0, "linf": 0.0}
    g = f.with_values(np.array([0.0, 0.3, 0.0]))
    assert field_distances(f, g) == pytest.approx({"l2": 0.3, "linf": 0.3})
    with pytest.raises(ValueError):
        field_distances(f, ScalarField((4,), np.zeros(4)))


def test_displacement_stats_trivial():
    D = PersistenceDiagram([pair(0, 0.5), pair(0, 1, 4, 5, finite=False)])
    assert signal_displacement_stats(D, D) == {"min": 0.0, "avg": 0.0, "max": 0.0}
    DT = PersistenceDiagram([pair(0, 1, 4, 5, finite=False)])
    Dg = PersistenceDiagram([pair(0.1, 1, 4, 5, finite=False)])
    assert signal_displacement_stats(DT, Dg)["max"] == pytest.approx(0.1)


@pytest.mark.parametrize("method", ["baseline", "accelerated"])
def test_already_simplified_input_needs_no_iteration(method):
    f = ScalarField((5,), np.arange(5.0))
    g, rep = run(f, TargetSpec(threshold=0.01), SolverConfig(method=method))
    assert rep.iterations == 0 and rep.loss0 == 0.0
    assert np.array_equal(g.values, f.values)


@pytest.mark.parametrize("method", ["baseline", "accelerated"])
def test_single_pair_collapses_in_one_step(method):
    g, rep = run(path_field(), TargetSpec(threshold=0.6), SolverConfig(method=method))
    assert rep.iterations == 1
    assert g.values.tolist() == [0.0, 1.5, 1.5, 3.0]
    assert rep.lossFinal == 0.0


def test_iteration_limit_is_flagged():
    g, rep = run(terrain(32, seed=1), TargetSpec(threshold=0.01),
                 SolverConfig(optimizer="adam", max_iter=2))
    assert rep.iterations == 2 and rep.maxIterations
    assert rep.lossFinal > 0.01 * rep.loss0
    assert len(rep.records) == 3


def test_callback_and_records():
    seen = []
    g, rep = run(terrain(32, seed=2), TargetSpec(threshold=0.01), SolverConfig(check_updates=True),
                 callback=lambda j, f, D: seen.append(j))
    assert seen == list(range(1, rep.iterations + 1))
    assert rep.records[0]["loss"] == rep.loss0
    for r in rep.records[1:]:
        assert 0.0 <= r["stillPairFraction"] <= 1.0
        assert 0.0 < r["updatedVertexFraction"] <= 1.0
        assert set(r["times"]) == {"step", "gradient", "diagram", "assignment"}
        assert r["fullLoss"] == pytest.approx(r["loss"], rel=0.02, abs=1e-15)
    assert rep.lossFinal <= 0.01 * rep.loss0 and not rep.maxIterations


def test_terrain_keeps_signal_and_methods_agree():
    f = terrain(64)
    r = float(np.ptp(f.values))
    outs = {}
    for method in ["baseline", "accelerated"]:
        g, rep = run(f, TargetSpec(threshold=0.01), SolverConfig(method=method))
        D, _, _ = compute_diagram(g)
        assert rep.lossFinal <= 0.01 * rep.loss0
        assert count_persistent(D, 0, 0.01 * r) == 3
        outs[method] = rep.iterations
    assert outs["accelerated"] <= outs["baseline"]


def test_adam_needs_more_iterations_than_direct():
    f = terrain(32, seed=3)
    _, direct = run(f, TargetSpec(threshold=0.01), SolverConfig(method="baseline"))
    _, adam = run(f, TargetSpec(threshold=0.01), SolverConfig(method="baseline", optimizer="adam"))
    assert adam.iterations > direct.iterations
