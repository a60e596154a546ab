"""Densification and swap scenario runs and their report invariants."""

import numpy as np
import pytest
import scipy.linalg

import netxform as nx
from netxform.dynamics import determinant
from netxform.scenarios import (ScenarioError, agreement_error,
                                contraction_waypoints, default_initial_state,
                                densification_target, swap_target)


# ---------------------------------------------------------------------------
# building blocks


def test_densification_target_empty_horizon_is_identity():
    T = densification_target(nx.complete_graph(3), 1.0, 1.0)
    assert np.abs(T - np.eye(3)).max() < 1e-15


def test_densification_target_two_node_closed_form():
    T = densification_target(nx.complete_graph(2), 0.0, 1.0)
    a = (1 + np.exp(-2.0)) / 2
    b = (1 - np.exp(-2.0)) / 2
    assert np.abs(T - [[a, b], [b, a]]).max() < 1e-14


def test_densification_target_rows_sum_to_one():
    T = densification_target(nx.complete_graph(5), 0.0, 1.0)
    assert np.abs(T @ np.ones(5) - 1.0).max() < 1e-12
    assert np.array_equal(T, T.T) or np.abs(T - T.T).max() < 1e-14


def test_agreement_error_examples():
    x0 = np.array([1.0, 3.0])
    assert agreement_error(np.array([2.0, 2.0]), x0) == 0.0
    assert abs(agreement_error(x0, x0) - np.sqrt(2.0)) < 1e-15
    with pytest.raises(ScenarioError):
        agreement_error(np.zeros(2), np.zeros(3))


def test_swap_target_matrix():
    T = swap_target(4, [(1, 2), (3, 4)])
    assert np.array_equal(T @ np.array([1.0, 2.0, 3.0, 4.0]), [2.0, 1.0, 4.0, 3.0])
    assert np.array_equal(swap_target(3, []), np.eye(3))


def test_default_initial_state_is_centered_and_seeded():
    xi = default_initial_state(5, 0)
    assert abs(xi.mean()) < 1e-15
    assert np.array_equal(xi, default_initial_state(5, 0))


# ---------------------------------------------------------------------------
# contraction waypoints


def test_waypoints_empty_for_mild_targets():
    assert contraction_waypoints(np.eye(3)) == []
    assert contraction_waypoints(np.diag([0.5, 1.0])) == []


def test_waypoints_empty_without_a_real_power_path():
    rotation = np.array([[0.0, -1.0], [1.0, 0.0]])  # not symmetric
    assert contraction_waypoints(rotation) == []
    assert contraction_waypoints(np.diag([-1.0, -np.exp(10.0)])) == []


def test_waypoints_telescope_to_the_target():
    T = densification_target(nx.complete_graph(5), 0.0, 1.0)
    wps = contraction_waypoints(T)
    assert len(wps) >= 2
    prev = np.eye(5)
    composed = np.eye(5)
    for B in wps + [T]:
        step = B @ np.linalg.inv(prev)
        assert -np.log(determinant(step)) < 4.0 + 1e-9
        composed = step @ composed
        prev = B
    assert np.abs(composed - T).max() < 1e-10


def test_waypoints_are_matrix_powers():
    T = np.diag([np.exp(-6.0), np.exp(-6.0), 1.0])
    wps = contraction_waypoints(T)
    assert len(wps) == 2  # K = 3 segments
    assert np.abs(wps[0] - scipy.linalg.fractional_matrix_power(T, 1 / 3)).max() < 1e-12
    assert np.abs(wps[1] - scipy.linalg.fractional_matrix_power(T, 2 / 3)).max() < 1e-12


# ---------------------------------------------------------------------------
# scenario validation


def test_densify_scenario_rejects_mismatched_or_disconnected():
    with pytest.raises(ScenarioError):
        nx.DensifyScenario(sparse_graph=nx.path_graph(3),
                           dense_graph=nx.complete_graph(4))
    with pytest.raises(ScenarioError):
        nx.DensifyScenario(sparse_graph=nx.build_graph(3, [(1, 2)]),
                           dense_graph=nx.complete_graph(3))


def test_swap_scenario_rejects_bad_pairs():
    g = nx.cycle_graph(4)
    with pytest.raises(ScenarioError):
        nx.SwapScenario(graph=g, pairs=((1, 1),))
    with pytest.raises(ScenarioError):
        nx.SwapScenario(graph=g, pairs=((1, 2), (2, 3)))
    with pytest.raises(ScenarioError):
        nx.SwapScenario(graph=g, pairs=((1, 5),))


# ---------------------------------------------------------------------------
# end-to-end runs (the expensive solves come from session fixtures)


def test_densify_report_curves(densify_report):
    rep = densify_report
    assert rep.solution.converged
    # all three runs start from the same state, so the curves agree at t0
    assert abs(rep.err_sparse[0] - rep.err_synth[0]) < 1e-12
    assert abs(rep.err_dense[0] - rep.err_synth[0]) < 1e-12
    # the synthesized sparse network matches dense consensus at the horizon
    assert abs(rep.err_synth[-1] - rep.err_dense[-1]) < 1e-6
    assert rep.err_synth[-1] <= rep.err_sparse[-1]
    assert rep.grid.size == rep.node_states.shape[0]


def test_densify_final_state_matches_exponential_oracle(densify_report):
    rep = densify_report
    L = nx.laplacian(nx.complete_graph(5))
    want = scipy.linalg.expm(-L) @ rep.xi
    assert np.linalg.norm(rep.final_state - want) < 1e-6
    assert np.linalg.norm(rep.target_state - want) < 1e-12


def test_densify_same_graph_reproduces_consensus():
    g = nx.complete_graph(2)
    rep = nx.run_densify(nx.DensifyScenario(sparse_graph=g, dense_graph=g))
    assert rep.solution.converged
    assert np.abs(rep.err_synth - rep.err_dense).max() < 1e-5


def test_swap_report(swap_report):
    rep = swap_report
    assert rep.solution.converged
    assert np.array_equal(rep.xi, [1.0, 2.0, 3.0, 4.0])
    assert np.abs(rep.final_state - [2.0, 1.0, 4.0, 3.0]).max() < 1e-4
    assert np.array_equal(rep.target, swap_target(4, [(1, 2), (3, 4)]))
    # two segments: through the cyclic waypoint, then on to the permutation
    assert len(rep.solution.segments()) == 2


def test_swap_segment_products_telescope(swap_report):
    segs = swap_report.solution.segments()
    composed = np.eye(4)
    for s in segs:
        composed = s.final @ composed
    assert np.linalg.norm(composed - swap_report.target) < 1e-7


def test_swap_no_pairs_is_identity_target():
    rep = nx.run_swap(nx.SwapScenario(graph=nx.path_graph(2), pairs=()))
    assert rep.solution.converged
    assert np.abs(rep.final_state - rep.xi).max() < 1e-8
