"""Shared fixtures: canonical target matrices and the expensive end-to-end
solves reused by several test modules.

A small terminal-summary hook prints one PASS/FAIL line per acceptance
criterion (tests named test_criterion_*), so the gate outcome is visible
even when pytest captures stdout.
"""

import numpy as np
import pytest

import netxform as nx

_CRITERION_RESULTS = {}

CRITERION_TITLES = {
    1: "feasibility gate classifications",
    2: "Lie layer brackets and closure dimensions",
    3: "scalar analytic boundary value problem",
    4: "5-node densification",
    5: "4-node swap through the cyclic waypoint",
    6: "trajectory invariants on random schedules",
    7: "extremal conservation laws",
    8: "gradient and adjoint finite-difference checks",
    9: "byte-identical output across worker counts",
}


def pytest_runtest_logreport(report):
    name = report.location[2]
    if report.when == "call" and name.startswith("test_criterion_"):
        num = int(name.split("_")[2])
        _CRITERION_RESULTS[num] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for num in sorted(_CRITERION_RESULTS):
        status = "PASS" if _CRITERION_RESULTS[num] == "passed" else "FAIL"
        terminalreporter.write_line(
            f"  criterion {num} ({CRITERION_TITLES[num]}): {status}")


def consensus_map(n: int) -> np.ndarray:
    """Rank-one averaging map; determinant zero for n >= 2."""
    return np.full((n, n), 1.0 / n)


def single_node_average_map(n: int) -> np.ndarray:
    """Averaging computed by node 1 only; all other nodes restored."""
    T = np.eye(n)
    T[0] = 1.0 / n
    return T


SWAP_TARGET = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 1.0, 0.0],
])

CYCLIC_WAYPOINT = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
])


@pytest.fixture(scope="session")
def scalar_solution():
    from netxform.optimal_control import BvpProblem, solve_bvp
    g = nx.build_graph(1, [])
    return solve_bvp(BvpProblem(graph=g, target=np.array([[2.0]])))


@pytest.fixture(scope="session")
def densify_report():
    scen = nx.DensifyScenario(sparse_graph=nx.path_graph(5),
                              dense_graph=nx.complete_graph(5))
    return nx.run_densify(scen)


@pytest.fixture(scope="session")
def swap_report():
    scen = nx.SwapScenario(graph=nx.cycle_graph(4), pairs=((1, 2), (3, 4)))
    return nx.run_swap(scen)
