import numpy as np
import pytest

from conftest import random_cost_matrix
from oracles import brute_force_path, brute_force_tour, route_cost_ref
from routeseq.errors import InvalidInputError
from routeseq.tsp import (
    CostMatrix,
    _nearest_neighbor,
    _two_opt,
    route_cost,
    solve_path,
    solve_tour,
)


def test_single_node_tour():
    sol = solve_tour(np.zeros((1, 1)), origin=0)
    assert sol.order == [0]
    assert sol.cost == 0.0


def test_symmetric_triangle():
    m = np.ones((3, 3)) - np.eye(3)
    sol = solve_tour(m, origin=0)
    assert sol.cost == 3.0
    assert sol.order[0] == 0


def test_tour_matches_brute_force(rng):
    for _ in range(10):
        m = random_cost_matrix(rng, 7)
        sol = solve_tour(m, origin=0)
        _, best = brute_force_tour(m, 0)
        assert sol.cost == pytest.approx(best, rel=1e-12)
        assert sol.method == "exact"


def test_path_two_nodes():
    m = np.array([[0.0, 4.0], [9.0, 0.0]])
    sol = solve_path(m, 0, 1)
    assert sol.order == [0, 1]
    assert sol.cost == 4.0


def test_path_single_node():
    sol = solve_path(np.zeros((1, 1)), 0, 0)
    assert sol.order == [0]
    assert sol.cost == 0.0


def test_path_same_endpoints_rejected():
    m = random_cost_matrix(np.random.default_rng(0), 4)
    with pytest.raises(InvalidInputError):
        solve_path(m, 2, 2)


def test_path_matches_brute_force(rng):
    for _ in range(10):
        m = random_cost_matrix(rng, 6)
        sol = solve_path(m, 0, 5)
        _, best = brute_force_path(m, 0, 5)
        assert sol.cost == pytest.approx(best, rel=1e-12)


def test_invalid_matrices_rejected():
    with pytest.raises(InvalidInputError):
        solve_tour(np.zeros((2, 3)))
    bad = np.zeros((3, 3))
    bad[0, 1] = -1.0
    with pytest.raises(InvalidInputError):
        solve_tour(bad)


def test_route_cost_examples():
    assert route_cost([0], np.zeros((1, 1)), close_tour=True) == 0.0
    m = np.zeros((3, 3))
    m[0, 1], m[1, 2], m[2, 0] = 5.0, 7.0, 9.0
    assert route_cost([0, 1, 2], m, close_tour=True) == 21.0
    with pytest.raises(InvalidInputError):
        route_cost([0, 1, 1], m)


def test_asymmetric_reversal_differs():
    m = np.array([
        [0.0, 1.0, 10.0],
        [10.0, 0.0, 1.0],
        [1.0, 10.0, 0.0],
    ])
    fwd = route_cost([0, 1, 2], m, close_tour=True)
    rev = route_cost([0, 2, 1], m, close_tour=True)
    assert fwd != rev


def test_symmetric_reversal_equal(rng):
    m = random_cost_matrix(rng, 6, symmetric=True)
    order = [0, 3, 1, 5, 2, 4]
    rev = [order[0]] + order[1:][::-1]
    assert route_cost(order, m, close_tour=True) == pytest.approx(
        route_cost(rev, m, close_tour=True), rel=1e-12)


def test_heuristic_never_beats_exact(rng):
    for _ in range(10):
        m = random_cost_matrix(rng, 9)
        exact = solve_tour(m, origin=0)
        heur = solve_tour(m, origin=0, exact_threshold=3)
        assert heur.method == "heuristic"
        assert heur.cost >= exact.cost - 1e-9
        assert sorted(heur.order) == list(range(9))


def test_two_opt_improves_nearest_neighbor(rng):
    for _ in range(10):
        m = random_cost_matrix(rng, 12)
        nn_order = _nearest_neighbor(m, 0, list(range(1, 12)), None)
        nn_cost = route_cost_ref(nn_order, m, close=True)
        _, improved = _two_opt(list(nn_order), m, close=True, fixed_last=False)
        assert improved <= nn_cost + 1e-9


def test_tour_cost_invariant_to_relabeling(rng):
    m = random_cost_matrix(rng, 8)
    perm = list(rng.permutation(8))
    m2 = m[np.ix_(perm, perm)]
    cost1 = solve_tour(m, origin=perm[0]).cost
    cost2 = solve_tour(m2, origin=0).cost
    assert cost1 == pytest.approx(cost2, rel=1e-12)


def test_cost_matrix_wrapper():
    m = CostMatrix(np.zeros((2, 2)), labels=["a", "b"])
    sol = solve_tour(m, origin=0)
    assert sol.cost == 0.0


def test_heuristic_path_respects_endpoints(rng):
    m = random_cost_matrix(rng, 16)
    sol = solve_path(m, 2, 9, exact_threshold=5)
    assert sol.order[0] == 2 and sol.order[-1] == 9
    assert sorted(sol.order) == list(range(16))
    assert sol.method == "heuristic"
