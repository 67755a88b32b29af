import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corraloha.analytic import network_aoi, objective, energy_efficiency
from corraloha.errors import EmptyInterval
from corraloha.homogeneous import (
    age_optimal,
    age_optimal_q,
    energy_optimal,
    energy_optimal_q,
    grid,
    grid_argmax_ee,
    grid_argmin,
    pareto_search,
    sweep,
)
from corraloha.model import CorrelationMatrix, NetworkModel, ObjectiveWeights, PowerProfile, generate_correlation


def c1(n=50, seed=7):
    return NetworkModel(generate_correlation(n, 1.0, (0.0, 0.3), 1.0, seed), 20)


def test_sweep_matches_general_evaluation():
    m = c1(12, 3)
    qs = [0.0, 0.01, 0.05, 0.3, 1.0]
    s = sweep(m, qs)
    for k, q in enumerate(qs):
        pol = np.full(12, q)
        assert s.aoi[k] == pytest.approx(network_aoi(pol, m), rel=1e-12)
        assert s.ee[k] == pytest.approx(energy_efficiency(pol, m)[1], rel=1e-12, abs=1e-300)
        assert s.objective[k] == pytest.approx(objective(pol, m), rel=1e-12)


def test_grid():
    g = grid(0.1, 0.2, 0.01)
    assert len(g) == 11 and g[-1] == pytest.approx(0.2)
    assert len(grid(0.5, 0.5, 0.1)) == 1
    with pytest.raises(EmptyInterval):
        grid(0.3, 0.2, 0.01)


def test_age_optimal_closed_form():
    assert age_optimal_q(50) == 0.02
    assert age_optimal_q(1) == 1.0


def test_energy_optimal_closed_form():
    assert energy_optimal_q(50, 100.0, 1.0)[0] == pytest.approx(0.010033, abs=1e-6)
    assert energy_optimal_q(10, 100.0, 1.0)[0] == pytest.approx(0.027130, abs=1e-6)
    q, limit = energy_optimal_q(10, 1.0, 1.0)
    assert limit and q == 0.1


def test_identity_n10_grid_argmin_near_one_over_n():
    m = NetworkModel(CorrelationMatrix.identity(10), 20)
    q, _ = grid_argmin(m, step=1e-4, what="aoi")
    assert abs(q - 0.1) <= 1e-4


def test_small_n_reports_grid_argmin():
    sol = age_optimal(NetworkModel(CorrelationMatrix.identity(3), 20))
    assert sol.q_star == pytest.approx(1 / 3)
    assert sol.grid_q is not None and abs(sol.grid_q - 1 / 3) <= 1e-4


def test_n50_ee_argmax_close_to_closed_form():
    m = c1()
    q_e = energy_optimal(m)
    assert q_e.q_star == pytest.approx(0.010033, abs=1e-6)
    assert abs(q_e.grid_q - q_e.q_star) / q_e.q_star < 0.10


def test_unimodality_around_optima():
    m = c1()
    s = sweep(m, grid(0.001, 0.2, 0.001))
    k_a = int(np.argmin(s.aoi))
    assert np.all(np.diff(s.aoi[: k_a + 1]) < 0) and np.all(np.diff(s.aoi[k_a:]) > 0)
    k_e = int(np.argmax(s.ee))
    assert np.all(np.diff(s.ee[: k_e + 1]) > 0) and np.all(np.diff(s.ee[k_e:]) < 0)


def test_aoi_only_gives_age_optimum():
    m = c1()
    sol = pareto_search(m, ObjectiveWeights(1.0, 0.0))
    assert abs(sol.q_star - 0.02) <= 1e-4


def test_ee_only_gives_ee_optimum():
    m = c1()
    sol = pareto_search(m, ObjectiveWeights(0.0, 1.0))
    assert abs(sol.q_star - energy_optimal_q(50, 100.0, 1.0)[0]) <= 1e-4 + 1e-12


@pytest.mark.parametrize("rng_", [(0.0, 0.3), (0.3, 0.6), (0.6, 0.9)])
def test_pareto_interior_and_better_than_endpoints(rng_):
    m = NetworkModel(generate_correlation(50, 1.0, rng_, 1.0, 11), 20)
    w = ObjectiveWeights(0.02, 1.0)
    sol = pareto_search(m, w)
    q_e = energy_optimal_q(50, 100.0, 1.0)[0]
    assert q_e < sol.q_star < 0.02
    assert sol.objective_at_q <= energy_optimal(m, w).objective_at_q
    assert sol.objective_at_q <= age_optimal(m, w).objective_at_q
    assert sol.candidates == len(grid(q_e, 0.02, 1e-4))


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(2, 60),
    ratio=st.floats(1.01, 1000.0),
    hi=st.floats(0.0, 1.0),
    g1=st.floats(0.0, 1.0),
)
def test_free_minimiser_inside_interval(seed, n, ratio, hi, g1):
    m = NetworkModel(generate_correlation(n, 1.0, (0.0, hi), 1.0, seed), 20, PowerProfile(ratio, 1.0))
    w = ObjectiveWeights(g1, 1.0)
    q_free, _ = grid_argmin(m, w, step=1e-4)
    q_e = energy_optimal_q(n, ratio, 1.0)[0]
    assert q_e - 1e-4 <= q_free <= 1 / n + 1e-4


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(1.0, 5.0), q=st.floats(0.001, 0.5))
def test_correlation_gain_homogeneous(seed, lam, q):
    base = generate_correlation(20, 1.0, (0.0, 0.3), 1.0, seed)
    scaled = np.minimum(base.entries * lam, 1.0)
    np.fill_diagonal(scaled, 1.0)
    m1 = NetworkModel(base, 20)
    m2 = NetworkModel(CorrelationMatrix(scaled), 20)
    assert age_optimal(m2).aoi_at_q <= age_optimal(m1).aoi_at_q + 1e-12
    assert sweep(m2, [q]).ee[0] >= sweep(m1, [q]).ee[0] - 1e-15


def test_grid_argmax_ee_consistent():
    q, s = grid_argmax_ee(c1())
    assert s.ee.max() == s.ee[np.searchsorted(s.q, q)]
