import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corraloha.analytic import (
    energy_efficiency,
    evaluate,
    lifetime_throughput,
    mean_aoi,
    network_aoi,
    objective,
    reset_probs,
    sensor_aoi,
    steady_state,
    success_probs,
)
from corraloha.errors import DegenerateChain
from corraloha.model import CorrelationMatrix, NetworkModel, ObjectiveWeights, PowerProfile

from .conftest import random_instance


# hand-evaluated oracles

def test_success_single_sensor():
    assert success_probs([0.3]).tolist() == [1.0]


def test_success_two_half():
    assert np.allclose(success_probs([0.5, 0.5]), [0.5, 0.5])


def test_success_three():
    assert np.allclose(success_probs([0.1, 0.2, 0.3]), [0.56, 0.63, 0.72], atol=1e-15)


def test_success_with_certain_transmitter():
    # leave-one-out must not divide by 1 - q = 0
    assert np.allclose(success_probs([1.0, 0.5, 0.0]), [0.5, 0.0, 0.0])


def test_reset_identity():
    assert np.allclose(reset_probs([0.5, 0.5], np.eye(2)), [0.25, 0.25])


def test_reset_one_way_correlation():
    c = np.array([[1.0, 0.0], [1.0, 1.0]])  # sensor 2's packets always carry sensor 1's state
    assert np.allclose(reset_probs([0.5, 0.5], c), [0.5, 0.25])


def test_reset_silent():
    assert np.all(reset_probs(np.zeros(4), np.ones((4, 4))) == 0)


def test_steady_state_hand():
    assert np.allclose(steady_state(0.5, 3), [0.5, 0.25, 0.25])
    assert np.allclose(steady_state(1.0, 5), [1, 0, 0, 0, 0])


def test_steady_state_zero_reset():
    with pytest.raises(DegenerateChain):
        steady_state(0.0, 5)


def test_mean_aoi_hand():
    assert mean_aoi(1.0, 7) == 1.0
    assert mean_aoi(0.5, 2) == pytest.approx(1.5)
    assert mean_aoi(0.0, 20) == 20.0
    assert mean_aoi(1e-15, 20) == 20.0
    assert mean_aoi(1e-9, 20) == pytest.approx(20.0, abs=1e-6)


def test_network_aoi_two_sensors(two_sensor):
    assert network_aoi([0.5, 0.5], two_sensor) == pytest.approx(3.5)
    assert np.allclose(sensor_aoi([0.5, 0.5], two_sensor), [1.75, 1.75])


def test_network_aoi_silent():
    m = NetworkModel(CorrelationMatrix.identity(4), 9)
    assert network_aoi(np.zeros(4), m) == 36.0


def test_lifetime_single_sensor():
    m = NetworkModel(CorrelationMatrix.identity(1), 20, PowerProfile(100.0, 1.0, 100.0))
    assert lifetime_throughput([1.0], m) == pytest.approx([1.0])


def test_lifetime_and_ee_two_sensors():
    m = NetworkModel(CorrelationMatrix.identity(2), 20, PowerProfile(100.0, 1.0, 1e6))
    u = lifetime_throughput([0.5, 0.5], m)
    assert u[0] == pytest.approx(1e6 * 0.25 / 50.5)
    assert u[0] == pytest.approx(4950.495, rel=1e-6)
    xi, total = energy_efficiency([0.5, 0.5], m)
    assert xi[0] == pytest.approx(4.9505e-3, rel=1e-4)
    assert np.allclose(u / 1e6, xi)
    assert total == pytest.approx(xi.sum(), abs=0)


def test_ee_silent():
    m = NetworkModel(CorrelationMatrix.identity(3))
    assert np.all(energy_efficiency(np.zeros(3), m)[0] == 0)


def test_objective_weights(rng):
    model, q = random_instance(rng, 6)
    assert objective(q, model, ObjectiveWeights(1, 0)) == pytest.approx(network_aoi(q, model))
    assert objective(q, model, ObjectiveWeights(0, 1)) == pytest.approx(-energy_efficiency(q, model)[1])


def test_identity_n10_homogeneous_point_is_grid_minimum():
    m = NetworkModel(CorrelationMatrix.identity(10))
    qs = np.round(np.arange(0.080, 0.120, 0.001), 6)
    js = [objective(np.full(10, q), m) for q in qs]
    assert abs(qs[int(np.argmin(js))] - 0.099) <= 0.001


def test_report_aggregates(rng):
    model, q = random_instance(rng, 5)
    rep = evaluate(q, model)
    assert rep.network_aoi == np.sum(rep.sensor_aoi)
    assert rep.network_ee == np.sum(rep.sensor_ee)
    assert rep.network_throughput == pytest.approx(np.sum(rep.lifetime_throughput))
    text = rep.to_csv()
    assert text.endswith("\n") and "\r" not in text
    lines = text.splitlines()
    assert lines[0].startswith("sensor,q,")
    assert len(lines) == 1 + 5 + 1


# invariants

P_GRID = np.round(np.arange(1, 100) / 100, 2)
CAPS = (1, 2, 5, 20, 100)


@pytest.mark.parametrize("cap", CAPS)
def test_steady_state_normalised_on_grid(cap):
    for p in P_GRID:
        assert abs(steady_state(p, cap).sum() - 1) < 1e-12


@pytest.mark.parametrize("cap", CAPS)
def test_mean_matches_distribution_on_grid(cap):
    k = np.arange(1, cap + 1)
    for p in P_GRID:
        assert abs(mean_aoi(p, cap) - k @ steady_state(p, cap)) < 1e-10


@pytest.mark.parametrize("cap", [2, 5, 20, 100])
def test_mean_aoi_strictly_decreasing(cap):
    vals = mean_aoi(np.linspace(1e-6, 1, 2001), cap)
    assert np.all(np.diff(vals) < 0)


@given(p=st.floats(0.0, 1.0), cap=st.integers(1, 500))
def test_mean_aoi_bounds(p, cap):
    v = mean_aoi(p, cap)
    assert 1 - 1e-12 <= v <= cap + 1e-9


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(1, 12),
    i=st.integers(0, 11),
    j=st.integers(0, 11),
    bump=st.floats(0.0, 1.0),
)
def test_correlation_gain(seed, n, i, j, bump):
    i, j = i % n, j % n
    r = np.random.default_rng(seed)
    C = r.uniform(0, 1, (n, n)) * (r.random((n, n)) < 0.5)
    np.fill_diagonal(C, 1.0)
    q = r.uniform(0, 1, n)
    C2 = C.copy()
    C2[j, i] = min(1.0, C2[j, i] + bump)
    m1 = NetworkModel(CorrelationMatrix(C), 20)
    m2 = NetworkModel(CorrelationMatrix(C2), 20)
    assert np.all(reset_probs(q, C2) >= reset_probs(q, C) - 1e-15)
    assert np.all(sensor_aoi(q, m2) <= sensor_aoi(q, m1) + 1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 15))
def test_reset_probability_is_a_probability(seed, n):
    r = np.random.default_rng(seed)
    q = r.uniform(0, 1, n)
    pr = reset_probs(q, r.uniform(0, 1, (n, n)))
    # at most one sensor succeeds per slot
    assert np.all(pr >= 0) and np.all(pr <= (success_probs(q) * q).sum() + 1e-15)
    assert (success_probs(q) * q).sum() <= 1 + 1e-12
