import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ehwf.model import (FEASIBLE, INFEASIBLE, SEMI_FEASIBLE, Scenario, UserEnv,
                        battery_trace, check_feasible, cumulative_harvest,
                        sum_rate, user_battery_trace)
from ehwf.single_user import optimal_wastage

import _oracles
from conftest import finite_energy, user_envs


def scenario_1u(harvest, gain=None, bmax=100.0, pmax=100.0):
    harvest = np.asarray(harvest, dtype=float)
    if gain is None:
        gain = np.ones_like(harvest)
    return Scenario(harvest=harvest[None, :], gain=np.asarray(gain, float)[None, :],
                    battery_max=np.array([bmax]), power_max=np.array([pmax]))


def test_cumulative_harvest_values():
    assert cumulative_harvest([1, 2, 3]).tolist() == [1, 3, 6]
    assert cumulative_harvest([0, 0]).tolist() == [0, 0]
    assert cumulative_harvest([5]).tolist() == [5]


def test_battery_trace_values():
    sc = scenario_1u([10, 2])
    assert battery_trace(sc, 0, [4, 4], [3, 0]).tolist() == [3, 1]
    # zero consumption leaves the cumulative harvest
    assert battery_trace(sc, 0, [0, 0], [0, 0]).tolist() == [10, 12]
    assert user_battery_trace([1], [2], [0]).tolist() == [-1]


def test_battery_trace_shape_errors():
    sc = scenario_1u([1, 2])
    with pytest.raises(ValueError):
        battery_trace(sc, 0, [1], [0, 0])
    with pytest.raises(ValueError):
        check_feasible(sc, np.zeros((1, 3)), np.zeros((1, 2)))


def test_check_feasible_greedy_schedule():
    env = UserEnv(np.array([10.0, 2.0]), np.ones(2), 3.0, 4.0)
    d, p, _ = optimal_wastage(env)
    report = check_feasible(Scenario.single_user(env), p[None, :], d[None, :])
    assert report.status == FEASIBLE
    assert report.ok
    assert report.violations == ()


def test_check_feasible_battery_overshoot_is_semi():
    # battery ends at 21 with capacity 20: overshoot only
    sc = scenario_1u([25], bmax=20.0, pmax=15.0)
    report = check_feasible(sc, np.array([[4.0]]), np.array([[0.0]]))
    assert report.status == SEMI_FEASIBLE
    kinds = {v[2] for v in report.violations}
    assert kinds == {"battery-above-cap"}


def test_check_feasible_power_cap_violation():
    sc = scenario_1u([25], bmax=20.0, pmax=15.0)
    report = check_feasible(sc, np.array([[16.0]]), np.array([[0.0]]))
    assert report.status == INFEASIBLE
    assert any(v[2] == "power-above-cap" for v in report.violations)


def test_sum_rate_values():
    assert sum_rate(scenario_1u([5], gain=[1.0]), np.array([[1.0]])) == pytest.approx(math.log(2))
    assert sum_rate(scenario_1u([5, 5]), np.zeros((1, 2))) == 0.0
    sc = Scenario(harvest=np.ones((2, 1)), gain=np.array([[1.0], [2.0]]),
                  battery_max=np.ones(2), power_max=np.ones(2))
    assert sum_rate(sc, np.ones((2, 1))) == pytest.approx(math.log(4))


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(harvest=np.ones((1, 2)), gain=np.ones((1, 3)),
                 battery_max=np.ones(1), power_max=np.ones(1))
    with pytest.raises(ValueError):
        Scenario(harvest=-np.ones((1, 2)), gain=np.ones((1, 2)),
                 battery_max=np.ones(1), power_max=np.ones(1))
    with pytest.raises(ValueError):
        Scenario(harvest=np.ones((1, 2)), gain=np.ones((1, 2)),
                 battery_max=np.zeros(1), power_max=np.ones(1))


def test_scenario_json_round_trip():
    sc = Scenario(harvest=np.array([[1.0, 2.5], [0.0, 4.0]]),
                  gain=np.array([[0.3, 1.0], [2.0, 0.0]]),
                  battery_max=np.array([5.0, 6.0]),
                  power_max=np.array([2.0, np.inf]))
    back = Scenario.from_json(sc.to_json())
    assert np.array_equal(back.harvest, sc.harvest)
    assert np.array_equal(back.gain, sc.gain)
    assert np.array_equal(back.battery_max, sc.battery_max)
    assert np.array_equal(back.power_max, sc.power_max)


@given(st.lists(finite_energy, min_size=1, max_size=10), st.data())
def test_battery_trace_matches_loop_oracle(harvest, data):
    k = len(harvest)
    box = st.floats(min_value=0.0, max_value=30.0)
    p = data.draw(st.lists(box, min_size=k, max_size=k))
    d = data.draw(st.lists(box, min_size=k, max_size=k))
    got = user_battery_trace(harvest, p, d)
    want = _oracles.battery_loop(harvest, p, d)
    assert np.allclose(got, want, atol=1e-9)


@given(st.lists(finite_energy, min_size=1, max_size=8), st.data())
def test_battery_trace_superposition(harvest, data):
    # linear in p: splitting consumption across two schedules adds up
    k = len(harvest)
    box = st.floats(min_value=0.0, max_value=10.0)
    p1 = np.array(data.draw(st.lists(box, min_size=k, max_size=k)))
    p2 = np.array(data.draw(st.lists(box, min_size=k, max_size=k)))
    zero = np.zeros(k)
    lhs = user_battery_trace(harvest, p1 + p2)
    rhs = user_battery_trace(harvest, p1) + user_battery_trace(harvest, p2) \
        - cumulative_harvest(harvest)
    assert np.allclose(lhs, rhs, atol=1e-9)
    assert np.allclose(user_battery_trace(harvest, zero),
                       cumulative_harvest(harvest))


@given(st.data())
def test_sum_rate_concave_and_monotone(data):
    n = data.draw(st.integers(min_value=1, max_value=3))
    k = data.draw(st.integers(min_value=1, max_value=5))
    box = st.floats(min_value=0.0, max_value=10.0)
    draw_mat = lambda: np.array(
        data.draw(st.lists(st.lists(box, min_size=k, max_size=k),
                           min_size=n, max_size=n)))
    gain = draw_mat()
    sc = Scenario(harvest=np.full((n, k), 100.0), gain=gain,
                  battery_max=np.full(n, 100.0), power_max=np.full(n, 100.0))
    p = draw_mat()
    q = draw_mat()
    t = data.draw(st.floats(min_value=0.0, max_value=1.0))
    mix = sum_rate(sc, t * p + (1 - t) * q)
    assert mix >= t * sum_rate(sc, p) + (1 - t) * sum_rate(sc, q) - 1e-12
    # monotone: adding energy anywhere never lowers the rate
    bump = p.copy()
    bump[data.draw(st.integers(0, n - 1)), data.draw(st.integers(0, k - 1))] += 1.0
    assert sum_rate(sc, bump) >= sum_rate(sc, p) - 1e-12


@given(user_envs(max_slots=8, allow_inf_caps=False), st.data())
def test_feasible_implies_battery_in_bounds(env, data):
    # spend a random fraction of the greedy schedule; always feasible
    frac = data.draw(st.floats(min_value=0.0, max_value=1.0))
    d_star, p_greedy, _ = optimal_wastage(env)
    p = frac * p_greedy
    d = _oracles.overflow_wastage_loop(env.harvest, env.battery_max, p)
    sc = Scenario.single_user(env)
    report = check_feasible(sc, p[None, :], np.array(d)[None, :])
    assert report.status == FEASIBLE
    levels = battery_trace(sc, 0, p, d)
    assert (levels >= -1e-9).all()
    assert (levels <= env.battery_max + 1e-9).all()
