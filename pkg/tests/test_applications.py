import math

import numpy as np
import pytest
from conftest import random_route, random_storage, random_tasks

from rapreduce.applications import (
    APPS,
    RouteSpec,
    StorageSpec,
    TaskSpec,
    channel_power_to_rap,
    mse_power_to_rap,
    recover,
    solve_app,
    speedscale_to_rap,
    storage_to_rap,
    stratified_to_rap,
    vessel_to_rap,
)
from rapreduce.errors import DomainViolation, InfeasibleInstance
from rapreduce.model import Domain, ObjectiveSpec, verify_condition1
from rapreduce.oracle import brute_force_integer, grid_refine_continuous
from rapreduce.reduction import ABS, perspective, threshold


def cubic_cost(weights):
    return ObjectiveSpec(weights, np.zeros(len(weights)),
                         perspective(lambda s: s ** 3, lambda s: 3 * s ** 2, "cubic"))


def square_cost(weights):
    return ObjectiveSpec(weights, np.zeros(len(weights)),
                         perspective(lambda s: s ** 2, lambda s: 2 * s, "square"))


# channel power -------------------------------------------------------------------

def test_channel_identical_split():
    sol, rep = solve_app(channel_power_to_rap([1, 1], [2, 2], 6))
    assert np.allclose(sol.x, [3, 3], atol=1e-12)
    assert math.isclose(rep["capacity"], 2 * math.log(7))


def test_channel_water_filling_against_grid():
    prob = channel_power_to_rap([1, 1], [50, 0.5], 2, [10, 10])
    sol, _ = solve_app(prob)
    g = grid_refine_continuous(prob.objective, prob.constraints)
    assert np.max(np.abs(sol.x - g.x)) <= 1e-4
    # water level: x_i + 1/c_i is equal on active channels
    if np.all(sol.x > 1e-9):
        assert math.isclose(sol.x[0] + 1 / 50, sol.x[1] + 1 / 0.5, rel_tol=1e-9)
    else:
        assert sol.x[1] == 0


def test_channel_budget_above_caps():
    with pytest.raises(InfeasibleInstance):
        solve_app(channel_power_to_rap([1, 1], [1, 1], 5, [1, 1]))


# mean square error ---------------------------------------------------------------

def test_mse_symmetric():
    sol, rep = solve_app(mse_power_to_rap([1, 1], [1, 1], [1, 1], 2))
    assert np.allclose(sol.x, [1, 1], atol=1e-12) and math.isclose(rep["total_error"], 1.0)


def test_mse_scaling_identity():
    prob = mse_power_to_rap([4], [1], [2], 1)
    assert prob.objective.a[0] == 2 and prob.objective.b[0] == 1
    assert math.isclose(prob.objective.terms(np.array([1.0]))[0], 4 / 3)


def test_mse_asymmetric_against_grid():
    prob = mse_power_to_rap([3, 1], [1, 2], [0.5, 1], 4, [4, 4])
    sol, _ = solve_app(prob)
    g = grid_refine_continuous(prob.objective, prob.constraints)
    assert np.max(np.abs(sol.x - g.x)) <= 1e-4


# storage ---------------------------------------------------------------------------

def test_storage_zero_profile():
    spec = StorageSpec([0, 0, 0], 1.0, 10, 5, 5, -5, 5)
    sol, rep = solve_app(storage_to_rap(spec))
    assert np.allclose(sol.x, 0, atol=1e-12) and rep["feasible"]


def test_storage_two_intervals_flatten():
    spec = StorageSpec([2, 0], 1.0, 10, 5, 5, -10, 10)
    prob = storage_to_rap(spec)
    sol, rep = solve_app(prob)
    assert np.allclose(sol.x, [-1, 1], atol=1e-12)
    assert np.allclose(rep["load"], [1, 1], atol=1e-12)
    g = grid_refine_continuous(prob.objective, prob.constraints)
    assert np.max(np.abs(sol.x - g.x)) <= 1e-4
    for f in (ABS, threshold(1.5)):
        obj = prob.objective.with_function(f)
        assert verify_condition1(obj, prob.constraints, sol.x).optimal


def test_storage_objective_tags():
    base = dict(p=[3, 1, 4, 1], dt=0.5, capacity=4, S_start=1, S_end=2, X_min=-4, X_max=4)
    xs = [solve_app(storage_to_rap(StorageSpec(**base, objective=o, M=2)))[0].x
          for o in ("flatten", "autarky", "peak")]
    # every objective is solved through the same quadratic instance
    assert np.array_equal(xs[0], xs[1]) and np.array_equal(xs[0], xs[2])


def test_storage_flatten_certifies_under_other_objectives():
    rng = np.random.default_rng(0)
    for _ in range(15):
        spec = random_storage(rng)
        prob = storage_to_rap(spec)
        sol, rep = solve_app(prob)
        assert rep["feasible"]
        for f in (ABS, threshold(spec.M)):
            assert verify_condition1(prob.objective.with_function(f), prob.constraints,
                                     sol.x).optimal


def test_storage_rejects_bad_levels():
    with pytest.raises(ValueError):
        StorageSpec([1], 1.0, 5, 6, 1, -1, 1)


# stratified sampling ---------------------------------------------------------------

def test_strata_equal_split():
    sol, rep = solve_app(stratified_to_rap([100, 100], [2, 2], 10))
    assert sol.x.tolist() == [5, 5] and rep["samples"] == [5, 5]


def test_strata_square_root_allocation():
    prob = stratified_to_rap([20, 10], [0.01, 0.01], 3)
    sol, rep = solve_app(prob)
    assert rep["samples"] == [2, 1]
    assert brute_force_integer(prob.objective, prob.constraints).x.tolist() == [2, 1]


def test_strata_zero_variance_pinned():
    prob = stratified_to_rap([10, 10, 10], [1, 0, 4], 9, lo=[1, 2, 1])
    assert prob.constraints.n == 2 and prob.constraints.R == 7
    sol, rep = solve_app(prob)
    assert rep["samples"][1] == 2 and sum(rep["samples"]) == 9 and rep["feasible"]


def test_strata_needs_one_sample():
    with pytest.raises(DomainViolation):
        stratified_to_rap([10, 10], [1, 1], 5, lo=[0, 1])


# vessel speed -----------------------------------------------------------------------

def test_vessel_constant_speed_without_binding_windows():
    route = RouteSpec([50, 50, 50], [0, 0], [100, 100], 0, 15, 5, 20)
    sol, rep = solve_app(vessel_to_rap(route))
    assert np.allclose(rep["speed"], 10, rtol=1e-12)
    assert rep["windows_met"] and rep["on_time"] and rep["speed_limits_met"]


def test_vessel_tight_early_window():
    route = RouteSpec([30, 30, 30], [2, 0], [2, 100], 0, 11, 5, 20)
    prob = vessel_to_rap(route)
    sol, rep = solve_app(prob)
    assert math.isclose(rep["arrival"][1], 2, abs_tol=1e-9)
    assert math.isclose(rep["speed"][1], rep["speed"][2], rel_tol=1e-12)
    assert math.isclose(rep["speed"][1], 60 / 9, rel_tol=1e-12)
    assert 0 in sol.tight_sets
    g = grid_refine_continuous(prob.objective, prob.constraints)
    assert np.max(np.abs(sol.x - g.x)) <= 1e-4


def test_vessel_too_little_time():
    route = RouteSpec([100, 100], [0], [50], 0, 5, 5, 20)
    with pytest.raises(InfeasibleInstance):
        solve_app(vessel_to_rap(route))


def test_vessel_random_routes():
    rng = np.random.default_rng(1)
    for _ in range(15):
        route = random_route(rng)
        prob = vessel_to_rap(route)
        sol, rep = solve_app(prob)
        assert rep["windows_met"] and rep["speed_limits_met"] and rep["on_time"]
        for cost in (cubic_cost, square_cost):
            assert verify_condition1(cost(route.d), prob.constraints, sol.x).optimal


# speed scaling ----------------------------------------------------------------------

def test_speed_single_task_uses_whole_horizon():
    sol, rep = solve_app(speedscale_to_rap(TaskSpec([6], [0], [3], 10)))
    assert sol.x.tolist() == [3.0] and rep["speed"] == [2.0]


def test_speed_identical_tasks_share_time():
    sol, rep = solve_app(speedscale_to_rap(TaskSpec([4, 4], [0, 0], [10, 10], 10)))
    assert np.allclose(sol.x, [5, 5], atol=1e-12) and rep["deadlines_met"]


def test_speed_task_too_large():
    with pytest.raises(InfeasibleInstance):
        solve_app(speedscale_to_rap(TaskSpec([10, 1], [0, 0], [1, 5], 2)))


def test_speed_rejects_crossing_deadlines():
    with pytest.raises(ValueError):
        TaskSpec([1, 1], [0, 1], [5, 4], 2)


def test_speed_random_task_sets():
    rng = np.random.default_rng(2)
    for _ in range(15):
        tasks = random_tasks(rng)
        prob = speedscale_to_rap(tasks)
        sol, rep = solve_app(prob)
        assert rep["deadlines_met"] and rep["arrivals_met"] and rep["speed_limit_met"]
        assert verify_condition1(cubic_cost(tasks.w), prob.constraints, sol.x).optimal


def test_recover_known_apps():
    assert set(APPS) == {"channel", "mse", "storage", "strata", "vessel", "speed"}
    rep = recover("channel", {"B": [1], "c": [1]}, [math.e - 1])
    assert math.isclose(rep["capacity"], 1.0)
    with pytest.raises(KeyError):
        recover("routing", {}, [1])


def test_integer_domain_tag():
    assert stratified_to_rap([5, 5], [1, 1], 4).domain is Domain.INTEGER
