import math

import numpy as np
import pytest

from rapreduce.errors import BudgetExceeded, InfeasibleInstance
from rapreduce.instances import random_instance
from rapreduce.laminar import solve_gbc, solve_laminar, solve_nested_fast
from rapreduce.model import ConstraintSpec, Domain, ObjectiveSpec, check_feasibility
from rapreduce.oracle import (
    OracleBudget,
    brute_force_integer,
    grid_refine_continuous,
    values_equal,
)
from rapreduce.qbox import solve_qbox_continuous

INF = math.inf
ONES4 = np.ones(4)
ZEROS4 = np.zeros(4)


def gbc_example():
    return ConstraintSpec.gbc([0] * 4, [10] * 4, [[0, 1], [2, 3]], [-INF, -INF], [1, INF], 4)


def nc_example():
    return ConstraintSpec.nested([0] * 3, [3] * 3, [[0]], [-INF], [0.5], 3)


def lc_example():
    return ConstraintSpec.laminar(4, [[0, 1], [0, 1, 2]], [-INF, 3], [1, INF], 4,
                                  [0] * 4, [2] * 4)


# worked examples ----------------------------------------------------------------

@pytest.mark.parametrize("solve", [solve_gbc, solve_laminar], ids=["gbc", "laminar"])
def test_group_example(solve):
    s = solve(ONES4, ZEROS4, gbc_example())
    assert np.allclose(s.x, [0.5, 0.5, 1.5, 1.5], atol=1e-12) and s.certified


@pytest.mark.parametrize("solve", [solve_gbc, solve_laminar], ids=["gbc", "laminar"])
def test_group_example_integer(solve):
    cons = gbc_example()
    s = solve(ONES4, ZEROS4, cons, Domain.INTEGER)
    bf = brute_force_integer(ObjectiveSpec(ONES4, ZEROS4), cons)
    assert s.objective_value == bf.objective_value == 3.0
    assert sorted(s.x[:2]) == [0, 1] and sorted(s.x[2:]) == [1, 2]


def test_group_fully_pinned():
    cons = ConstraintSpec.gbc([-5, -5], [5, 5], [[0], [1]], [2, -1], [2, -1], 1)
    assert np.array_equal(solve_gbc([1, 1], [0, 0], cons).x, [2, -1])
    bad = ConstraintSpec.gbc([-5, -5], [5, 5], [[0], [1]], [2, -1], [2, -1], 3)
    with pytest.raises(InfeasibleInstance):
        solve_gbc([1, 1], [0, 0], bad)


@pytest.mark.parametrize("solve", [solve_laminar, solve_nested_fast],
                         ids=["laminar", "nested-fast"])
def test_chain_example(solve):
    s = solve(np.ones(3), np.zeros(3), nc_example())
    assert np.allclose(s.x, [0.5, 1.25, 1.25], atol=1e-12)
    g = grid_refine_continuous(ObjectiveSpec(np.ones(3), np.zeros(3)), nc_example())
    assert np.allclose(s.x, g.x, atol=1e-5)


def test_laminar_example():
    s = solve_laminar(ONES4, ZEROS4, lc_example())
    assert np.allclose(s.x, [0.5, 0.5, 2, 1], atol=1e-12)
    g = grid_refine_continuous(ObjectiveSpec(ONES4, ZEROS4), lc_example())
    assert np.allclose(s.x, g.x, atol=1e-5)


def test_no_violation_returns_relaxation():
    cons = ConstraintSpec.laminar(3, [[0, 1]], [-INF], [INF], 3, [0] * 3, [3] * 3)
    s = solve_laminar(np.ones(3), np.zeros(3), cons)
    assert np.array_equal(s.x, [1, 1, 1]) and s.info["pins"] == 0


def test_slack_chain_equals_box_solve():
    rng = np.random.default_rng(5)
    a, b = rng.uniform(0.5, 3, 8), rng.uniform(-1, 1, 8)
    l, u = np.zeros(8), np.full(8, 5.0)
    cons = ConstraintSpec.nested_prefix(l, u, [2, 5, 7], [-INF] * 3, [INF] * 3, 12)
    box = solve_qbox_continuous(a, b, l, u, 12)
    assert np.array_equal(solve_nested_fast(a, b, cons).x, box.x)


def test_every_prefix_pinned_telescopes():
    targets = np.array([1.0, 3.0, 3.5, 6.0])
    cons = ConstraintSpec.nested_prefix(np.zeros(5), np.full(5, 9.0), [1, 2, 3, 4],
                                        targets, targets, 10)
    for solve in (solve_nested_fast, solve_laminar):
        x = solve(np.ones(5), np.zeros(5), cons).x
        assert np.allclose(x, [1, 2, 0.5, 2.5, 4], atol=1e-12)


def _vessel_like(n, rng):
    d = rng.uniform(10, 30, n)
    tmin, tmax = d / 20.0, d / 8.0
    prefix_min, prefix_max = np.cumsum(tmin), np.cumsum(tmax)
    mid = (prefix_min + prefix_max) / 2
    A = mid[:-1] - rng.uniform(0, 0.3, n - 1) * (mid[:-1] - prefix_min[:-1])
    D = A + rng.uniform(0, 0.5, n - 1)
    cons = ConstraintSpec.nested_prefix(tmin, tmax, np.arange(1, n), A, D, float(mid[-1]))
    return d, cons


def test_vessel_shaped_paths_agree():
    rng = np.random.default_rng(11)
    for _ in range(30):
        n = int(rng.integers(2, 40))
        d, cons = _vessel_like(n, rng)
        try:
            x1 = solve_nested_fast(d, np.zeros(n), cons).x
        except InfeasibleInstance:
            continue
        x2 = solve_laminar(d, np.zeros(n), cons).x
        assert np.max(np.abs(x1 - x2)) <= 1e-12 * max(1.0, np.max(np.abs(x1)))


# cross-solver agreement ------------------------------------------------------------

@pytest.mark.parametrize("kind", ["gbc", "nested"])
@pytest.mark.parametrize("dom", [Domain.CONTINUOUS, Domain.INTEGER], ids=lambda d: d.value)
def test_specialized_solver_matches_laminar(kind, dom):
    rng = np.random.default_rng(21)
    fast = solve_gbc if kind == "gbc" else solve_nested_fast
    for _ in range(150):
        n = int(rng.integers(2, 30))
        a, b, cons = random_instance(kind, n, rng, dom, m=int(rng.integers(1, n + 1)))
        s1, s2 = fast(a, b, cons, dom), solve_laminar(a, b, cons, dom)
        assert s1.certified and s2.certified
        if dom is Domain.CONTINUOUS:
            assert np.max(np.abs(s1.x - s2.x)) <= 1e-8
        else:
            assert values_equal(s1.objective_value, s2.objective_value)


@pytest.mark.parametrize("kind", ["box", "gbc", "nested", "laminar"])
def test_integer_matches_brute_force(kind):
    rng = np.random.default_rng(31)
    solve = {"gbc": solve_gbc, "nested": solve_nested_fast}.get(kind, solve_laminar)
    checked = 0
    while checked < 60:
        n = int(rng.integers(1, 6))
        a, b, cons = random_instance(kind, n, rng, Domain.INTEGER, m=int(rng.integers(1, n + 2)),
                                     box_width=3)
        try:
            bf = brute_force_integer(ObjectiveSpec(a, b), cons, OracleBudget(max_points=2e5))
        except BudgetExceeded:
            continue
        s = solve(a, b, cons, Domain.INTEGER)
        assert values_equal(s.objective_value, bf.objective_value), (s.x, bf.x)
        checked += 1


def test_pinned_sets_end_tight():
    rng = np.random.default_rng(41)
    for _ in range(100):
        n = int(rng.integers(3, 25))
        a, b, cons = random_instance("laminar", n, rng, m=n)
        s = solve_laminar(a, b, cons)
        assert check_feasibility(cons, s.x).feasible
        # every set is its own subproblem exactly once
        assert s.info["frames"] == cons.m + 1 and s.info["pins"] <= cons.m


def test_continuous_matches_grid_oracle():
    rng = np.random.default_rng(51)
    for t in range(24):
        kind = ["gbc", "nested", "laminar"][t % 3]
        n = int(rng.integers(2, 5))
        a, b, cons = random_instance(kind, n, rng, m=2)
        s = solve_laminar(a, b, cons)
        g = grid_refine_continuous(ObjectiveSpec(a, b), cons)
        assert np.max(np.abs(s.x - g.x)) <= 1e-4
