"""
Long-running checks of the planners against the oracles and of the
experiment trends. Deselect with `-m "not slow"`.
"""
from math import sqrt

import numpy as np
import pytest

from idp.model import experiment_model, random_monotone_prior
from idp.model import uniform_monotone_prior as uniform
from idp.oracle import expectimax_value, policy_expected_cost
from idp.sim import bench_planning, monte_carlo
from idp.solvers import (
    DescendPolicy,
    Direction,
    ExactSolver,
    SeqSolver,
    seq_bound,
    seq_bound_alt,
)
from idp.utils import select_algorithms

from .conftest import TOL

pytestmark = pytest.mark.slow


def prior_grid(n_actions, n_incentives, n_random):
    rng = np.random.default_rng(97 * n_actions + n_incentives)
    return [uniform(n_actions, n_incentives)] + [
        random_monotone_prior(n_actions, n_incentives, rng)
        for _ in range(n_random)
    ]


def pooled_stderr(*stats):
    return sqrt(sum(s.run_stderr**2 for s in stats))


def mc(model, prior, algorithm, horizon, runs=1000, rounds=10):
    planner = select_algorithms([algorithm])[algorithm]
    return monte_carlo(
        model,
        prior,
        planner(model, prior, horizon),
        horizon,
        runs=runs,
        rounds=rounds,
        seed=0,
    )


@pytest.mark.parametrize(
    "n_actions, n_incentives",
    [(1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4)],
)
def test_exact_matches_expectimax(n_actions, n_incentives):
    model = experiment_model(n_actions, n_incentives, 1.0)
    for prior in prior_grid(n_actions, n_incentives, 20):
        solver = ExactSolver(model, prior)
        for h in range(1, 5):
            plan = solver.solve_finite(h)
            reference = expectimax_value(model, prior, h, prune=True)
            assert plan.root.value == pytest.approx(reference, abs=TOL)
            realized = policy_expected_cost(model, prior, plan.policy(), h)
            assert realized == pytest.approx(plan.root.value, abs=TOL)


def test_monte_carlo_matches_planned_value():
    model = experiment_model(2, 3, 1.0)
    for prior in prior_grid(2, 3, 3):
        plan = ExactSolver(model, prior).solve_finite(4)
        stats = monte_carlo(model, prior, plan.policy, 4, 10_000, 1, seed=2)
        assert abs(stats.grand_mean - plan.root.value) <= (
            4 * stats.run_stderr
        )


@pytest.mark.parametrize("n_actions", [1, 2, 3])
@pytest.mark.parametrize("n_incentives", [2, 3, 4])
def test_seq_bounds(n_actions, n_incentives):
    model = experiment_model(n_actions, n_incentives, 1.0)
    forward, reverse = seq_bound(model).slack, seq_bound_alt(model).slack
    for prior in prior_grid(n_actions, n_incentives, 2):
        exact = ExactSolver(model, prior)
        seq = SeqSolver(model, prior)
        seq_reverse = SeqSolver(model, prior, Direction.REVERSE)
        for h in range(1, 11):
            optimal = exact.solve_finite(h).root.value
            gap = seq.solve_finite(h).root.value - optimal
            gap_reverse = seq_reverse.solve_finite(h).root.value - optimal
            assert -TOL <= gap <= forward + TOL
            assert -TOL <= gap_reverse <= reverse + TOL
            descend = policy_expected_cost(
                model, prior, DescendPolicy(model, prior), h
            )
            assert -TOL <= descend - optimal <= forward + TOL


def test_three_actions_five_incentives_trends():
    model, prior = experiment_model(3, 5, 1.0), uniform(3, 5)

    exact = mc(model, prior, "exact", 1)
    greedy = mc(model, prior, "greedy", 1)
    assert greedy.grand_mean <= 1.02 * exact.grand_mean

    exact, greedy, daa = (
        mc(model, prior, name, 20) for name in ("exact", "greedy", "daa")
    )
    for other in (greedy, daa):
        gap = other.grand_mean - exact.grand_mean
        assert gap >= 3 * pooled_stderr(exact, other)

    exact_solver = ExactSolver(model, prior)
    seq_solver = SeqSolver(model, prior)
    for h in range(1, 21):
        optimal = exact_solver.solve_finite(h).root.value
        assert seq_solver.solve_finite(h).root.value <= 1.02 * optimal
        exact, seq = (mc(model, prior, name, h) for name in ("exact", "seq"))
        assert seq.grand_mean <= 1.02 * exact.grand_mean


def test_five_actions_three_incentives_trends():
    model, prior = experiment_model(5, 3, 1.0), uniform(5, 3)
    seq = mc(model, prior, "seq", 20)
    for name in ("greedy", "daa"):
        other = mc(model, prior, name, 20)
        gap = other.grand_mean - seq.grand_mean
        assert gap >= 3 * pooled_stderr(seq, other)

    optimal = ExactSolver(model, prior).solve_finite(20).root.value
    restricted = SeqSolver(model, prior).solve_finite(20)
    assert restricted.root.value <= 1.05 * optimal
    assert restricted.root.value <= optimal + seq_bound(model).slack


def test_planning_time_trends():
    grid = [(experiment_model(n, 4, 1.0), uniform(n, 4)) for n in (3, 4, 5)]
    rows = bench_planning(
        grid, select_algorithms(["exact", "seq"]), horizon=20, repeats=5
    )
    times = {(r.algorithm, r.n_actions): r.median_plan_time_ms for r in rows}
    assert times["seq", 5] < times["exact", 5]
    ratios = [times["exact", n] / times["seq", n] for n in (3, 4, 5)]
    assert ratios == sorted(ratios)
