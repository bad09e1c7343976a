import pytest

from idp.baselines import greedy_decide
from idp.errors import (
    DiscountedFiniteUnsupported,
    InvalidHorizon,
    UndiscountedInfinite,
    UnreachableNode,
    ValidationError,
)
from idp.model import (
    IncentiveRanges,
    Offer,
    Outcome,
    TrueIncentives,
    build_model,
    experiment_model,
    posterior_support_mass,
    uniform_monotone_prior,
)
from idp.sim import run_episode
from idp.solvers import (
    ExactSolver,
    enumerate_reachable_states,
    solve_finite,
    solve_infinite,
)

from .conftest import TOL


def perfect_information_cost(model, prior):
    """Expected per-step cost of a principal who knows the thresholds."""
    return sum(
        w * min(model.pair_cost(n, t) for n, t in enumerate(key))
        for key, w in prior.entries.items()
    )


class TestSolveFinite:
    def test_small_instance(self, small_model, small_prior):
        plan = solve_finite(small_model, small_prior, 2)
        assert plan.root.value == pytest.approx(2.75, abs=TOL)
        assert plan.root.offer == Offer(0, 0)
        assert not plan.root.commit
        assert plan.n_states == 3

    def test_one_step_tie_prefers_informative_offer(
        self, small_model, small_prior
    ):
        # probing d_1 and committing to d_2 both cost 1.5
        plan = solve_finite(small_model, small_prior, 1)
        assert plan.root.value == pytest.approx(1.5, abs=TOL)
        assert plan.root.offer == Offer(0, 0)

    @pytest.mark.parametrize("horizon", [1, 5])
    def test_single_incentive(self, horizon):
        model = experiment_model(1, 1, 1.0)
        plan = solve_finite(model, uniform_monotone_prior(1, 1), horizon)
        assert plan.root.value == pytest.approx(2.0 * horizon)
        assert plan.root == (plan.root.value, Offer(0, 0), True)

    def test_single_incentive_picks_cheapest_action(self):
        model = experiment_model(2, 1, 1.0)
        plan = solve_finite(model, uniform_monotone_prior(2, 1), 4)
        assert plan.root.value == pytest.approx(6.0)
        assert plan.root.offer == Offer(0, 0)

    def test_known_thresholds_commit(self, point_mass):
        model = experiment_model(2, 3, 1.0)
        plan = solve_finite(model, point_mass(3, (2, 1)), 6)
        assert plan.root.value == pytest.approx(6 * 1.5)
        assert plan.root.offer == Offer(0, 2)
        assert plan.root.commit

    @pytest.mark.parametrize("n_actions, n_incentives", [(1, 3), (2, 3)])
    def test_value_bounds(self, priors, n_actions, n_incentives):
        model = experiment_model(n_actions, n_incentives, 1.0)
        root = IncentiveRanges.full(n_actions, n_incentives)
        _, commit_cost = model.commit_offer(root)
        for prior in priors(n_actions, n_incentives):
            solver = ExactSolver(model, prior)
            informed = perfect_information_cost(model, prior)
            values = [solver.solve_finite(h).root.value for h in range(1, 7)]
            for h, value in enumerate(values, start=1):
                assert value <= h * commit_cost + TOL
                assert value >= h * informed - TOL
                assert value <= h * model.default_cost + TOL
            for shorter, longer in zip(values, values[1:]):
                assert longer >= shorter - TOL

    def test_accept_probabilities_match_box_masses(self, priors):
        model = experiment_model(2, 4, 1.0)
        for prior in priors(2, 4):
            solver = ExactSolver(model, prior)
            plan = solver.solve_finite(3)
            for ranges in {ranges for ranges, _ in plan.table}:
                mass = posterior_support_mass(prior, ranges)
                for move in solver.moves(ranges):
                    if move.accepted is None:
                        assert move.p_accept == pytest.approx(0.0, abs=1e-12)
                        continue
                    accepted = posterior_support_mass(prior, move.accepted)
                    assert move.p_accept == pytest.approx(
                        accepted / mass, abs=1e-12
                    )

    def test_invalid_horizon(self, small_model, small_prior):
        with pytest.raises(InvalidHorizon):
            solve_finite(small_model, small_prior, 0)

    def test_discounted_finite_rejected(self, small_prior):
        model = build_model([0.5], 2.0, [0.5, 1.0], discount=0.9)
        with pytest.raises(DiscountedFiniteUnsupported):
            solve_finite(model, small_prior, 3)

    def test_dimension_mismatch(self, small_model):
        with pytest.raises(ValidationError):
            solve_finite(small_model, uniform_monotone_prior(2, 2), 1)


class TestSolveInfinite:
    def test_small_instance(self, small_prior):
        model = build_model([0.5], 2.0, [0.5, 1.0], discount=0.9)
        plan = solve_infinite(model, small_prior)
        # collapsed nodes commit: 1.0 / 0.1 and 1.5 / 0.1
        assert plan.root.value == pytest.approx(
            0.5 * (1.0 + 0.9 * 10.0) + 0.5 * (2.0 + 0.9 * 15.0)
        )
        assert plan.root.offer == Offer(0, 0)
        assert plan.horizon is None
        assert plan.n_states == 3

    def test_known_thresholds_commit(self, point_mass):
        model = experiment_model(2, 3, 1.0, discount=0.5)
        plan = solve_infinite(model, point_mass(3, (2, 1)))
        assert plan.root.value == pytest.approx(1.5 / 0.5)
        assert plan.root.commit

    def test_myopic_limit_matches_greedy(self, small_prior):
        model = build_model([0.5], 2.0, [0.5, 1.0], discount=1e-9)
        plan = solve_infinite(model, small_prior)
        root = IncentiveRanges.full(1, 2)
        assert plan.root.offer == greedy_decide(model, small_prior, root)

    def test_undiscounted_rejected(self, small_model, small_prior):
        with pytest.raises(UndiscountedInfinite):
            solve_infinite(small_model, small_prior)


class TestExactPolicy:
    @pytest.mark.parametrize(
        "thresholds, offers, total",
        [
            ((1,), [Offer(0, 0), Offer(0, 1)], 2.0 + 1.5),
            ((0,), [Offer(0, 0), Offer(0, 0)], 1.0 + 1.0),
        ],
    )
    def test_small_instance_traces(
        self, small_model, small_prior, thresholds, offers, total
    ):
        policy = solve_finite(small_model, small_prior, 2).policy()
        trace = run_episode(
            small_model, policy, TrueIncentives(thresholds), 2
        )
        assert [s.offer for s in trace.steps] == offers
        assert trace.total_cost == pytest.approx(total)

    def test_commits_after_reject(self, small_model, small_prior):
        policy = solve_finite(small_model, small_prior, 2).policy()
        assert policy.decide(2) == Offer(0, 0)
        assert policy.committed is None
        policy.observe(Outcome.REJECT)
        assert policy.decide(1) == Offer(0, 1)
        assert policy.committed == Offer(0, 1)

    def test_decisions_depend_on_ranges_only(self):
        model = experiment_model(2, 3, 1.0)
        plan = solve_finite(model, uniform_monotone_prior(2, 3), 4)
        assert not plan.root.commit
        policy = plan.policy()
        offer = policy.decide(4)
        policy.observe(Outcome.ACCEPT)
        clamped = IncentiveRanges.full(2, 3)
        clamped = IncentiveRanges(
            tuple(
                (s, min(e, offer.incentive)) if n >= offer.action else (s, e)
                for n, (s, e) in enumerate(clamped.bounds)
            )
        )
        assert policy.ranges == clamped
        assert policy.decide(3) == plan.lookup(clamped, 3).offer

    def test_reset_restarts_episode(self, small_model, small_prior):
        policy = solve_finite(small_model, small_prior, 2).policy()
        policy.decide(2)
        policy.observe(Outcome.ACCEPT)
        policy.reset(small_model, small_prior)
        assert policy.ranges == IncentiveRanges.full(1, 2)
        assert policy.committed is None

    def test_unsolved_node(self, small_model, small_prior):
        plan = solve_finite(small_model, small_prior, 2)
        with pytest.raises(UnreachableNode):
            plan.lookup(IncentiveRanges(((1, 1),)), 2)


class TestReachableStates:
    @pytest.mark.parametrize("n_incentives", range(1, 9))
    def test_single_action_count(self, n_incentives):
        model = experiment_model(1, n_incentives, 1.0)
        prior = uniform_monotone_prior(1, n_incentives)
        count = enumerate_reachable_states(model, prior)
        assert count == n_incentives * (n_incentives + 1) // 2

    @pytest.mark.parametrize("n_incentives", [2, 3])
    def test_two_action_count(self, n_incentives):
        model = experiment_model(2, n_incentives, 1.0)
        prior = uniform_monotone_prior(2, n_incentives)
        count = enumerate_reachable_states(model, prior)
        assert count <= n_incentives**4
        assert (
            enumerate_reachable_states(model, prior, positive_mass_only=True)
            <= count
        )

    def test_solved_nodes_are_reachable(self, priors):
        model = experiment_model(2, 3, 1.0)
        for prior in priors(2, 3):
            plan = solve_finite(model, prior, 3)
            assert plan.n_states <= enumerate_reachable_states(
                model, prior, positive_mass_only=True
            )
