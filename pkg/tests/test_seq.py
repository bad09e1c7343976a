import pytest

from idp.errors import InconsistentObservation
from idp.model import (
    JointPrior,
    Offer,
    Outcome,
    TrueIncentives,
    build_model,
    experiment_model,
    uniform_monotone_prior,
)
from idp.oracle import policy_expected_cost
from idp.sim import run_episode
from idp.solvers import (
    DescendPolicy,
    Direction,
    SeqSolver,
    SeqState,
    seq_bound,
    seq_bound_alt,
    solve_finite,
    solve_infinite,
    solve_seq_finite,
    solve_seq_infinite,
)

from .conftest import TOL


class TestSeqBound:
    @pytest.mark.parametrize(
        "model, forward, reverse",
        [
            (build_model([0.5], 2.0, [0.5, 1.0]), 2.0, 3.0),
            (experiment_model(3, 5, 1.0), 7.0, 28 / 3),
            (experiment_model(2, 2, 1.0), 3.5, 3.5),
            (experiment_model(1, 1, 1.0), 1.0, 1.0),
        ],
    )
    def test_slacks(self, model, forward, reverse):
        assert seq_bound(model).slack == pytest.approx(forward)
        assert seq_bound(model).direction is Direction.FORWARD
        assert seq_bound_alt(model).slack == pytest.approx(reverse)
        assert seq_bound_alt(model).direction is Direction.REVERSE

    def test_single_incentive_pays_only_for_actions(self):
        # no incentive spread, so only the action term remains
        assert seq_bound(experiment_model(3, 1, 1.0)).slack == pytest.approx(
            3 * (2.0 - 1 / 3)
        )


class TestSeqSolver:
    @pytest.mark.parametrize("n_incentives", [2, 3, 4])
    def test_single_action_matches_exact(self, priors, n_incentives):
        model = experiment_model(1, n_incentives, 1.0)
        for prior in priors(1, n_incentives):
            for horizon in range(1, 6):
                exact = solve_finite(model, prior, horizon).root
                for direction in Direction:
                    seq = solve_seq_finite(model, prior, horizon, direction)
                    assert seq.root.value == pytest.approx(
                        exact.value, abs=1e-12
                    )
                    assert seq.root.offer == exact.offer

    def test_single_action_infinite_matches_exact(self, small_prior):
        model = build_model([0.5], 2.0, [0.5, 1.0], discount=0.9)
        exact = solve_infinite(model, small_prior).root
        seq = solve_seq_infinite(model, small_prior).root
        assert seq.value == pytest.approx(exact.value, abs=1e-12)

    @pytest.mark.parametrize("n_actions, n_incentives", [(2, 3), (3, 3)])
    @pytest.mark.parametrize("gamma", [0.5, 0.9, 0.99])
    def test_infinite_restriction_never_beats_exact(
        self, priors, n_actions, n_incentives, gamma
    ):
        model = experiment_model(n_actions, n_incentives, 1.0, discount=gamma)
        for prior in priors(n_actions, n_incentives):
            exact = solve_infinite(model, prior).root.value
            for direction in Direction:
                seq = solve_seq_infinite(model, prior, direction)
                assert seq.root.value >= exact - TOL

    def test_myopic_limit_matches_one_step_argmin(self, priors):
        model = experiment_model(2, 3, 1.0, discount=1e-9)
        for prior in priors(2, 3):
            for direction in Direction:
                solver = SeqSolver(model, prior, direction)
                root = solver.root
                a, (_, hi) = root.probe_action, root.probe_range
                costs = {Offer(a, hi): model.pair_cost(a, hi)}
                for move in solver.moves(root):
                    offer = move.offer
                    costs[offer] = move.p_accept * model.pair_cost(
                        offer.action, offer.incentive
                    ) + (1 - move.p_accept) * model.default_cost
                best = min(costs.values())
                # near-ties may be broken either way by the 1e-9 lookahead
                argmins = {o for o, c in costs.items() if c <= best + 1e-6}
                assert solver.solve_infinite().root.offer in argmins

    @pytest.mark.parametrize("n_actions, n_incentives", [(2, 3), (3, 2)])
    def test_restriction_never_beats_exact(
        self, priors, n_actions, n_incentives
    ):
        model = experiment_model(n_actions, n_incentives, 1.0)
        for prior in priors(n_actions, n_incentives):
            for horizon in (1, 3, 5):
                exact = solve_finite(model, prior, horizon).root.value
                for direction in Direction:
                    seq = solve_seq_finite(model, prior, horizon, direction)
                    assert seq.root.value >= exact - TOL

    def test_bounds_hold(self, priors):
        model = experiment_model(2, 3, 1.0)
        for prior in priors(2, 3):
            for horizon in range(1, 7):
                exact = solve_finite(model, prior, horizon).root.value
                forward = solve_seq_finite(model, prior, horizon)
                reverse = solve_seq_finite(
                    model, prior, horizon, Direction.REVERSE
                )
                assert forward.root.value <= (
                    exact + seq_bound(model).slack + TOL
                )
                assert reverse.root.value <= (
                    exact + seq_bound_alt(model).slack + TOL
                )

    def test_planned_value_is_realized(self, priors):
        model = experiment_model(3, 3, 1.0)
        non_markov = JointPrior(3, 3, {(2, 1, 1): 0.5, (1, 1, 0): 0.5})
        for prior in priors(3, 3) + [non_markov]:
            for direction in Direction:
                plan = solve_seq_finite(model, prior, 5, direction)
                realized = policy_expected_cost(
                    model, prior, plan.policy(), 5
                )
                assert realized == pytest.approx(plan.root.value, abs=TOL)

    def test_context_follows_markov_property(self):
        model = experiment_model(3, 3, 1.0)
        assert SeqSolver(model, uniform_monotone_prior(3, 3)).markov
        non_markov = JointPrior(3, 3, {(2, 1, 1): 0.5, (1, 1, 0): 0.5})
        solver = SeqSolver(model, non_markov)
        assert not solver.markov
        # resolving t_1 = 2 then t_2 = 1 keeps both in the context
        state = solver.advance(solver.root, 1, Outcome.REJECT)
        assert state == SeqState(1, (0, 2), (0, 2), (2,))
        state = solver.advance(state, 1, Outcome.ACCEPT)
        state = solver.advance(state, 0, Outcome.REJECT)
        assert state.probe_action == 2
        assert state.context == (2, 1)

    def test_forward_probing_narrows_next_range(self):
        solver = SeqSolver(
            experiment_model(2, 4, 1.0), uniform_monotone_prior(2, 4)
        )
        assert solver.root == SeqState(0, None, (0, 3), ())
        state = solver.advance(solver.root, 1, Outcome.ACCEPT)
        state = solver.advance(state, 0, Outcome.REJECT)
        assert state == SeqState(1, (0, 1), (0, 1), (1,))

    def test_reverse_probing_raises_next_range(self):
        solver = SeqSolver(
            experiment_model(2, 4, 1.0),
            uniform_monotone_prior(2, 4),
            "reverse",
        )
        assert solver.root.probe_action == 1
        state = solver.advance(solver.root, 1, Outcome.REJECT)
        state = solver.advance(state, 2, Outcome.ACCEPT)
        assert state == SeqState(0, (1, 2), (2, 3), (2,))

    def test_state_count(self):
        for n_actions in (1, 2, 3):
            for n_incentives in (2, 3, 4):
                model = experiment_model(n_actions, n_incentives, 1.0)
                prior = uniform_monotone_prior(n_actions, n_incentives)
                plan = solve_seq_finite(model, prior, n_incentives + 2)
                assert plan.n_states <= n_actions**2 * n_incentives**3


class TestSeqPolicy:
    def test_probes_in_cost_order(self):
        model = experiment_model(3, 3, 1.0)
        prior = uniform_monotone_prior(3, 3)
        plan = solve_seq_finite(model, prior, 8)
        assert plan.root.offer.action == 0
        for key in prior.entries:
            policy = plan.policy()
            probed = []
            for h in range(8, 0, -1):
                offer = policy.decide(h)
                if policy.committed is None:
                    probed.append(offer.action)
                policy.observe(
                    Outcome.ACCEPT
                    if offer.incentive >= key[offer.action]
                    else Outcome.REJECT
                )
            assert probed == sorted(probed)

    def test_discounted_plan_and_execution_agree(self, priors):
        model = experiment_model(2, 3, 1.0, discount=0.8)
        for prior in priors(2, 3):
            for direction in Direction:
                plan = solve_seq_infinite(model, prior, direction)
                assert plan.horizon is None
                # the tail beyond 150 steps is below 0.8**150 / 0.2 * 2
                assert policy_expected_cost(
                    model, prior, plan.policy(), 150
                ) == pytest.approx(plan.root.value, abs=1e-9)

    def test_resolved_state_commits_to_best_pair(self):
        model = experiment_model(1, 1, 1.0)
        plan = solve_seq_finite(model, uniform_monotone_prior(1, 1), 3)
        assert plan.solver.root == SeqState(None, (0, 0), None, ())
        policy = plan.policy()
        assert policy.decide(3) == Offer(0, 0)
        assert policy.committed == Offer(0, 0)
        policy.observe(Outcome.ACCEPT)
        assert policy.decide(2) == Offer(0, 0)
        with pytest.raises(InconsistentObservation):
            policy.observe(Outcome.REJECT)


class TestDescendPolicy:
    def test_trace(self, point_mass):
        model = experiment_model(2, 3, 1.0)
        policy = DescendPolicy(model, point_mass(3, (2, 1)))
        trace = run_episode(model, policy, TrueIncentives((2, 1)), 6)
        assert [s.offer for s in trace.steps] == [
            Offer(0, 2),
            Offer(0, 1),
            Offer(1, 1),
            Offer(1, 0),
            Offer(0, 2),
            Offer(0, 2),
        ]
        assert [s.outcome for s in trace.steps[:4]] == [
            Outcome.ACCEPT,
            Outcome.REJECT,
            Outcome.ACCEPT,
            Outcome.REJECT,
        ]

    def test_resolves_within_k_plus_n_steps(self):
        model = experiment_model(3, 4, 1.0)
        prior = uniform_monotone_prior(3, 4)
        for key in prior.entries:
            policy = DescendPolicy(model, prior)
            run_episode(model, policy, TrueIncentives(key), 4 + 3)
            assert policy.ranges.resolved

    def test_respects_forward_bound(self, priors):
        model = experiment_model(2, 3, 1.0)
        slack = seq_bound(model).slack
        for prior in priors(2, 3):
            for horizon in (1, 4, 8):
                exact = solve_finite(model, prior, horizon).root.value
                descend = policy_expected_cost(
                    model, prior, DescendPolicy(model, prior), horizon
                )
                assert exact - TOL <= descend <= exact + slack + TOL
