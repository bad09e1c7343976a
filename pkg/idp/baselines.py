"""
Comparison policies: one-step greedy, diagnose-and-act and commit-forever.
"""
from typing import Optional

import numpy as np

from idp.model import (
    IdpModel,
    IncentiveRanges,
    JointPrior,
    Offer,
    Outcome,
    belief_matrix,
    pick_min,
    update_ranges,
)
from idp.sim import Decider


def greedy_decide(
    model: IdpModel, prior: JointPrior, ranges: IncentiveRanges
) -> Offer:
    """
    Offer with the lowest expected immediate cost.

    The cost of offering `k` for `a_n` is
    `P(t_n <= k) (d_k + c_n) + P(t_n > k) c_{N+1}`, considered for
    `k` in `[s_n, e_n]`. Ties go to the lower incentive index, then the
    lower action index.

    Args:
        model: IDP instance.
        prior: Prior of the instance.
        ranges: Current incentive ranges.

    Returns:
        The greedy offer.
    """
    cum = np.cumsum(belief_matrix(prior, ranges), axis=1)  # `(N, K)`
    pair = np.add.outer(
        np.asarray(model.action_costs), np.asarray(model.incentives)
    )
    cost = cum * pair + (1 - cum) * model.default_cost
    _, offer = pick_min(
        ((k, n), float(cost[n, k]), Offer(n, k))
        for n, (s, e) in enumerate(ranges.bounds)
        for k in range(s, e + 1)
    )
    return offer


class GreedyPolicy(Decider):
    def __init__(self, model: IdpModel, prior: JointPrior) -> None:
        self.reset(model, prior)

    def reset(self, model: IdpModel, prior: JointPrior) -> None:
        self.model = model
        self.prior = prior
        self.ranges = IncentiveRanges.full(
            model.n_actions, model.n_incentives
        )
        self._last: Optional[Offer] = None

    def decide(self, remaining_horizon: int) -> Offer:
        self._last = greedy_decide(self.model, self.prior, self.ranges)
        return self._last

    def observe(self, outcome: Outcome) -> None:
        self.ranges = update_ranges(self.ranges, self._last, outcome)


class DaaPolicy(Decider):
    """
    Diagnose-and-act: binary search for every threshold in action order,
    then offer the cheapest resolved pair forever.

    The search offers the floor midpoint of the current range. Outcomes
    update all ranges, so a later action's search may start narrowed, and
    actions whose range has already collapsed are skipped.
    """

    def __init__(self, model: IdpModel, prior: JointPrior) -> None:
        self.reset(model, prior)

    def reset(self, model: IdpModel, prior: JointPrior) -> None:
        self.model = model
        self.ranges = IncentiveRanges.full(
            model.n_actions, model.n_incentives
        )
        self._action = 0
        self._last: Optional[Offer] = None

    @property
    def acting(self) -> bool:
        return self.ranges.resolved

    def decide(self, remaining_horizon: int) -> Offer:
        if self.acting:
            self._last, _ = self.model.commit_offer(self.ranges)
            return self._last
        while self.ranges.collapsed(self._action):
            self._action += 1
        lo, hi = self.ranges.bounds[self._action]
        self._last = Offer(self._action, (lo + hi) // 2)
        return self._last

    def observe(self, outcome: Outcome) -> None:
        self.ranges = update_ranges(self.ranges, self._last, outcome)


class CommitPolicy(Decider):
    """Makes the same offer at every step."""

    def __init__(self, offer: Offer) -> None:
        self.offer = offer

    def reset(self, model: IdpModel, prior: JointPrior) -> None:
        model.check_offer(self.offer)

    def decide(self, remaining_horizon: int) -> Offer:
        return self.offer

    def observe(self, outcome: Outcome) -> None:
        pass
