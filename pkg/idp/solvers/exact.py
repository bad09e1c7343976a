"""
Optimal planning on the belief MDP whose states are incentive ranges.

Every informative offer strictly shrinks some range, so the only way to stay
in a node is to commit to a guaranteed-accept offer. The recursion therefore
runs over a DAG and backs each node up once (once per remaining horizon in
the finite case).
"""
import logging
from collections import deque
from dataclasses import dataclass
from time import perf_counter
from typing import Dict, Hashable, List, NamedTuple, Optional

import numpy as np

from idp.errors import (
    DiscountedFiniteUnsupported,
    InvalidHorizon,
    UndiscountedInfinite,
    UnreachableNode,
    ValidationError,
)
from idp.model import (
    IdpModel,
    IncentiveRanges,
    JointPrior,
    Offer,
    Outcome,
    belief_matrix,
    pick_min,
    posterior_support_mass,
    update_ranges,
)
from idp.sim import Decider


class PlanResult(NamedTuple):
    """Value of a node and the offer attaining it."""

    value: float
    offer: Offer
    commit: bool


class Move(NamedTuple):
    """
    Informative offer with its accept probability and successor nodes; a
    successor is `None` when its branch has probability zero.
    """

    offer: Offer
    p_accept: float
    accepted: Optional[Hashable]
    rejected: Optional[Hashable]


def check_dims(model: IdpModel, prior: JointPrior) -> None:
    if (prior.n_actions, prior.n_incentives) != (
        model.n_actions,
        model.n_incentives,
    ):
        raise ValidationError(
            f"Prior is N={prior.n_actions}, K={prior.n_incentives} but the "
            f"model is N={model.n_actions}, K={model.n_incentives}."
        )


def check_finite(model: IdpModel, horizon: int) -> None:
    if horizon < 1:
        raise InvalidHorizon(f"Horizon must be >= 1, got {horizon}.")
    if model.discount != 1.0:
        raise DiscountedFiniteUnsupported(
            "Finite-horizon planning needs `discount` = 1, got "
            f"{model.discount}; plan the infinite horizon instead."
        )


def check_infinite(model: IdpModel) -> None:
    if model.discount >= 1.0:
        raise UndiscountedInfinite(
            "Infinite-horizon planning needs `discount` < 1."
        )


@dataclass
class ExactPlan:
    """
    Solved table. Finite plans are keyed by `(ranges, remaining horizon)`,
    infinite ones (`horizon is None`) by ranges alone.
    """

    model: IdpModel
    prior: JointPrior
    horizon: Optional[int]
    root: PlanResult
    table: Dict[Hashable, PlanResult]

    @property
    def n_states(self) -> int:
        if self.horizon is None:
            return len(self.table)
        return len({ranges for ranges, _ in self.table})

    def lookup(
        self, ranges: IncentiveRanges, remaining_horizon: int
    ) -> PlanResult:
        key = ranges if self.horizon is None else (ranges, remaining_horizon)
        try:
            return self.table[key]
        except KeyError:
            raise UnreachableNode(
                f"No solved node for ranges {ranges.bounds} with "
                f"{remaining_horizon} steps left."
            ) from None

    def policy(self) -> "ExactPolicy":
        return ExactPolicy(self)


class ExactSolver:
    """
    Memoized solver for one `(model, prior)` instance. Marginals and
    informative moves are cached per range node and shared between solves.
    """

    def __init__(self, model: IdpModel, prior: JointPrior) -> None:
        check_dims(model, prior)
        self.model = model
        self.prior = prior
        self.root = IncentiveRanges.full(model.n_actions, model.n_incentives)
        self._beliefs: Dict[IncentiveRanges, np.ndarray] = {}
        self._moves: Dict[IncentiveRanges, List[Move]] = {}

    def beliefs(self, ranges: IncentiveRanges) -> np.ndarray:
        if ranges not in self._beliefs:
            self._beliefs[ranges] = belief_matrix(self.prior, ranges)
        return self._beliefs[ranges]

    def moves(self, ranges: IncentiveRanges) -> List[Move]:
        """
        Offers `k` in `[s_n, e_n - 1]` for every action; lower offers are
        sure rejects and higher ones are dominated by `e_n`.
        """
        if ranges in self._moves:
            return self._moves[ranges]
        probs = self.beliefs(ranges)
        moves = []
        for n, (s, e) in enumerate(ranges.bounds):
            for k in range(s, e):
                offer = Offer(n, k)
                acc = float(probs[n, s : k + 1].sum())
                rej = float(probs[n, k + 1 : e + 1].sum())
                moves.append(
                    Move(
                        offer=offer,
                        p_accept=acc / (acc + rej),
                        accepted=(
                            update_ranges(ranges, offer, Outcome.ACCEPT)
                            if acc > 0
                            else None
                        ),
                        rejected=(
                            update_ranges(ranges, offer, Outcome.REJECT)
                            if rej > 0
                            else None
                        ),
                    )
                )
        self._moves[ranges] = moves
        return moves

    def solve_finite(self, horizon: int) -> ExactPlan:
        check_finite(self.model, horizon)
        start = perf_counter()
        table: Dict[Hashable, PlanResult] = {}
        root = self._finite(self.root, horizon, table)
        logging.debug(
            f"exact: H={horizon} solved in {perf_counter() - start:.3f} s, "
            f"{len(table)} table entries, {len(self._beliefs)} nodes"
        )
        return ExactPlan(self.model, self.prior, horizon, root, table)

    def solve_infinite(self) -> ExactPlan:
        check_infinite(self.model)
        start = perf_counter()
        table: Dict[Hashable, PlanResult] = {}
        root = self._infinite(self.root, table)
        logging.debug(
            f"exact: infinite horizon solved in "
            f"{perf_counter() - start:.3f} s, {len(table)} nodes"
        )
        return ExactPlan(self.model, self.prior, None, root, table)

    def _finite(
        self,
        ranges: IncentiveRanges,
        h: int,
        table: Dict[Hashable, PlanResult],
    ) -> PlanResult:
        key = (ranges, h)
        if key in table:
            return table[key]

        def value(child: IncentiveRanges) -> float:
            return 0.0 if h == 1 else self._finite(child, h - 1, table).value

        model = self.model
        commit, commit_cost = model.commit_offer(ranges)
        options = [
            (
                (commit.incentive, commit.action, 1),
                h * commit_cost,
                (commit, True),
            )
        ]
        for move in self.moves(ranges):
            offer = move.offer
            q = 0.0
            if move.accepted is not None:
                q += move.p_accept * (
                    model.pair_cost(offer.action, offer.incentive)
                    + value(move.accepted)
                )
            if move.rejected is not None:
                q += (1 - move.p_accept) * (
                    model.default_cost + value(move.rejected)
                )
            options.append(
                ((offer.incentive, offer.action, 0), q, (offer, False))
            )

        best, (offer, is_commit) = pick_min(options)
        table[key] = PlanResult(best, offer, is_commit)
        return table[key]

    def _infinite(
        self, ranges: IncentiveRanges, table: Dict[Hashable, PlanResult]
    ) -> PlanResult:
        if ranges in table:
            return table[ranges]

        model = self.model
        gamma = model.discount
        commit, commit_cost = model.commit_offer(ranges)
        options = [
            (
                (commit.incentive, commit.action, 1),
                commit_cost / (1 - gamma),
                (commit, True),
            )
        ]
        for move in self.moves(ranges):
            offer = move.offer
            q = 0.0
            if move.accepted is not None:
                q += move.p_accept * (
                    model.pair_cost(offer.action, offer.incentive)
                    + gamma * self._infinite(move.accepted, table).value
                )
            if move.rejected is not None:
                q += (1 - move.p_accept) * (
                    model.default_cost
                    + gamma * self._infinite(move.rejected, table).value
                )
            options.append(
                ((offer.incentive, offer.action, 0), q, (offer, False))
            )

        best, (offer, is_commit) = pick_min(options)
        table[ranges] = PlanResult(best, offer, is_commit)
        return table[ranges]


class ExactPolicy(Decider):
    """Executes a solved `ExactPlan`; keeps only the current ranges."""

    def __init__(self, plan: ExactPlan) -> None:
        self.plan = plan
        self.reset(plan.model, plan.prior)

    def reset(self, model: IdpModel, prior: JointPrior) -> None:
        self.ranges = IncentiveRanges.full(
            model.n_actions, model.n_incentives
        )
        self._committed: Optional[Offer] = None
        self._last: Optional[Offer] = None

    @property
    def committed(self) -> Optional[Offer]:
        """Offer repeated for the rest of the episode, once chosen."""
        return self._committed

    def decide(self, remaining_horizon: int) -> Offer:
        if self._committed is None:
            result = self.plan.lookup(self.ranges, remaining_horizon)
            if result.commit:
                self._committed = result.offer
            self._last = result.offer
        return self._last

    def observe(self, outcome: Outcome) -> None:
        self.ranges = update_ranges(self.ranges, self._last, outcome)


def solve_finite(
    model: IdpModel, prior: JointPrior, horizon: int
) -> ExactPlan:
    return ExactSolver(model, prior).solve_finite(horizon)


def solve_infinite(model: IdpModel, prior: JointPrior) -> ExactPlan:
    return ExactSolver(model, prior).solve_infinite()


def enumerate_reachable_states(
    model: IdpModel, prior: JointPrior, positive_mass_only: bool = False
) -> int:
    """
    Breadth-first closure of the range updates over all informative offers,
    starting from the full ranges.

    Args:
        model: IDP instance.
        prior: Prior of the instance.
        positive_mass_only: Only follow successors the prior gives positive
            probability.

    Returns:
        Number of distinct range nodes.
    """
    check_dims(model, prior)
    root = IncentiveRanges.full(model.n_actions, model.n_incentives)
    seen = {root}
    queue = deque([root])
    while queue:
        ranges = queue.popleft()
        for n, (s, e) in enumerate(ranges.bounds):
            for k in range(s, e):
                for outcome in Outcome:
                    child = update_ranges(ranges, Offer(n, k), outcome)
                    if child in seen:
                        continue
                    if (
                        positive_mass_only
                        and posterior_support_mass(prior, child) <= 0
                    ):
                        continue
                    seen.add(child)
                    queue.append(child)
    return len(seen)
