"""
Sequential (SEQ) planning: actions are probed one at a time in cost order,
and an action is only probed once every earlier one is resolved.

A SEQ state is the probed action, the cheapest resolved pair so far, the
probed action's incentive range and the resolved thresholds its belief
depends on. When the probed range collapses the state advances to the next
action at no cost.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from time import perf_counter
from typing import Callable, Dict, Hashable, List, NamedTuple, Optional, Tuple

import numpy as np

from idp.errors import EmptySupport, InconsistentObservation, UnreachableNode
from idp.model import (
    TIE_TOL,
    IdpModel,
    IncentiveRanges,
    JointPrior,
    Offer,
    Outcome,
    pick_min,
    update_ranges,
)
from idp.sim import Decider

from .exact import (
    Move,
    PlanResult,
    check_dims,
    check_finite,
    check_infinite,
)


class Direction(str, Enum):
    FORWARD = "forward"  # a_1 first
    REVERSE = "reverse"  # a_N first


class SeqState(NamedTuple):
    """
    `probe_action` and `probe_range` are `None` once every action is
    resolved; `best` is `(action, incentive)`.
    """

    probe_action: Optional[int]
    best: Optional[Tuple[int, int]]
    probe_range: Optional[Tuple[int, int]]
    context: Tuple[int, ...]


@dataclass(frozen=True)
class SeqBound:
    """Guaranteed gap between the SEQ value and the optimal value."""

    slack: float
    direction: Direction

    def __post_init__(self) -> None:
        assert self.slack >= 0, f"Negative SEQ slack {self.slack}."


def seq_bound(model: IdpModel) -> SeqBound:
    """Slack of forward probing: `sum_k (d_k - d_1) + N (c_{N+1} - c_1)`."""
    deltas = model.incentives
    slack = sum(d - deltas[0] for d in deltas) + model.n_actions * (
        model.default_cost - model.action_costs[0]
    )
    return SeqBound(slack=slack, direction=Direction.FORWARD)


def seq_bound_alt(model: IdpModel) -> SeqBound:
    """Slack of reverse probing: `K (c_{N+1} - c_1) + sum_i (c_N - c_i)`."""
    costs = model.action_costs
    slack = model.n_incentives * (model.default_cost - costs[0]) + sum(
        costs[-1] - c for c in costs
    )
    return SeqBound(slack=slack, direction=Direction.REVERSE)


class SeqSolver:
    """
    Memoized solver of the SEQ-restricted problem for one instance and
    probing direction.

    The belief over the probed threshold is the prior conditioned on the
    probed range and on the resolved thresholds in `context`. When the
    prior is Markov along the probing order the context is the last
    resolved threshold only, otherwise the whole resolved prefix.
    """

    def __init__(
        self,
        model: IdpModel,
        prior: JointPrior,
        direction: Direction = Direction.FORWARD,
    ) -> None:
        check_dims(model, prior)
        self.model = model
        self.prior = prior
        self.direction = Direction(direction)
        actions = range(model.n_actions)
        if self.direction is Direction.REVERSE:
            actions = reversed(actions)
        self.order = tuple(actions)
        self.markov = prior.is_markov(self.order)
        self._position = {a: i for i, a in enumerate(self.order)}
        self._beliefs: Dict[Hashable, np.ndarray] = {}
        self._moves: Dict[SeqState, List[Move]] = {}
        self.root = self._settle(0, None, (0, model.n_incentives - 1), ())

    def _improve(
        self, best: Optional[Tuple[int, int]], action: int, incentive: int
    ) -> Tuple[int, int]:
        if best is None:
            return action, incentive
        new = self.model.pair_cost(action, incentive)
        old = self.model.pair_cost(*best)
        if new < old - TIE_TOL or (new <= old + TIE_TOL and action < best[0]):
            return action, incentive
        return best

    def _settle(
        self,
        position: int,
        best: Optional[Tuple[int, int]],
        probe_range: Tuple[int, int],
        context: Tuple[int, ...],
    ) -> SeqState:
        lo, hi = probe_range
        while lo == hi:
            best = self._improve(best, self.order[position], lo)
            context = (lo,) if self.markov else context + (lo,)
            position += 1
            if position == len(self.order):
                return SeqState(None, best, None, ())
            if self.direction is Direction.FORWARD:
                lo, hi = 0, lo
            else:
                hi = self.model.n_incentives - 1
        return SeqState(self.order[position], best, (lo, hi), context)

    def advance(
        self, state: SeqState, incentive: int, outcome: Outcome
    ) -> SeqState:
        """Successor after probing the probed action at `incentive`."""
        lo, hi = state.probe_range
        assert lo <= incentive < hi, (
            f"Probe {incentive} outside the informative range {(lo, hi)}."
        )
        if outcome is Outcome.ACCEPT:
            probe_range = (lo, incentive)
        else:
            probe_range = (incentive + 1, hi)
        return self._settle(
            self._position[state.probe_action],
            state.best,
            probe_range,
            state.context,
        )

    def belief(self, state: SeqState) -> np.ndarray:
        """Conditional distribution of the probed threshold, shape `(K,)`."""
        key = (state.probe_action, state.probe_range, state.context)
        if key in self._beliefs:
            return self._beliefs[key]
        support = self.prior.support
        action = state.probe_action
        lo, hi = state.probe_range
        mask = (support[:, action] >= lo) & (support[:, action] <= hi)
        if state.context:
            position = self._position[action]
            cols = list(self.order[position - len(state.context) : position])
            mask &= np.all(support[:, cols] == np.array(state.context), axis=1)
        weights = self.prior.weights[mask]
        mass = weights.sum()
        if mass <= 0.0:
            raise EmptySupport(f"No prior mass behind SEQ state {state}.")
        self._beliefs[key] = (
            np.bincount(
                support[mask, action],
                weights=weights,
                minlength=self.model.n_incentives,
            )
            / mass
        )
        return self._beliefs[key]

    def moves(self, state: SeqState) -> List[Move]:
        if state in self._moves:
            return self._moves[state]
        moves = []
        if state.probe_action is not None:
            probs = self.belief(state)
            lo, hi = state.probe_range
            for k in range(lo, hi):
                acc = float(probs[lo : k + 1].sum())
                rej = float(probs[k + 1 : hi + 1].sum())
                moves.append(
                    Move(
                        offer=Offer(state.probe_action, k),
                        p_accept=acc / (acc + rej),
                        accepted=(
                            self.advance(state, k, Outcome.ACCEPT)
                            if acc > 0
                            else None
                        ),
                        rejected=(
                            self.advance(state, k, Outcome.REJECT)
                            if rej > 0
                            else None
                        ),
                    )
                )
        self._moves[state] = moves
        return moves

    def _backup(
        self,
        state: SeqState,
        commit_weight: float,
        discount: float,
        value_of: Callable[[SeqState], float],
    ) -> PlanResult:
        model = self.model
        options = []
        if state.best is not None:
            b, v = state.best
            options.append(
                (
                    (v, b, 1),
                    commit_weight * model.pair_cost(b, v),
                    (Offer(b, v), True),
                )
            )
        if state.probe_action is not None:
            a, (_, hi) = state.probe_action, state.probe_range
            options.append(
                (
                    (hi, a, 1),
                    commit_weight * model.pair_cost(a, hi),
                    (Offer(a, hi), True),
                )
            )
        for move in self.moves(state):
            offer = move.offer
            q = 0.0
            if move.accepted is not None:
                q += move.p_accept * (
                    model.pair_cost(offer.action, offer.incentive)
                    + discount * value_of(move.accepted)
                )
            if move.rejected is not None:
                q += (1 - move.p_accept) * (
                    model.default_cost + discount * value_of(move.rejected)
                )
            options.append(
                ((offer.incentive, offer.action, 0), q, (offer, False))
            )
        value, (offer, is_commit) = pick_min(options)
        return PlanResult(value, offer, is_commit)

    def solve_finite(self, horizon: int) -> "SeqPlan":
        check_finite(self.model, horizon)
        start = perf_counter()
        table: Dict[Hashable, PlanResult] = {}

        def value(state: SeqState, h: int) -> PlanResult:
            key = (state, h)
            if key not in table:
                table[key] = self._backup(
                    state,
                    commit_weight=h,
                    discount=1.0,
                    value_of=lambda child: (
                        0.0 if h == 1 else value(child, h - 1).value
                    ),
                )
            return table[key]

        root = value(self.root, horizon)
        plan = SeqPlan(self, horizon, root, table)
        logging.debug(
            f"seq ({self.direction.value}): H={horizon} solved in "
            f"{perf_counter() - start:.3f} s, {plan.n_states} states, "
            f"{len(table)} table entries"
        )
        return plan

    def solve_infinite(self) -> "SeqPlan":
        check_infinite(self.model)
        start = perf_counter()
        gamma = self.model.discount
        table: Dict[Hashable, PlanResult] = {}

        def value(state: SeqState) -> PlanResult:
            if state not in table:
                table[state] = self._backup(
                    state,
                    commit_weight=1 / (1 - gamma),
                    discount=gamma,
                    value_of=lambda child: value(child).value,
                )
            return table[state]

        root = value(self.root)
        logging.debug(
            f"seq ({self.direction.value}): infinite horizon solved in "
            f"{perf_counter() - start:.3f} s, {len(table)} states"
        )
        return SeqPlan(self, None, root, table)


@dataclass
class SeqPlan:
    solver: SeqSolver
    horizon: Optional[int]
    root: PlanResult
    table: Dict[Hashable, PlanResult]

    @property
    def model(self) -> IdpModel:
        return self.solver.model

    @property
    def prior(self) -> JointPrior:
        return self.solver.prior

    @property
    def n_states(self) -> int:
        """Distinct SEQ states, whatever the remaining horizon."""
        if self.horizon is None:
            return len(self.table)
        return len({state for state, _ in self.table})

    def lookup(self, state: SeqState, remaining_horizon: int) -> PlanResult:
        key = state if self.horizon is None else (state, remaining_horizon)
        try:
            return self.table[key]
        except KeyError:
            raise UnreachableNode(
                f"No solved SEQ state {state} with {remaining_horizon} "
                "steps left."
            ) from None

    def policy(self) -> "SeqPolicy":
        return SeqPolicy(self)


class SeqPolicy(Decider):
    def __init__(self, plan: SeqPlan) -> None:
        self.plan = plan
        self.reset(plan.model, plan.prior)

    def reset(self, model: IdpModel, prior: JointPrior) -> None:
        self.state = self.plan.solver.root
        self._committed: Optional[Offer] = None
        self._last: Optional[Offer] = None

    @property
    def committed(self) -> Optional[Offer]:
        """Offer repeated for the rest of the episode, once chosen."""
        return self._committed

    def decide(self, remaining_horizon: int) -> Offer:
        if self._committed is None:
            result = self.plan.lookup(self.state, remaining_horizon)
            if result.commit:
                self._committed = result.offer
            self._last = result.offer
        return self._last

    def observe(self, outcome: Outcome) -> None:
        if self._committed is not None:
            if outcome is not Outcome.ACCEPT:
                raise InconsistentObservation(
                    f"Committed offer {self._committed.label()} was rejected."
                )
            return
        self.state = self.plan.solver.advance(
            self.state, self._last.incentive, outcome
        )


class DescendPolicy(Decider):
    """
    Constructive SEQ policy: offer the top incentive on a_1, then walk each
    action's incentive down one step at a time until it is rejected, move on
    to the next action one step below the threshold just found, and commit
    to the cheapest pair once every threshold is known. It needs at most
    `K + N` steps to resolve everything.
    """

    def __init__(self, model: IdpModel, prior: JointPrior) -> None:
        self.reset(model, prior)

    def reset(self, model: IdpModel, prior: JointPrior) -> None:
        self.model = model
        self.ranges = IncentiveRanges.full(
            model.n_actions, model.n_incentives
        )
        self._action = 0
        self._started = False
        self._last: Optional[Offer] = None

    def decide(self, remaining_horizon: int) -> Offer:
        if not self._started:
            self._started = True
            self._last = Offer(0, self.ranges.bounds[0][1])
            return self._last
        while self._action < len(self.ranges) and self.ranges.collapsed(
            self._action
        ):
            self._action += 1
        if self._action == len(self.ranges):
            self._last, _ = self.model.commit_offer(self.ranges)
        else:
            _, e = self.ranges.bounds[self._action]
            self._last = Offer(self._action, e - 1)
        return self._last

    def observe(self, outcome: Outcome) -> None:
        self.ranges = update_ranges(self.ranges, self._last, outcome)


def solve_seq_finite(
    model: IdpModel,
    prior: JointPrior,
    horizon: int,
    direction: Direction = Direction.FORWARD,
) -> SeqPlan:
    return SeqSolver(model, prior, direction).solve_finite(horizon)


def solve_seq_infinite(
    model: IdpModel,
    prior: JointPrior,
    direction: Direction = Direction.FORWARD,
) -> SeqPlan:
    return SeqSolver(model, prior, direction).solve_infinite()
