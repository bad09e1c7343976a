"""
Brute-force references for the planners. These are slow on purpose and
refuse instances above explicit size guards rather than approximate.
"""
import logging
from collections import deque
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from idp.errors import InstanceTooLarge, InvalidHorizon
from idp.model import (
    IdpModel,
    IncentiveRanges,
    JointPrior,
    Offer,
    Outcome,
    TrueIncentives,
    update_ranges,
)
from idp.sim import Decider, run_episode

EXPECTIMAX_MAX_WORK = 10**7  # K^N (N K)^H
FULL_DP_MAX_WORK = 10**7  # nodes * offers * H

History = Tuple[Tuple[Offer, Outcome], ...]
Transition = Tuple[
    Offer, float, Optional[IncentiveRanges], Optional[IncentiveRanges]
]


def history_mask(
    prior: JointPrior, history: Sequence[Tuple[Offer, Outcome]]
) -> np.ndarray:
    """Prior tuples consistent with every `(offer, outcome)` in `history`."""
    mask = np.ones(len(prior), dtype=bool)
    for offer, outcome in history:
        accepts = prior.support[:, offer.action] <= offer.incentive
        mask &= accepts if outcome is Outcome.ACCEPT else ~accepts
    return mask


def _check_horizon(horizon: int) -> None:
    if horizon < 1:
        raise InvalidHorizon(f"Horizon must be >= 1, got {horizon}.")


def expectimax_value(
    model: IdpModel, prior: JointPrior, horizon: int, prune: bool = False
) -> float:
    """
    Optimal expected (discounted) cost by search over raw histories. Every
    node conditions the prior table on its history directly.

    Args:
        model: IDP instance, any discount in `(0, 1]`.
        prior: Prior of the instance.
        horizon: Number of steps.
        prune: Skip offers that are certainly rejected and all but the
            lowest certainly accepted one per action.

    Returns:
        Value of the empty history.

    Raises:
        InstanceTooLarge: if `K^N (N K)^H` exceeds `EXPECTIMAX_MAX_WORK`.
    """
    _check_horizon(horizon)
    n, k = model.n_actions, model.n_incentives
    work = k**n * (n * k) ** horizon
    if work > EXPECTIMAX_MAX_WORK:
        raise InstanceTooLarge(
            f"Expectimax over N={n}, K={k}, H={horizon} needs {work} "
            f"expansions, the guard is {EXPECTIMAX_MAX_WORK}."
        )
    gamma = model.discount

    def search(history: History, h: int) -> float:
        if h == 0:
            return 0.0
        mask = history_mask(prior, history)
        weights = prior.weights[mask]
        support = prior.support[mask]
        best = np.inf
        for action in range(n):
            offers = range(k)
            if prune:
                thresholds = support[weights > 0, action]
                offers = range(thresholds.min(), thresholds.max() + 1)
            for incentive in offers:
                offer = Offer(action, incentive)
                accepts = support[:, action] <= incentive
                acc = weights[accepts].sum()
                rej = weights[~accepts].sum()
                p = acc / (acc + rej)
                q = 0.0
                if acc > 0:
                    q += p * (
                        model.pair_cost(action, incentive)
                        + gamma
                        * search(history + ((offer, Outcome.ACCEPT),), h - 1)
                    )
                if rej > 0:
                    q += (1 - p) * (
                        model.default_cost
                        + gamma
                        * search(history + ((offer, Outcome.REJECT),), h - 1)
                    )
                best = min(best, q)
        return best

    return float(search((), horizon))


def _range_transitions(
    model: IdpModel, prior: JointPrior, ranges: IncentiveRanges
) -> List[Transition]:
    # every offer, including the uninformative ones; a successor is `None`
    # when its branch carries no mass
    box = prior.box_mask(ranges)
    out = []
    for action in range(model.n_actions):
        for incentive in range(model.n_incentives):
            offer = Offer(action, incentive)
            accepts = prior.support[:, action] <= incentive
            acc = prior.weights[box & accepts].sum()
            rej = prior.weights[box & ~accepts].sum()
            out.append(
                (
                    offer,
                    acc / (acc + rej),
                    (
                        update_ranges(ranges, offer, Outcome.ACCEPT)
                        if acc > 0
                        else None
                    ),
                    (
                        update_ranges(ranges, offer, Outcome.REJECT)
                        if rej > 0
                        else None
                    ),
                )
            )
    return out


def full_dp_value(model: IdpModel, prior: JointPrior, horizon: int) -> float:
    """
    Horizon-indexed backward induction over every range node reachable with
    positive probability, with all `N K` offers legal at every step and no
    commit shortcut.

    Raises:
        InstanceTooLarge: if nodes times offers times `H` exceeds
            `FULL_DP_MAX_WORK`.
    """
    _check_horizon(horizon)
    root = IncentiveRanges.full(model.n_actions, model.n_incentives)
    transitions: Dict[IncentiveRanges, List[Transition]] = {}
    queue = deque([root])
    budget = FULL_DP_MAX_WORK // (
        horizon * model.n_actions * model.n_incentives
    )
    while queue:
        ranges = queue.popleft()
        if ranges in transitions:
            continue
        if len(transitions) >= budget:
            raise InstanceTooLarge(
                f"Full DP over N={model.n_actions}, K={model.n_incentives}, "
                f"H={horizon} exceeds the guard of {FULL_DP_MAX_WORK}."
            )
        transitions[ranges] = _range_transitions(model, prior, ranges)
        for _, _, acc, rej in transitions[ranges]:
            for child in (acc, rej):
                if child is not None and child not in transitions:
                    queue.append(child)
    logging.debug(f"full dp: {len(transitions)} reachable nodes")

    gamma = model.discount
    values = {ranges: 0.0 for ranges in transitions}
    for _ in range(horizon):
        new_values = {}
        for ranges, moves in transitions.items():
            best = np.inf
            for offer, p, acc, rej in moves:
                q = 0.0
                if acc is not None:
                    q += p * (
                        model.pair_cost(offer.action, offer.incentive)
                        + gamma * values[acc]
                    )
                if rej is not None:
                    q += (1 - p) * (model.default_cost + gamma * values[rej])
                best = min(best, q)
            new_values[ranges] = best
        values = new_values
    return float(values[root])


def policy_expected_cost(
    model: IdpModel, prior: JointPrior, decider: Decider, horizon: int
) -> float:
    """
    Exact expected cost of a deterministic decider: the prior-weighted sum
    of its episode totals over the support.
    """
    _check_horizon(horizon)
    total = 0.0
    for row, weight in zip(prior.support, prior.weights):
        if weight <= 0:
            continue
        decider.reset(model, prior)
        truth = TrueIncentives(tuple(int(t) for t in row))
        trace = run_episode(model, decider, truth, horizon)
        total += weight * trace.total_cost
    return float(total)
