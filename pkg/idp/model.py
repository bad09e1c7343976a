"""
Incentive decision process instances: the principal's cost ladder, the joint
prior over the agent's hidden thresholds, and belief updating over incentive
ranges.

Belief logic runs on 0-based incentive indices only; money values enter when
costs are accumulated.
"""
import itertools
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import (
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
)

import numpy as np

from idp.errors import EmptySupport, InconsistentObservation, ValidationError

NORM_TOL = 1e-12  # prior and belief normalization
TIE_TOL = 1e-12  # option values this close are ties
MARKOV_TOL = 1e-9

DEFAULT_COST = 2.0

T = TypeVar("T")


class Outcome(Enum):
    """Binary response of the agent to an offer."""

    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class Offer:
    """Incentive index `incentive` offered for alternate action `action`."""

    action: int
    incentive: int

    def __post_init__(self) -> None:
        if self.action < 0 or self.incentive < 0:
            raise ValidationError(
                f"Offer indices must be nonnegative, got {self}."
            )

    def label(self, model: Optional["IdpModel"] = None) -> str:
        """
        Human-readable, 1-based label, e.g. `a1@0.200` (or `a1@d1` without a
        model to look the money value up in).
        """
        if model is None:
            return f"a{self.action + 1}@d{self.incentive + 1}"
        return f"a{self.action + 1}@{model.incentives[self.incentive]:.3f}"


@dataclass(frozen=True)
class IdpModel:
    """
    Environment constants of an incentive decision process.

    Args:
        action_costs: Principal's cost `c_n` of each alternate action,
            strictly increasing.
        default_cost: Cost `c_{N+1}` of the agent's default action.
        incentives: Incentive ladder `delta_k`, strictly increasing.
        discount: Discount factor in `(0, 1]`.
    """

    action_costs: Tuple[float, ...]
    default_cost: float
    incentives: Tuple[float, ...]
    discount: float = 1.0

    def __post_init__(self) -> None:
        costs = tuple(float(c) for c in self.action_costs)
        deltas = tuple(float(d) for d in self.incentives)
        object.__setattr__(self, "action_costs", costs)
        object.__setattr__(self, "incentives", deltas)
        object.__setattr__(self, "default_cost", float(self.default_cost))
        object.__setattr__(self, "discount", float(self.discount))

        if not costs:
            raise ValidationError("`action_costs` must not be empty.")
        if not deltas:
            raise ValidationError("`incentives` must not be empty.")
        if any(a >= b for a, b in zip(costs, costs[1:])):
            raise ValidationError(
                f"`action_costs` must be strictly increasing, got {costs}."
            )
        if any(a >= b for a, b in zip(deltas, deltas[1:])):
            raise ValidationError(
                f"`incentives` must be strictly increasing, got {deltas}."
            )
        # equality is allowed: the experiment ladder has c_N + d_K = c_{N+1}
        if costs[-1] + deltas[-1] > self.default_cost + NORM_TOL:
            raise ValidationError(
                "Highest action cost plus highest incentive must not exceed "
                f"`default_cost`: {costs[-1]} + {deltas[-1]} > "
                f"{self.default_cost}."
            )
        if not 0 < self.discount <= 1:
            raise ValidationError(
                f"`discount` must lie in (0, 1], got {self.discount}."
            )

    @property
    def n_actions(self) -> int:
        return len(self.action_costs)

    @property
    def n_incentives(self) -> int:
        return len(self.incentives)

    def pair_cost(self, action: int, incentive: int) -> float:
        """Principal's cost when the agent takes `action` for `incentive`."""
        return self.action_costs[action] + self.incentives[incentive]

    def step_cost(self, offer: Offer, outcome: Outcome) -> float:
        """
        Immediate cost of one interaction: `delta_k + c_n` on accept and the
        default action's cost on reject.
        """
        if outcome is Outcome.ACCEPT:
            return self.pair_cost(offer.action, offer.incentive)
        return self.default_cost

    def check_offer(self, offer: Offer) -> None:
        if offer.action >= self.n_actions or offer.incentive >= (
            self.n_incentives
        ):
            raise ValidationError(
                f"Offer {offer} out of bounds for N={self.n_actions}, "
                f"K={self.n_incentives}."
            )

    def commit_offer(self, ranges: "IncentiveRanges") -> Tuple[Offer, float]:
        """
        Cheapest guaranteed-accept offer: each action at the top of its
        range.

        Ties go to the lower incentive index, then the lower action index.

        Returns:
            The offer and its per-step cost.
        """
        cost, offer = pick_min(
            ((e, n), self.pair_cost(n, e), Offer(n, e))
            for n, (_, e) in enumerate(ranges.bounds)
        )
        return offer, cost


@dataclass(frozen=True)
class TrueIncentives:
    """Hidden thresholds `t_n` as incentive indices, nonincreasing in n."""

    thresholds: Tuple[int, ...]

    def __post_init__(self) -> None:
        thresholds = tuple(int(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", thresholds)
        if not thresholds or min(thresholds) < 0:
            raise ValidationError(
                f"Thresholds must be nonempty and nonnegative: {thresholds}."
            )
        if any(a < b for a, b in zip(thresholds, thresholds[1:])):
            raise ValidationError(
                f"Thresholds must be nonincreasing, got {thresholds}."
            )


@dataclass(frozen=True)
class IncentiveRanges:
    """
    Per-action index interval `(s_n, e_n)` still consistent with every
    observation; the sufficient statistic of the history.
    """

    bounds: Tuple[Tuple[int, int], ...]

    def __post_init__(self) -> None:
        bounds = tuple((int(s), int(e)) for s, e in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if not bounds:
            raise ValidationError("Incentive ranges must not be empty.")
        for s, e in bounds:
            if not 0 <= s <= e:
                raise ValidationError(f"Invalid incentive range {(s, e)}.")
        for (s_a, e_a), (s_b, e_b) in zip(bounds, bounds[1:]):
            if s_a < s_b or e_a < e_b:
                raise ValidationError(
                    f"Range bounds must be nonincreasing in n: {bounds}."
                )

    @classmethod
    def full(cls, n_actions: int, n_incentives: int) -> "IncentiveRanges":
        return cls(((0, n_incentives - 1),) * n_actions)

    def __len__(self) -> int:
        return len(self.bounds)

    def collapsed(self, action: int) -> bool:
        s, e = self.bounds[action]
        return s == e

    @property
    def resolved(self) -> bool:
        return all(s == e for s, e in self.bounds)


@dataclass(frozen=True, eq=False)
class BeliefVector:
    """Marginal `p^n_{k,S}` over the threshold of one action."""

    action: int
    probs: np.ndarray

    def accept_probability(self, incentive: int) -> float:
        return float(self.probs[: incentive + 1].sum())


class JointPrior:
    """
    Probability table over monotone threshold tuples
    (`t_1 >= t_2 >= ... >= t_N`).

    The table is stored in canonical (lexicographic) tuple order as an
    integer `support` array of shape `(M, N)` and a `weights` array of shape
    `(M,)`.

    Args:
        n_actions: Number of alternate actions `N`.
        n_incentives: Number of incentives `K`.
        entries: Mapping from index tuple to nonnegative weight; weights
            sum to one.
    """

    def __init__(
        self,
        n_actions: int,
        n_incentives: int,
        entries: Mapping[Sequence[int], float],
    ) -> None:
        if n_actions < 1 or n_incentives < 1:
            raise ValidationError(
                f"Prior needs N, K >= 1, got N={n_actions}, K={n_incentives}."
            )
        table: Dict[Tuple[int, ...], float] = {}
        for key, weight in entries.items():
            key = tuple(int(i) for i in key)
            if len(key) != n_actions:
                raise ValidationError(
                    f"Prior tuple {key} does not have N={n_actions} entries."
                )
            if min(key) < 0 or max(key) >= n_incentives:
                raise ValidationError(
                    f"Prior tuple {key} has indices outside [0, "
                    f"{n_incentives - 1}]."
                )
            if any(a < b for a, b in zip(key, key[1:])):
                raise ValidationError(
                    f"Prior tuple {key} is not monotone nonincreasing."
                )
            if not np.isfinite(weight) or weight < 0:
                raise ValidationError(
                    f"Prior weight of {key} must be nonnegative: {weight}."
                )
            table[key] = table.get(key, 0.0) + float(weight)
        if not table:
            raise ValidationError("Prior table must not be empty.")
        total = sum(table.values())
        if abs(total - 1.0) > NORM_TOL:
            raise ValidationError(f"Prior weights sum to {total}, not 1.")

        self.n_actions = n_actions
        self.n_incentives = n_incentives
        keys = sorted(table)
        self.support = np.array(keys, dtype=np.int64).reshape(
            len(keys), n_actions
        )
        self.weights = np.array([table[k] for k in keys], dtype=np.float64)
        self.cumulative = np.cumsum(self.weights)
        self._markov: Dict[Tuple[int, ...], bool] = {}

    def __len__(self) -> int:
        return len(self.weights)

    def __repr__(self) -> str:
        return (
            f"JointPrior(N={self.n_actions}, K={self.n_incentives}, "
            f"{len(self)} tuples)"
        )

    @property
    def entries(self) -> Dict[Tuple[int, ...], float]:
        return {
            tuple(int(i) for i in row): float(w)
            for row, w in zip(self.support, self.weights)
        }

    def to_list(self) -> List[list]:
        """Serializable table `[[[t_1, ..., t_N], weight], ...]`."""
        return [[list(key), w] for key, w in self.entries.items()]

    @classmethod
    def from_list(
        cls, n_actions: int, n_incentives: int, rows: Iterable[Sequence]
    ) -> "JointPrior":
        entries: Dict[Tuple[int, ...], float] = {}
        for key, weight in rows:
            key = tuple(key)
            entries[key] = entries.get(key, 0.0) + float(weight)
        return cls(n_actions, n_incentives, entries)

    def box_mask(self, ranges: IncentiveRanges) -> np.ndarray:
        """Boolean mask of the tuples lying inside the box of `ranges`."""
        check_ranges(self, ranges)
        lo = np.array([s for s, _ in ranges.bounds], dtype=np.int64)
        hi = np.array([e for _, e in ranges.bounds], dtype=np.int64)
        return np.all((self.support >= lo) & (self.support <= hi), axis=1)

    def is_markov(self, order: Sequence[int]) -> bool:
        """
        Whether, probing actions in `order`, each threshold depends on the
        already resolved ones only through the last of them.
        """
        order = tuple(order)
        if order not in self._markov:
            self._markov[order] = self._check_markov(order)
        return self._markov[order]

    def _check_markov(self, order: Tuple[int, ...]) -> bool:
        size = self.n_incentives
        for i in range(2, len(order)):
            prefix_cols = list(order[:i])
            last, target = order[i - 1], order[i]
            by_prefix = defaultdict(lambda: np.zeros(size))
            by_last = defaultdict(lambda: np.zeros(size))
            for row, weight in zip(self.support, self.weights):
                by_prefix[tuple(row[prefix_cols])][row[target]] += weight
                by_last[row[last]][row[target]] += weight
            for prefix, dist in by_prefix.items():
                total = dist.sum()
                if total <= 0:
                    continue
                ref = by_last[prefix[-1]]
                if not np.allclose(
                    dist / total, ref / ref.sum(), rtol=0, atol=MARKOV_TOL
                ):
                    return False
        return True


def pick_min(options: Iterable[Tuple[tuple, float, T]]) -> Tuple[float, T]:
    """
    Minimum-value option among `(key, value, payload)` triples. Values within
    `TIE_TOL` of the minimum tie and the smallest key wins.

    Returns:
        Value and payload of the chosen option.
    """
    options = sorted(options, key=lambda option: option[0])
    assert options, "No options to choose from."
    lowest = min(value for _, value, _ in options)
    for _, value, payload in options:
        if value <= lowest + TIE_TOL:
            return value, payload


def check_ranges(prior: JointPrior, ranges: IncentiveRanges) -> None:
    if len(ranges) != prior.n_actions:
        raise ValidationError(
            f"Ranges cover {len(ranges)} actions, prior has "
            f"{prior.n_actions}."
        )
    if ranges.bounds[0][1] >= prior.n_incentives:
        raise ValidationError(
            f"Ranges {ranges.bounds} exceed K={prior.n_incentives}."
        )


def build_model(
    action_costs: Sequence[float],
    default_cost: float,
    incentives: Sequence[float],
    discount: float = 1.0,
) -> IdpModel:
    return IdpModel(
        action_costs=tuple(action_costs),
        default_cost=default_cost,
        incentives=tuple(incentives),
        discount=discount,
    )


def experiment_model(
    n_actions: int,
    n_incentives: int,
    eta: float,
    default_cost: float = DEFAULT_COST,
    discount: float = 1.0,
) -> IdpModel:
    """
    Model of the simulation study: `c_n = (n/N)**eta`, `delta_k = k/K` and a
    default action costing 2.

    Args:
        n_actions: Number of alternate actions `N`.
        n_incentives: Number of incentives `K`.
        eta: Curvature of the action cost ladder, `> 0`.
        default_cost: Cost of the default action.
        discount: Discount factor.
    """
    if n_actions < 1:
        raise ValidationError(f"`n_actions` must be >= 1, got {n_actions}.")
    if n_incentives < 1:
        raise ValidationError(
            f"`n_incentives` must be >= 1, got {n_incentives}."
        )
    if not eta > 0:
        raise ValidationError(f"`eta` must be > 0, got {eta}.")
    return build_model(
        action_costs=[(n / n_actions) ** eta for n in range(1, n_actions + 1)],
        default_cost=default_cost,
        incentives=[k / n_incentives for k in range(1, n_incentives + 1)],
        discount=discount,
    )


def monotone_tuples(n_actions: int, n_incentives: int) -> List[Tuple[int]]:
    """All `C(K+N-1, N)` nonincreasing index tuples, in canonical order."""
    return sorted(
        tuple(reversed(combo))
        for combo in itertools.combinations_with_replacement(
            range(n_incentives), n_actions
        )
    )


def uniform_monotone_prior(n_actions: int, n_incentives: int) -> JointPrior:
    keys = monotone_tuples(n_actions, n_incentives)
    return JointPrior(
        n_actions, n_incentives, {key: 1.0 / len(keys) for key in keys}
    )


def random_monotone_prior(
    n_actions: int,
    n_incentives: int,
    rng: np.random.Generator,
    concentration: float = 1.0,
) -> JointPrior:
    """Dirichlet draw over all monotone tuples."""
    keys = monotone_tuples(n_actions, n_incentives)
    weights = rng.dirichlet(np.full(len(keys), concentration))
    weights = weights / weights.sum()
    return JointPrior(n_actions, n_incentives, dict(zip(keys, weights)))


def sample_true_incentives(
    prior: JointPrior, rng: np.random.Generator
) -> TrueIncentives:
    """Inverse-CDF draw over the canonically ordered prior table."""
    idx = int(np.searchsorted(prior.cumulative, rng.random(), side="right"))
    # the float cumulative sum may stop just short of one
    idx = min(idx, int(np.flatnonzero(prior.weights > 0)[-1]))
    return TrueIncentives(tuple(int(t) for t in prior.support[idx]))


def belief_matrix(prior: JointPrior, ranges: IncentiveRanges) -> np.ndarray:
    """
    Marginals of all actions inside the box of `ranges`.

    Returns:
        Array of shape `(N, K)`; row n is `p^n_{k,S}`.
    """
    mask = prior.box_mask(ranges)
    weights = prior.weights[mask]
    mass = weights.sum()
    if mass <= 0.0:
        raise EmptySupport(
            f"No prior mass inside the incentive ranges {ranges.bounds}."
        )
    support = prior.support[mask]
    rows = [
        np.bincount(
            support[:, n], weights=weights, minlength=prior.n_incentives
        )
        for n in range(prior.n_actions)
    ]
    return np.stack(rows) / mass


def marginal(
    prior: JointPrior, ranges: IncentiveRanges, action: int
) -> BeliefVector:
    return BeliefVector(
        action=action, probs=belief_matrix(prior, ranges)[action]
    )


def posterior_support_mass(
    prior: JointPrior, ranges: IncentiveRanges
) -> float:
    return float(prior.weights[prior.box_mask(ranges)].sum())


def update_ranges(
    ranges: IncentiveRanges, offer: Offer, outcome: Outcome
) -> IncentiveRanges:
    """
    Intersect the ranges with what an outcome reveals. An accept of `k` for
    `a_n` bounds every `t_m`, `m >= n`, from above by `k`; a reject bounds
    every `t_m`, `m <= n`, from below by `k + 1`.

    Raises:
        InconsistentObservation: if a range would become empty.
    """
    new_bounds = []
    for m, (s, e) in enumerate(ranges.bounds):
        if outcome is Outcome.ACCEPT and m >= offer.action:
            e = min(e, offer.incentive)
        elif outcome is Outcome.REJECT and m <= offer.action:
            s = max(s, offer.incentive + 1)
        if s > e:
            raise InconsistentObservation(
                f"{outcome.value} of {offer.label()} contradicts range "
                f"{ranges.bounds[m]} of action {m}."
            )
        new_bounds.append((s, e))
    return IncentiveRanges(tuple(new_bounds))
