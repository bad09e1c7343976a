"""
Agent response model, episode execution, the seeded Monte Carlo harness and
planning-time benchmarks.
"""
import logging
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import sqrt
from time import perf_counter
from typing import Callable, Dict, Iterable, List, Mapping, Tuple

import numpy as np

from idp.errors import ValidationError
from idp.model import (
    IdpModel,
    JointPrior,
    Offer,
    Outcome,
    TrueIncentives,
    sample_true_incentives,
)

MIN_REPEATS = 5  # timed repetitions behind every benchmark median


class Decider(ABC):
    """
    Stateful policy driven step by step by `run_episode`.

    `decide` must be deterministic given the outcomes observed since the
    last `reset`.
    """

    @abstractmethod
    def reset(self, model: IdpModel, prior: JointPrior) -> None:
        """Forget the episode so far."""

    @abstractmethod
    def decide(self, remaining_horizon: int) -> Offer:
        """Offer to make with `remaining_horizon` steps left (this one too)."""

    @abstractmethod
    def observe(self, outcome: Outcome) -> None:
        """Agent's response to the offer returned by the last `decide`."""


DeciderFactory = Callable[[], Decider]
Planner = Callable[[IdpModel, JointPrior, int], DeciderFactory]


@dataclass(frozen=True)
class Step:
    step: int
    offer: Offer
    outcome: Outcome
    cost: float


@dataclass
class EpisodeTrace:
    steps: List[Step] = field(default_factory=list)
    total_cost: float = 0.0

    def to_rows(self, model: IdpModel) -> List[dict]:
        return [
            {
                "step": s.step,
                "action": s.offer.action,
                "incentive": s.offer.incentive,
                "incentive_value": model.incentives[s.offer.incentive],
                "outcome": s.outcome.value,
                "cost": s.cost,
            }
            for s in self.steps
        ]


@dataclass(frozen=True)
class McStats:
    """
    Summary of `rounds` rounds of `runs` episodes each.

    `std` is taken across round means, `run_std` across all episodes.
    """

    round_means: Tuple[float, ...]
    grand_mean: float
    std: float
    run_std: float
    runs: int
    rounds: int
    seed: int

    @property
    def stderr(self) -> float:
        return self.std / sqrt(self.rounds)

    @property
    def run_stderr(self) -> float:
        return self.run_std / sqrt(self.runs * self.rounds)


@dataclass(frozen=True)
class BenchRow:
    algorithm: str
    n_actions: int
    n_incentives: int
    median_plan_time_ms: float


def respond(true_incentives: TrueIncentives, offer: Offer) -> Outcome:
    """The myopic agent accepts any incentive at or above its threshold."""
    if offer.incentive >= true_incentives.thresholds[offer.action]:
        return Outcome.ACCEPT
    return Outcome.REJECT


def run_episode(
    model: IdpModel,
    decider: Decider,
    true_incentives: TrueIncentives,
    horizon: int,
) -> EpisodeTrace:
    """
    Play `horizon` rounds of decide, respond and observe. The decider must
    have been reset beforehand.
    """
    trace = EpisodeTrace()
    for step in range(horizon):
        offer = decider.decide(horizon - step)
        model.check_offer(offer)
        outcome = respond(true_incentives, offer)
        cost = model.step_cost(offer, outcome)
        decider.observe(outcome)
        trace.steps.append(Step(step, offer, outcome, cost))
        trace.total_cost += model.discount**step * cost
    return trace


def run_rng(seed: int, round_idx: int, run: int) -> np.random.Generator:
    """
    PCG64 stream of one episode, split off `seed` by `(round, run)`, so
    results do not depend on execution order.
    """
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(round_idx, run))
    )


def _run_round(
    model: IdpModel,
    prior: JointPrior,
    decider_factory: DeciderFactory,
    horizon: int,
    runs: int,
    seed: int,
    round_idx: int,
) -> np.ndarray:
    # deciders are deterministic, so an episode's total depends on the
    # sampled thresholds only
    totals_by_truth: Dict[TrueIncentives, float] = {}
    totals = np.empty(runs)
    for run in range(runs):
        truth = sample_true_incentives(prior, run_rng(seed, round_idx, run))
        if truth not in totals_by_truth:
            decider = decider_factory()
            decider.reset(model, prior)
            totals_by_truth[truth] = run_episode(
                model, decider, truth, horizon
            ).total_cost
        totals[run] = totals_by_truth[truth]
    return totals


def monte_carlo(
    model: IdpModel,
    prior: JointPrior,
    decider_factory: DeciderFactory,
    horizon: int,
    runs: int,
    rounds: int,
    seed: int,
    num_workers: int = 0,
) -> McStats:
    """
    Average total cost of a policy over sampled agents.

    Args:
        model: IDP instance.
        prior: Prior the agents' thresholds are drawn from.
        decider_factory: Zero-argument callable returning a fresh decider;
            must be picklable when `num_workers > 1`.
        horizon: Steps per episode.
        runs: Episodes per round.
        rounds: Number of rounds.
        seed: Root seed of all episode streams.
        num_workers: Worker processes across rounds; `<= 1` runs inline.

    Returns:
        Per-round means and their spread.
    """
    if runs < 1 or rounds < 1:
        raise ValidationError(
            f"`runs` and `rounds` must be >= 1, got {runs} and {rounds}."
        )
    args = [
        (model, prior, decider_factory, horizon, runs, seed, r)
        for r in range(rounds)
    ]
    if num_workers > 1:
        with ProcessPoolExecutor(max_workers=num_workers) as pool:
            per_round = list(pool.map(_run_round, *zip(*args)))
    else:
        per_round = [_run_round(*a) for a in args]

    totals = np.stack(per_round)  # `(rounds, runs)`
    round_means = totals.mean(axis=1)
    return McStats(
        round_means=tuple(float(m) for m in round_means),
        grand_mean=float(round_means.mean()),
        std=float(round_means.std(ddof=1)) if rounds > 1 else 0.0,
        run_std=float(totals.std(ddof=1)) if totals.size > 1 else 0.0,
        runs=runs,
        rounds=rounds,
        seed=seed,
    )


def bench_planning(
    model_grid: Iterable[Tuple[IdpModel, JointPrior]],
    algorithms: Mapping[str, Planner],
    horizon: int = 20,
    repeats: int = 5,
) -> List[BenchRow]:
    """
    Median wall-clock planning time per algorithm and instance. Only the
    planner call is timed, never episode execution.
    """
    if repeats < MIN_REPEATS:
        raise ValidationError(
            f"`repeats` must be >= {MIN_REPEATS}, got {repeats}."
        )
    rows = []
    for model, prior in model_grid:
        for name, planner in algorithms.items():
            times = []
            for _ in range(repeats):
                start = perf_counter()
                planner(model, prior, horizon)
                times.append(perf_counter() - start)
            row = BenchRow(
                algorithm=name,
                n_actions=model.n_actions,
                n_incentives=model.n_incentives,
                median_plan_time_ms=float(np.median(times)) * 1e3,
            )
            logging.debug(f"bench: {row}")
            rows.append(row)
    return rows
