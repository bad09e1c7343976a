"""
Run the incentive decision process planners and experiments.
"""
import logging
import os
import sys
from argparse import Namespace
from datetime import datetime as dt
from typing import Any, Dict, List, Optional, Sequence, Union

import wandb

from idp.errors import (
    BoundViolation,
    IdpError,
    InstanceTooLarge,
    InvariantViolation,
    ValidationError,
)
from idp.model import (
    IdpModel,
    JointPrior,
    TrueIncentives,
    sample_true_incentives,
)
from idp.options import ExperimentConfig, get_parser
from idp.oracle import expectimax_value, policy_expected_cost
from idp.sim import bench_planning, monte_carlo, run_episode, run_rng
from idp.solvers import (
    Direction,
    ExactPlan,
    SeqPlan,
    enumerate_reachable_states,
    seq_bound,
    seq_bound_alt,
    solve_finite,
    solve_infinite,
    solve_seq_finite,
    solve_seq_infinite,
)
from idp.utils import (
    ALGORITHMS,
    check_args,
    end_timer_and_log,
    log_table,
    retrieve_args,
    select_algorithms,
    start_timer,
    write_csv,
    write_json,
)

VERIFY_TOL = 1e-9
BOUND_TOL = 1e-9

COMPARE_HEADER = (
    "algorithm",
    "N",
    "K",
    "eta",
    "H",
    "round",
    "mean_cost",
    "plan_time_ms",
)
BENCH_HEADER = ("algorithm", "N", "K", "median_plan_time_ms")


def _timestamp() -> str:
    return dt.now().strftime("%dp%mp%Y_%Hp%M")


def _solve(
    model: IdpModel, prior: JointPrior, algorithm: str, horizon: int
) -> Union[ExactPlan, SeqPlan]:
    """Solved plan of `exact`, `seq` or `seq_reverse`."""
    direction = (
        Direction.REVERSE if algorithm == "seq_reverse" else Direction.FORWARD
    )
    if algorithm == "exact":
        if model.discount < 1:
            return solve_infinite(model, prior)
        return solve_finite(model, prior, horizon)
    if model.discount < 1:
        return solve_seq_infinite(model, prior, direction)
    return solve_seq_finite(model, prior, horizon, direction)


def cmd_solve(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """
    Plan the configured instance with every requested algorithm.

    Planners report their optimal value; the policies without a plan
    (greedy, daa, descend) report their exact expected cost over the
    horizon.

    Returns:
        One result row per algorithm.
    """
    model, prior = config.build_model(), config.build_prior()
    horizon = config.horizons[0]
    rows = []
    for algorithm in config.algorithms:
        start_time = start_timer()
        if algorithm in ("exact", "seq", "seq_reverse"):
            plan = _solve(model, prior, algorithm, horizon)
            plan_time = end_timer_and_log(start_time, f"{algorithm}: planned")
            value, offer = plan.root.value, plan.root.offer
            if algorithm == "exact":
                n_states = enumerate_reachable_states(model, prior)
            else:
                n_states = plan.n_states
        else:
            factory = ALGORITHMS[algorithm](model, prior, horizon)
            plan_time = end_timer_and_log(start_time, f"{algorithm}: planned")
            decider = factory()
            decider.reset(model, prior)
            offer = decider.decide(horizon)
            value = policy_expected_cost(model, prior, factory(), horizon)
            n_states = None
        rows.append(
            {
                "algorithm": algorithm,
                "H": horizon,
                "value": value,
                "first_offer": [offer.action, offer.incentive],
                "first_offer_label": offer.label(model),
                "n_states": n_states,
                "plan_time_ms": plan_time * 1e3,
            }
        )

    if config.verify and "exact" in config.algorithms:
        exact = next(row for row in rows if row["algorithm"] == "exact")
        if model.discount < 1:
            logging.warning(
                "Skipping verification: the oracle checks finite horizons."
            )
        else:
            try:
                reference = expectimax_value(model, prior, horizon)
            except InstanceTooLarge as e:
                logging.warning(f"Skipping verification: {e}")
            else:
                if abs(reference - exact["value"]) > VERIFY_TOL:
                    raise InvariantViolation(
                        f"Exact value {exact['value']} differs from the "
                        f"expectimax value {reference}."
                    )
                logging.info(f"Verified exact value against {reference}.")

    log_table(
        ["algorithm", "H", "value", "first offer", "states", "time [ms]"],
        [
            [
                r["algorithm"],
                r["H"],
                r["value"],
                r["first_offer_label"],
                "-" if r["n_states"] is None else r["n_states"],
                r["plan_time_ms"],
            ]
            for r in rows
        ],
        title=f"N={config.n_actions}, K={config.n_incentives}",
    )
    write_json(
        os.path.join(config.saving_path, "solve.json"),
        {"config": config.to_dict(), "results": rows},
    )
    return rows


def cmd_compare(
    config: ExperimentConfig, wandb__api_key: Optional[str] = None
) -> List[Dict[str, Any]]:
    """
    Monte Carlo comparison of the requested algorithms at every horizon.

    Writes per-round means to `compare.csv` and per-(algorithm, H) summaries
    to `compare_summary.json`.

    Returns:
        The summary rows.
    """
    model, prior = config.build_model(), config.build_prior()
    planners = select_algorithms(config.algorithms)

    wandb_logging = wandb__api_key is not None
    if wandb_logging:
        wandb.login(key=wandb__api_key)
        wandb.init(
            project="incentive-decision-processes",
            name=_timestamp(),
            config=config.to_dict(),
        )

    csv_rows, summary = [], []
    for horizon in config.horizons:
        exact_mean = None
        for name, planner in planners.items():
            start_time = start_timer()
            factory = planner(model, prior, horizon)
            plan_time = end_timer_and_log(
                start_time, f"{name}: planned for H={horizon}"
            )
            stats = monte_carlo(
                model,
                prior,
                factory,
                horizon,
                runs=config.runs,
                rounds=config.rounds,
                seed=config.seed,
                num_workers=config.num_workers,
            )
            for round_idx, mean in enumerate(stats.round_means):
                csv_rows.append(
                    [
                        name,
                        model.n_actions,
                        model.n_incentives,
                        config.eta,
                        horizon,
                        round_idx,
                        mean,
                        plan_time * 1e3,
                    ]
                )
            if name == "exact":
                exact_mean = stats.grand_mean
            summary.append(
                {
                    "algorithm": name,
                    "H": horizon,
                    "grand_mean": stats.grand_mean,
                    "stderr": stats.stderr,
                    "ratio_to_exact": None,
                }
            )
        # ratios once the exact mean of this horizon is known
        for row in summary:
            if row["H"] == horizon and exact_mean is not None:
                row["ratio_to_exact"] = row["grand_mean"] / exact_mean
        if wandb_logging:
            wandb.log(
                {
                    f"{row['algorithm']}/{key}": row[key]
                    for row in summary
                    if row["H"] == horizon
                    for key in ("grand_mean", "stderr", "ratio_to_exact")
                    if row[key] is not None
                }
                | {"H": horizon}
            )

    if wandb_logging:
        wandb.finish()

    log_table(
        ["algorithm", "H", "mean cost", "stderr", "ratio to exact"],
        [
            [
                r["algorithm"],
                r["H"],
                r["grand_mean"],
                r["stderr"],
                "-" if r["ratio_to_exact"] is None else r["ratio_to_exact"],
            ]
            for r in summary
        ],
        title=(
            f"N={config.n_actions}, K={config.n_incentives}, "
            f"eta={config.eta}, {config.rounds}x{config.runs} runs"
        ),
    )
    write_csv(
        os.path.join(config.saving_path, "compare.csv"),
        COMPARE_HEADER,
        csv_rows,
    )
    write_json(
        os.path.join(config.saving_path, "compare_summary.json"),
        {"config": config.to_dict(), "summary": summary},
    )
    return summary


def cmd_bound(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """
    Compare the SEQ values of both probing directions with the optimal value
    and check each gap against its guaranteed slack.

    Raises:
        BoundViolation: if a gap is negative or exceeds its slack.
    """
    model, prior = config.build_model(), config.build_prior()
    forward, reverse = seq_bound(model), seq_bound_alt(model)
    rows = []
    for horizon in config.horizons:
        if model.discount < 1:
            optimal = solve_infinite(model, prior).root.value
            values = {
                d: solve_seq_infinite(model, prior, d).root.value
                for d in Direction
            }
        else:
            optimal = solve_finite(model, prior, horizon).root.value
            values = {
                d: solve_seq_finite(model, prior, horizon, d).root.value
                for d in Direction
            }
        row = {
            "H": horizon,
            "optimal": optimal,
            "seq": values[Direction.FORWARD],
            "seq_reverse": values[Direction.REVERSE],
            "slack": forward.slack,
            "slack_reverse": reverse.slack,
            "gap": values[Direction.FORWARD] - optimal,
            "gap_reverse": values[Direction.REVERSE] - optimal,
        }
        rows.append(row)

    log_table(
        [
            "H",
            "V*",
            "V seq",
            "V seq rev",
            "gap",
            "slack",
            "gap rev",
            "slack rev",
        ],
        [
            [
                r["H"],
                r["optimal"],
                r["seq"],
                r["seq_reverse"],
                r["gap"],
                r["slack"],
                r["gap_reverse"],
                r["slack_reverse"],
            ]
            for r in rows
        ],
        title=f"N={config.n_actions}, K={config.n_incentives}",
    )
    write_json(
        os.path.join(config.saving_path, "bound.json"),
        {"config": config.to_dict(), "results": rows},
    )

    for r in rows:
        for gap, slack in (
            (r["gap"], r["slack"]),
            (r["gap_reverse"], r["slack_reverse"]),
        ):
            if gap < -BOUND_TOL:
                raise BoundViolation(
                    f"SEQ value below the optimal value at H={r['H']}: "
                    f"gap {gap}."
                )
            if model.discount == 1 and gap > slack + BOUND_TOL:
                raise BoundViolation(
                    f"SEQ gap {gap} exceeds its slack {slack} at H={r['H']}."
                )
    return rows


def cmd_bench(config: ExperimentConfig) -> List[List[Any]]:
    """Median planning time over the `bench_n` x `bench_k` grid."""
    grid = [
        (config.build_model(n, k), config.build_prior(n, k))
        for n in config.bench_n
        for k in config.bench_k
    ]
    rows = [
        [r.algorithm, r.n_actions, r.n_incentives, r.median_plan_time_ms]
        for r in bench_planning(
            grid,
            select_algorithms(config.algorithms),
            horizon=config.horizons[0],
            repeats=config.repeats,
        )
    ]
    log_table(BENCH_HEADER, rows, title="Planning time")
    write_csv(
        os.path.join(config.saving_path, "bench.csv"), BENCH_HEADER, rows
    )
    return rows


def cmd_simulate(config: ExperimentConfig) -> Dict[str, Any]:
    """Trace one episode of the first requested algorithm."""
    model, prior = config.build_model(), config.build_prior()
    algorithm, horizon = config.algorithms[0], config.horizons[0]
    if config.true_incentives is None:
        truth = sample_true_incentives(prior, run_rng(config.seed, 0, 0))
    else:
        try:
            truth = TrueIncentives(tuple(config.true_incentives))
        except ValidationError as e:
            raise ValidationError(f"Invalid `true_incentives`: {e}") from e
        if len(truth.thresholds) != model.n_actions or max(
            truth.thresholds
        ) >= model.n_incentives:
            raise ValidationError(
                f"`true_incentives` {list(truth.thresholds)} do not fit "
                f"N={model.n_actions}, K={model.n_incentives}."
            )

    decider = ALGORITHMS[algorithm](model, prior, horizon)()
    decider.reset(model, prior)
    trace = run_episode(model, decider, truth, horizon)

    log_table(
        ["step", "offer", "outcome", "cost"],
        [
            [s.step, s.offer.label(model), s.outcome.value, s.cost]
            for s in trace.steps
        ],
        title=(
            f"{algorithm}, thresholds {list(truth.thresholds)}, "
            f"total {trace.total_cost:.6f}"
        ),
    )
    result = {
        "config": config.to_dict(),
        "algorithm": algorithm,
        "true_incentives": list(truth.thresholds),
        "total_cost": trace.total_cost,
        "steps": trace.to_rows(model),
    }
    write_json(os.path.join(config.saving_path, "simulate.json"), result)
    return result


def main(args: Namespace, config: ExperimentConfig) -> int:
    """
    Main function.

    Args:
        args: command line arguments
        config: validated experiment config

    Returns:
        Exit code.
    """
    try:
        if args.command == "solve":
            cmd_solve(config)
        elif args.command == "compare":
            cmd_compare(config, args.wandb__api_key)
        elif args.command == "bound":
            cmd_bound(config)
        elif args.command == "bench":
            cmd_bench(config)
        else:
            cmd_simulate(config)
    except ValidationError as e:
        logging.error(f"Invalid configuration: {e}")
        return 2
    except IdpError as e:
        logging.error(f"{type(e).__name__}: {e}")
        return 3
    return 0


def cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = get_parser()
    try:
        args = retrieve_args(parser, argv)
        config = check_args(args)
    except ValueError as e:
        parser.error(str(e))

    # Setup basic configuration for logging
    log_level = logging.INFO
    logging.basicConfig(
        filename=os.path.join(
            config.saving_path, f"{args.command}_{_timestamp()}.log"
        ),
        level=log_level,
        format="%(asctime)s - %(levelname)s - %(message)s",
        force=True,
    )

    # Create `StreamHandler` for stdout and add it to root logger
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(log_level)
    logging.getLogger().addHandler(console_handler)

    if args.config is not None and os.path.exists(args.config):
        logging.info(f"Config file '{args.config}' found and loaded.")
    logging.info(args)

    return main(args, config)


if __name__ == "__main__":
    sys.exit(cli())
