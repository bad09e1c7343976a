"""Utility functions: argument handling, timers, tables, files and planners."""
import csv
import gc
import json
import logging
import os
from argparse import ArgumentParser, Namespace
from functools import partial
from time import perf_counter
from typing import Any, Dict, Iterable, Optional, Sequence

from prettytable import PrettyTable

from idp.baselines import DaaPolicy, GreedyPolicy
from idp.model import IdpModel, JointPrior
from idp.options import ExperimentConfig
from idp.sim import DeciderFactory, Planner
from idp.solvers import (
    DescendPolicy,
    Direction,
    solve_finite,
    solve_infinite,
    solve_seq_finite,
    solve_seq_infinite,
)


def retrieve_args(
    parser: ArgumentParser, argv: Optional[Sequence[str]] = None
) -> Namespace:
    """
    Retrieve and parse the args; some args might have been passed in a JSON
    config file.

    Args:
        parser: Parser from `options.get_parser`.
        argv: Arguments to parse; `sys.argv[1:]` if not provided.

    Returns:
        Argparse options.
    """
    args = parser.parse_args(argv)

    if args.config is not None:
        if os.path.exists(args.config):
            if not args.config.endswith(".json"):
                raise ValueError(
                    "Config file should be a JSON file, but is a "
                    f"'{args.config}' file."
                )
            with open(args.config, "r") as f:
                config_args = json.load(f)  # type: dict

            # keys are checked against the options of the chosen command
            subparser = parser._subparsers._group_actions[0].choices[
                args.command
            ]
            registered_args = {action.dest for action in subparser._actions}
            unknown_args = set(config_args) - registered_args
            if unknown_args:
                raise ValueError(
                    f"Unknown argument(s) in JSON config: {unknown_args}"
                )

            subparser.set_defaults(**config_args)
            args = parser.parse_args(argv)
        else:
            raise ValueError(f"Config file '{args.config}' not found.")

    return args


def check_args(args: Namespace) -> ExperimentConfig:
    """
    Validate the provided arguments.

    Args:
        args: Arguments provided by the user.

    Returns:
        The validated experiment config.
    """
    config = ExperimentConfig.from_namespace(args)

    # create saving dir if non-existent
    os.makedirs(config.saving_path, exist_ok=True)

    return config


def start_timer() -> float:
    """
    Start the timer.

    Returns:
        Time at which the timed code started.
    """
    gc.collect()
    return perf_counter()


def end_timer_and_log(start_time: float, local_msg: str = "") -> float:
    """
    End the timer and log the time it took to execute the code.

    Args:
        start_time: Time at which the timed code started.
        local_msg: Local message to log.

    Returns:
        Time it took to execute the code.
    """
    time_diff = perf_counter() - start_time
    logging.info(
        f"{local_msg}\n\tTotal execution time = {time_diff:.3f} [sec]"
    )
    return time_diff


def log_table(
    field_names: Sequence[str],
    rows: Iterable[Sequence[Any]],
    title: Optional[str] = None,
) -> None:
    """Log rows as a table."""
    table = PrettyTable(list(field_names))
    if title is not None:
        table.title = title
    for row in rows:
        table.add_row(
            [f"{v:.6f}" if isinstance(v, float) else v for v in row]
        )
    logging.info(f"\n{table}")


def write_csv(
    path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> None:
    # `csv` writes floats with `repr`: '.' separator, no grouping
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logging.info(f"Wrote '{path}'.")


def write_json(path: str, obj: Any) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=4)
        f.write("\n")
    logging.info(f"Wrote '{path}'.")


def plan_exact(
    model: IdpModel, prior: JointPrior, horizon: int
) -> DeciderFactory:
    if model.discount < 1:
        return solve_infinite(model, prior).policy
    return solve_finite(model, prior, horizon).policy


def plan_seq(
    model: IdpModel,
    prior: JointPrior,
    horizon: int,
    direction: Direction = Direction.FORWARD,
) -> DeciderFactory:
    if model.discount < 1:
        return solve_seq_infinite(model, prior, direction).policy
    return solve_seq_finite(model, prior, horizon, direction).policy


def plan_greedy(
    model: IdpModel, prior: JointPrior, horizon: int
) -> DeciderFactory:
    return partial(GreedyPolicy, model, prior)


def plan_daa(
    model: IdpModel, prior: JointPrior, horizon: int
) -> DeciderFactory:
    return partial(DaaPolicy, model, prior)


def plan_descend(
    model: IdpModel, prior: JointPrior, horizon: int
) -> DeciderFactory:
    return partial(DescendPolicy, model, prior)


# every factory is picklable, so Monte Carlo rounds can run in processes
ALGORITHMS: Dict[str, Planner] = {
    "exact": plan_exact,
    "seq": plan_seq,
    "seq_reverse": partial(plan_seq, direction=Direction.REVERSE),
    "greedy": plan_greedy,
    "daa": plan_daa,
    "descend": plan_descend,
}


def select_algorithms(names: Iterable[str]) -> Dict[str, Planner]:
    return {name: ALGORITHMS[name] for name in names}
