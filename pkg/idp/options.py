import argparse
import json
from argparse import Namespace
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Union

import numpy as np

from idp.errors import ValidationError
from idp.model import (
    DEFAULT_COST,
    IdpModel,
    JointPrior,
    experiment_model,
    random_monotone_prior,
    uniform_monotone_prior,
)
from idp.sim import MIN_REPEATS

ALGORITHM_NAMES = ("exact", "seq", "seq_reverse", "greedy", "daa", "descend")
COMMANDS = ("solve", "compare", "bound", "bench", "simulate")


@dataclass
class ExperimentConfig:
    """
    Fully resolved settings of one CLI run; every field has a flag of the
    same name.

    `prior` is `"uniform"`, `"random"` (Dirichlet draw seeded with `seed`)
    or an inline table `[[[t_1, ..., t_N], weight], ...]`.
    """

    n_actions: int = 3
    n_incentives: int = 5
    eta: float = 1.0
    default_cost: float = DEFAULT_COST
    horizons: List[int] = field(default_factory=lambda: [20])
    gamma: float = 1.0
    prior: Union[str, List[list]] = "uniform"
    algorithms: List[str] = field(
        default_factory=lambda: ["exact", "seq", "greedy", "daa"]
    )
    runs: int = 1000
    rounds: int = 10
    seed: int = 0
    saving_path: str = "outputs"
    num_workers: int = 0
    bench_n: List[int] = field(default_factory=lambda: [3])
    bench_k: List[int] = field(default_factory=lambda: [2, 3, 4, 5, 6])
    repeats: int = 5
    verify: bool = False
    true_incentives: Optional[List[int]] = None

    def __post_init__(self) -> None:
        if isinstance(self.prior, str) and self.prior.lstrip().startswith(
            "["
        ):
            self.prior = json.loads(self.prior)
        self.horizons = [int(h) for h in self.horizons]
        self.algorithms = list(self.algorithms)
        self.bench_n = [int(n) for n in self.bench_n]
        self.bench_k = [int(k) for k in self.bench_k]
        if self.true_incentives is not None:
            self.true_incentives = [int(t) for t in self.true_incentives]

        def require(ok: bool, name: str, rule: str) -> None:
            if not ok:
                raise ValidationError(
                    f"`{name}` {rule}, got {getattr(self, name)!r}."
                )

        require(self.n_actions >= 1, "n_actions", "must be >= 1")
        require(self.n_incentives >= 1, "n_incentives", "must be >= 1")
        require(self.eta > 0, "eta", "must be > 0")
        require(
            len(self.horizons) > 0 and min(self.horizons) >= 1,
            "horizons",
            "must be a nonempty list of integers >= 1",
        )
        require(0 < self.gamma <= 1, "gamma", "must lie in (0, 1]")
        require(
            len(self.algorithms) > 0
            and set(self.algorithms) <= set(ALGORITHM_NAMES),
            "algorithms",
            f"must be a nonempty subset of {ALGORITHM_NAMES}",
        )
        require(self.runs >= 1, "runs", "must be >= 1")
        require(self.rounds >= 1, "rounds", "must be >= 1")
        require(self.num_workers >= 0, "num_workers", "must be >= 0")
        require(
            self.repeats >= MIN_REPEATS,
            "repeats",
            f"must be >= {MIN_REPEATS}",
        )
        require(
            all(n >= 1 for n in self.bench_n), "bench_n", "must be >= 1"
        )
        require(
            all(k >= 1 for k in self.bench_k), "bench_k", "must be >= 1"
        )
        require(
            isinstance(self.prior, list)
            or self.prior in ("uniform", "random"),
            "prior",
            "must be 'uniform', 'random' or an inline table",
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, config: Dict[str, Any]) -> "ExperimentConfig":
        return cls(**config)

    @classmethod
    def from_namespace(cls, args: Namespace) -> "ExperimentConfig":
        values = vars(args)
        return cls(**{f.name: values[f.name] for f in fields(cls)})

    def build_model(
        self,
        n_actions: Optional[int] = None,
        n_incentives: Optional[int] = None,
    ) -> IdpModel:
        try:
            return experiment_model(
                n_actions or self.n_actions,
                n_incentives or self.n_incentives,
                self.eta,
                default_cost=self.default_cost,
                discount=self.gamma,
            )
        except ValidationError as e:
            raise ValidationError(f"Invalid model settings: {e}") from e

    def build_prior(
        self,
        n_actions: Optional[int] = None,
        n_incentives: Optional[int] = None,
    ) -> JointPrior:
        n_actions = n_actions or self.n_actions
        n_incentives = n_incentives or self.n_incentives
        if self.prior == "uniform":
            return uniform_monotone_prior(n_actions, n_incentives)
        if self.prior == "random":
            return random_monotone_prior(
                n_actions, n_incentives, np.random.default_rng(self.seed)
            )
        try:
            return JointPrior.from_list(n_actions, n_incentives, self.prior)
        except (ValueError, TypeError) as e:
            raise ValidationError(f"Invalid inline `prior` table: {e}") from e


def get_parser() -> argparse.ArgumentParser:
    """
    Get parser for command line arguments.

    Returns:
        parser for command line arguments
    """
    common = argparse.ArgumentParser(add_help=False)
    defaults = ExperimentConfig()

    # instance
    common.add_argument(
        "--n_actions",
        "--n",
        type=int,
        default=defaults.n_actions,
        help="Number of alternate agent actions N.",
    )
    common.add_argument(
        "--n_incentives",
        "--k",
        type=int,
        default=defaults.n_incentives,
        help="Number of incentive levels K; incentive k is worth k/K.",
    )
    common.add_argument(
        "--eta",
        type=float,
        default=defaults.eta,
        help="Curvature of the action cost ladder c_n = (n/N)**eta.",
    )
    common.add_argument(
        "--default_cost",
        type=float,
        default=defaults.default_cost,
        help="Cost of the agent's default action.",
    )
    common.add_argument(
        "--horizons",
        "--horizon",
        type=int,
        nargs="+",
        default=defaults.horizons,
        help="Horizon(s) H; `solve`, `bench` and `simulate` use the first.",
    )
    common.add_argument(
        "--gamma",
        type=float,
        default=defaults.gamma,
        help=(
            "Discount factor. Below 1 the planners solve the infinite "
            "horizon and episodes run H discounted steps."
        ),
    )
    common.add_argument(
        "--prior",
        type=str,
        default=defaults.prior,
        help=(
            "Prior over thresholds: 'uniform', 'random' or an inline JSON "
            "table [[[t_1, ..., t_N], weight], ...]."
        ),
    )

    # experiment
    common.add_argument(
        "--algorithms",
        type=str,
        nargs="+",
        choices=ALGORITHM_NAMES,
        default=defaults.algorithms,
        help="Algorithms to run; `simulate` uses the first.",
    )
    common.add_argument(
        "--runs",
        type=int,
        default=defaults.runs,
        help="Episodes per Monte Carlo round.",
    )
    common.add_argument(
        "--rounds",
        type=int,
        default=defaults.rounds,
        help="Number of Monte Carlo rounds.",
    )
    common.add_argument(
        "--seed",
        type=int,
        default=defaults.seed,
        help="Root seed of all random streams.",
    )
    common.add_argument(
        "--num_workers",
        type=int,
        default=defaults.num_workers,
        help="Worker processes for Monte Carlo rounds; 0 runs inline.",
    )
    common.add_argument(
        "--bench_n",
        type=int,
        nargs="*",
        default=defaults.bench_n,
        help="Values of N in the benchmark grid.",
    )
    common.add_argument(
        "--bench_k",
        type=int,
        nargs="*",
        default=defaults.bench_k,
        help="Values of K in the benchmark grid.",
    )
    common.add_argument(
        "--repeats",
        type=int,
        default=defaults.repeats,
        help=(
            "Timed repetitions per benchmark cell (at least "
            f"{MIN_REPEATS}); the median is kept."
        ),
    )
    common.add_argument(
        "--verify",
        action="store_true",
        help="Cross-check exact values against the brute-force oracle.",
    )
    common.add_argument(
        "--true_incentives",
        type=int,
        nargs="+",
        default=None,
        help=(
            "Agent thresholds for `simulate`; sampled from the prior if "
            "unset."
        ),
    )

    # generic
    common.add_argument(
        "--saving_path",
        type=str,
        default=defaults.saving_path,
        help="Directory for logs and result files.",
    )
    common.add_argument(
        "--wandb__api_key",
        type=str,
        default=None,
        help="Weights & Biases API key; enables tracking in `compare`.",
    )
    common.add_argument(
        "--config",
        type=str,
        default=None,
        help="JSON config file; explicit flags override its values.",
    )

    parser = argparse.ArgumentParser(
        description="Planning and simulation for incentive decision processes."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "Plan an instance and report values and first offers.",
        "compare": "Monte Carlo comparison of the algorithms over horizons.",
        "bound": "Check the SEQ suboptimality bounds on an instance.",
        "bench": "Benchmark planning time over an (N, K) grid.",
        "simulate": "Run and trace a single episode.",
    }
    for command in COMMANDS:
        subparsers.add_parser(
            command, parents=[common], help=helps[command]
        )
    return parser
