from typing import Callable, Sequence

import numpy as np
import pytest

from idp.model import (
    IdpModel,
    JointPrior,
    build_model,
    random_monotone_prior,
    uniform_monotone_prior,
)

TOL = 1e-9


@pytest.fixture
def small_model() -> IdpModel:
    """N=1, K=2 instance with c=(0.5), c_2=2 and d=(0.5, 1.0)."""
    return build_model([0.5], 2.0, [0.5, 1.0])


@pytest.fixture
def small_prior() -> JointPrior:
    return uniform_monotone_prior(1, 2)


@pytest.fixture
def point_mass() -> Callable[[int, Sequence[int]], JointPrior]:
    def make(n_incentives: int, thresholds: Sequence[int]) -> JointPrior:
        return JointPrior(
            len(thresholds), n_incentives, {tuple(thresholds): 1.0}
        )

    return make


@pytest.fixture
def priors() -> Callable[[int, int], list]:
    """Uniform prior plus two seeded random priors of the given size."""

    def make(n_actions: int, n_incentives: int) -> list:
        rng = np.random.default_rng(1000 * n_actions + n_incentives)
        return [uniform_monotone_prior(n_actions, n_incentives)] + [
            random_monotone_prior(n_actions, n_incentives, rng)
            for _ in range(2)
        ]

    return make
