from .exact import (
    ExactPlan,
    ExactPolicy,
    ExactSolver,
    PlanResult,
    enumerate_reachable_states,
    solve_finite,
    solve_infinite,
)
from .seq import (
    DescendPolicy,
    Direction,
    SeqBound,
    SeqPlan,
    SeqPolicy,
    SeqSolver,
    SeqState,
    seq_bound,
    seq_bound_alt,
    solve_seq_finite,
    solve_seq_infinite,
)
