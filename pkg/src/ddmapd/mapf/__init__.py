"""Multi-agent path finding solvers used for shelves and for free agents."""
from .cbs import count_conflicts, solve, solve_cbs, solve_prioritized
from .core import (
    FrozenPath, MapfError, MapfProblem, MapfRootLimit, MapfSolution, MapfTimeout, MapfUnsolvable,
    Reservation,
)
from .multilabel import Segment, multi_label_astar
from .push_and_swap import solve_push_and_swap
from .retime import retime_one_robust

__all__ = [
    "FrozenPath", "MapfError", "MapfProblem", "MapfRootLimit", "MapfSolution", "MapfTimeout",
    "MapfUnsolvable", "Reservation", "Segment", "count_conflicts", "multi_label_astar",
    "retime_one_robust", "solve", "solve_cbs", "solve_prioritized", "solve_push_and_swap",
]
