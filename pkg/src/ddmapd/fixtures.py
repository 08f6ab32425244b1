"""A small hand-made instance with a known good plan, used in tests and demos.

Map (3 x 5, ``@`` blocked)::

    @ . . . .
    . . . . .
    @ . . . .

Shelf 1 at (1, 2) must go to (1, 0) and shelf 2 at (1, 4) to (2, 4); shelves 0
and 3 stay, but shelf 0 has to step aside so that shelf 1 can pass.
"""
from __future__ import annotations

from .domain import ExecutionLog, GridMap, Instance, Shelf

ROWS = ["@....", ".....", "@...."]


def running_example() -> Instance:
    grid = GridMap.from_rows(ROWS)
    shelves = [
        Shelf((1, 1), (1, 1)),
        Shelf((1, 2), (1, 0)),
        Shelf((1, 4), (2, 4)),
        Shelf((2, 1), (2, 1)),
    ]
    return Instance(grid, [(0, 4), (0, 3)], shelves, name="running_example")


def running_example_trajectories() -> list[list[tuple[int, int]]]:
    return [
        [(1, 1), (0, 1), (1, 1)],
        [(1, 2), (1, 1), (1, 0)],
        [(1, 4), (2, 4)],
        [(2, 1)],
    ]


def running_example_plan() -> ExecutionLog:
    """Hand-built two-agent plan: makespan 7, flowtime 14."""
    a0 = [(0, 4), (1, 4), (2, 4), (2, 3), (2, 2), (1, 2), (1, 1), (1, 0)]
    a1 = [(0, 3), (1, 3), (1, 2), (1, 1), (0, 1), (0, 1), (0, 1), (1, 1)]
    c0 = [-1, 2, -1, -1, -1, 1, 1, -1]
    c1 = [-1, -1, -1, 0, -1, -1, 0, -1]
    shelves = [
        [(1, 1)] * 4 + [(0, 1)] * 3 + [(1, 1)],
        [(1, 2)] * 6 + [(1, 1), (1, 0)],
        [(1, 4)] * 2 + [(2, 4)] * 6,
        [(2, 1)] * 8,
    ]
    return ExecutionLog([a0, a1], [c0, c1], shelves)
