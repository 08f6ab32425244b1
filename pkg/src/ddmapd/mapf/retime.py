"""Turn a collision-free solution into a 1-robust one with the same routes.

Every cell keeps the order in which agents visit it; an agent may enter a
cell only one timestep after the previous visitor has left it.  The earliest
schedule meeting these precedences is a longest-path computation on a DAG.
Solutions in which agents rotate around a cycle in lock step have a cyclic
precedence graph and cannot be retimed.
"""
from __future__ import annotations

from collections import deque
from typing import Sequence

from ..domain import Path


def _route(path: Path) -> tuple[list, list[int]]:
    """Cells with consecutive repeats removed, and the time each is entered."""
    cells, enter = [path[0]], [0]
    for t in range(1, len(path)):
        if path[t] != cells[-1]:
            cells.append(path[t])
            enter.append(t)
    return cells, enter


def retime_one_robust(paths: Sequence[Path]) -> list[Path] | None:
    """1-robust paths visiting the same cells in the same per-cell order, or
    ``None`` if the visit order is cyclic."""
    routes = [_route(list(p)) for p in paths]
    # node (j, k) = agent j entering its k-th route cell; index them flat
    base = []
    n = 0
    for cells, _ in routes:
        base.append(n)
        n += len(cells)
    succ: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n

    def edge(a: int, b: int) -> None:
        succ[a].append(b)
        indeg[b] += 1

    visits: dict = {}
    for j, (cells, enter) in enumerate(routes):
        for k, c in enumerate(cells):
            visits.setdefault(c, []).append((enter[k], j, k))
            if k:
                edge(base[j] + k - 1, base[j] + k)
    for c, vs in visits.items():
        vs.sort()
        for (_, j1, k1), (_, j2, k2) in zip(vs, vs[1:]):
            if j1 == j2:
                continue
            if k1 + 1 >= len(routes[j1][0]):
                return None   # someone enters a cell another agent has parked on
            # j2 enters c only after j1 has moved on to its next cell
            edge(base[j1] + k1 + 1, base[j2] + k2)
    time = [0] * n
    queue = deque(i for i in range(n) if indeg[i] == 0)
    done = 0
    while queue:
        a = queue.popleft()
        done += 1
        for b in succ[a]:
            if time[a] + 1 > time[b]:
                time[b] = time[a] + 1
            indeg[b] -= 1
            if indeg[b] == 0:
                queue.append(b)
    if done < n:
        return None
    out = []
    for j, (cells, _) in enumerate(routes):
        p = []
        for k, c in enumerate(cells):
            if p:
                p.extend([p[-1]] * (time[base[j] + k] - len(p)))
            p.append(c)
        out.append(p)
    return out
