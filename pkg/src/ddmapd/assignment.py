"""Minimum-cost bipartite assignment (Hungarian method, O(n^3))."""
from __future__ import annotations

from typing import Sequence

SENTINEL = 10**9  # cost of an impossible pair


def hungarian(costs: Sequence[Sequence[float]]) -> tuple[list[tuple[int, int]], float]:
    """Minimum-cost matching of size min(rows, cols).

    Returns ``(pairs, total)`` with ``pairs`` a sorted list of (row, col).  Pairs whose
    cost is the sentinel (or more) are left out of the result.  Runs on the
    rectangular matrix directly (transposed if there are more rows than columns),
    so the work is O(k^2 * l) for k = min(rows, cols), l = max(rows, cols).  The
    shorter side is reduced by its minima first, so with rows <= cols adding a
    constant to a row never changes the matching.
    """
    n_rows = len(costs)
    if n_rows == 0 or len(costs[0]) == 0:
        raise ValueError("cost matrix is empty")
    n_cols = len(costs[0])
    if any(len(r) != n_cols for r in costs):
        raise ValueError("cost matrix is ragged")
    flip = n_rows > n_cols
    a = [list(col) for col in zip(*costs)] if flip else [list(r) for r in costs]
    n, m = len(a), len(a[0])
    for row in a:
        lo = min(row)
        for j in range(m):
            row[j] -= lo

    # potentials formulation, 1-based; p[j] = row matched to column j
    inf = float("inf")
    u = [0] * (n + 1)
    v = [0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            row = a[i0 - 1]
            ui0 = u[i0]
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - ui0 - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    pairs = []
    total = 0
    for j in range(1, m + 1):
        if p[j] == 0:
            continue
        i, c = (j - 1, p[j] - 1) if flip else (p[j] - 1, j - 1)
        if costs[i][c] < SENTINEL:
            pairs.append((i, c))
            total += costs[i][c]
    pairs.sort()
    return pairs, total


def assignment_cost(distance: int, executable_at: int, free_at: int = 0) -> int:
    """Cost of sending an agent to a shelf: travel (after the agent frees up) or the
    time the shelf becomes executable, whichever is later."""
    if distance >= SENTINEL:
        return SENTINEL
    return max(free_at + distance, executable_at)
