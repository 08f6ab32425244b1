"""Multi-label space-time A*: visit a sequence of goals, optionally following a
fixed cell sequence without pausing, and finally come to rest."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence, Union

from ..domain import Cell, GridMap, Path
from .core import FocalQueue, FrozenPath, MapfTimeout, Reservation


@dataclass
class Segment:
    """Cells to traverse on consecutive timesteps, entered no earlier than ``not_before``."""

    cells: list[Cell]
    not_before: int = 0


Label = Union[Cell, Segment]


def _reservation(grid: GridMap, frozen) -> Reservation:
    if isinstance(frozen, Reservation):
        return frozen
    res = Reservation(grid)
    for fp in frozen:
        if isinstance(fp, FrozenPath):
            res.add([grid.cell_id(c) for c in fp.path], fp.hold, fp.blocks_goal)
        else:
            res.add([grid.cell_id(c) for c in fp])
    return res


def multi_label_astar(
    grid: GridMap,
    start: Cell,
    labels: Sequence[Label],
    frozen: Reservation | Sequence[FrozenPath] | Sequence[Path] = (),
    max_t: int | None = None,
    deadline: float | None = None,
    return_times: bool = False,
):
    """Time-minimal path from ``start`` through ``labels`` in order.

    A plain cell label is reached; a :class:`Segment` must be entered at its first
    cell and then followed one cell per timestep.  The path ends at the last label
    (which must be a cell) at the first time the agent can stay there forever.
    Returns ``None`` if no such path exists within ``max_t``.  With
    ``return_times`` the result is ``(path, starts)`` where ``starts[i]`` is the
    time the walk of segment label ``i`` begins (``None`` for cell labels).
    """
    if not labels or isinstance(labels[-1], Segment):
        raise ValueError("the last label must be a cell")
    res = _reservation(grid, frozen)
    cid = grid.cell_id
    entry, exit_, length, not_before, seg_ids = [], [], [], [], []
    for lab in labels:
        if isinstance(lab, Segment):
            ids = [cid(c) for c in lab.cells]
            for a, b in zip(ids, ids[1:]):
                if a != b and b not in grid.nbrs[a]:
                    raise ValueError("segment cells must be adjacent")
            entry.append(ids[0])
            exit_.append(ids[-1])
            length.append(len(ids) - 1)
            not_before.append(lab.not_before)
            seg_ids.append(ids)
        else:
            entry.append(cid(lab))
            exit_.append(cid(lab))
            length.append(0)
            not_before.append(0)
            seg_ids.append(None)
    n_lab = len(labels)
    dists = [grid.dist_table(e) for e in entry]
    tail = [0] * n_lab
    for k in range(n_lab - 2, -1, -1):
        d = dists[k + 1][exit_[k]]
        if d < 0:
            return None
        tail[k] = tail[k + 1] + d + length[k + 1]
    home = entry[-1]
    goal_min = res.earliest_rest(home)
    if goal_min == float("inf"):
        return None
    static_after = res.horizon + max(not_before) + sum(length) + 2
    if max_t is None:
        max_t = static_after + 4 * grid.num_free()
    s0 = cid(start)
    if dists[0][s0] < 0 or res.occupied(s0, 0):
        return None

    def settle(v: int, li: int) -> int:
        # plain cell labels other than the last one complete on arrival
        while li < n_lab - 1 and seg_ids[li] is None and v == entry[li]:
            li += 1
        return li

    def f_value(v: int, t: int, li: int) -> float:
        d = dists[li][v]
        if d < 0:
            return float("inf")
        f = max(t + d, not_before[li]) + length[li] + tail[li]
        return max(f, goal_min)

    nodes: list[tuple[int, int, int, int]] = []   # (v, t, label, parent)
    queue = FocalQueue(1.0)
    seen: set = set()
    li0 = settle(s0, 0)
    nodes.append((s0, 0, li0, -1))
    queue.push(f_value(s0, 0, li0), (f_value(s0, 0, li0), 0, 0), 0)
    expanded = 0
    while True:
        popped = queue.pop()
        if popped is None:
            return None
        _, idx = popped
        v, t, li, _ = nodes[idx]
        key = (v, min(t, static_after), li)
        if key in seen:
            continue
        seen.add(key)
        expanded += 1
        if deadline is not None and expanded % 512 == 0 and time.perf_counter() > deadline:
            raise MapfTimeout("time budget exhausted in multi-label search")
        if li == n_lab - 1 and v == home and t >= goal_min:
            out = []
            starts: list[int | None] = [None] * n_lab
            while idx >= 0:
                nv, nt, nli, parent = nodes[idx]
                out.append(grid.cell_of(nv))
                if parent >= 0 and nodes[parent][2] != nli and seg_ids[nodes[parent][2]] is not None:
                    # only a segment walk leaves a segment label: expand it into single steps
                    _, pt, pli, _ = nodes[parent]
                    starts[pli] = pt
                    out.pop()
                    out.extend(grid.cell_of(c) for c in reversed(seg_ids[pli][1:]))
                idx = parent
            out.reverse()
            return (out, starts) if return_times else out
        if t + 1 > max_t:
            continue
        successors = []
        if seg_ids[li] is not None and v == entry[li] and t >= not_before[li]:
            ids = seg_ids[li]
            if all(not res.blocked_move(ids[k], ids[k + 1], t + k) for k in range(len(ids) - 1)):
                nt = t + len(ids) - 1
                successors.append((ids[-1], nt, settle(ids[-1], li + 1)))
        for u in (*grid.nbrs[v], v):
            if not res.blocked_move(v, u, t):
                successors.append((u, t + 1, settle(u, li)))
        for u, nt, nli in successors:
            nkey = (u, min(nt, static_after), nli)
            if nkey in seen:
                continue
            f = f_value(u, nt, nli)
            if f == float("inf"):
                continue
            nodes.append((u, nt, nli, idx))
            queue.push(f, (f, -nt, len(nodes)), len(nodes) - 1)
