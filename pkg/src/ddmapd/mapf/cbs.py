"""Bounded-suboptimal conflict-based search (focal high and low level) and
prioritized planning."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

from ..domain import Cell, GridMap
from .core import (
    ConflictTable, Constraints, FocalQueue, MapfProblem, MapfRootLimit, MapfSolution,
    MapfTimeout, MapfUnsolvable, Reservation, build_reservation, space_time_search,
)


@dataclass
class _Conflict:
    t: int
    a: int
    b: int
    kind: str       # vertex | edge | follow | target | rotation
    v: int
    u: int = -1     # edge: a moves u -> v ... see _branch
    cycle: tuple = ()   # rotation: (agent, from, to) per member


def _pos(p: Sequence[int], t: int) -> int:
    return p[t] if t < len(p) else p[-1]


def _rotations(moves: dict, t: int) -> list[_Conflict]:
    """Groups of three or more agents moving around a cycle during t -> t+1;
    ``moves`` maps each vacated cell to (agent, entered cell)."""
    out, seen = [], set()
    for start in moves:
        if start in seen:
            continue
        chain, cur = [], start
        while cur in moves and cur not in seen:
            seen.add(cur)
            chain.append(cur)
            cur = moves[cur][1]
        if cur in chain and len(chain) - chain.index(cur) > 2:
            members = tuple((moves[c][0], c, moves[c][1]) for c in chain[chain.index(cur):])
            ids = sorted(m[0] for m in members)
            out.append(_Conflict(t, ids[0], ids[1], "rotation", members[0][2], cycle=members))
    return out


def count_conflicts(paths: Sequence[Sequence[int]], one_robust: bool = False,
                    pairs: set | None = None, no_rotation: bool = False):
    """Number of conflicting (pair, time) incidents and the first one found.

    Scans time ascending; at each cell the lowest agent there is the one the
    others conflict with, and the first conflict is the lowest (time, pair).
    If ``pairs`` is given, every conflicting agent pair is added to it.  With
    ``no_rotation`` agents moving around a cycle in lock step also conflict.

    Agents that reached their last cell are kept in a per-cell index, so each
    timestep only costs work for the agents still moving.
    """
    horizon = max(len(p) for p in paths)
    ends = [len(p) - 1 for p in paths]
    parks_at: dict[int, list[int]] = {}
    for i, e in enumerate(ends):
        parks_at.setdefault(e, []).append(i)
    parked: dict[int, list[int]] = {}      # cell -> agents resting there for good
    crowded: set[int] = set()              # cells with two or more of them
    total = 0
    first: _Conflict | None = None
    moving: list[int] = []                 # agents with t < end, ascending
    prev_low: dict[int, int] = {}          # cell -> lowest agent there at t-1

    for t in range(horizon):
        was_moving = moving
        for i in parks_at.get(t, ()):
            v = paths[i][-1]
            lst = parked.setdefault(v, [])
            lst.append(i)
            lst.sort()
            if len(lst) > 1:
                crowded.add(v)
        moving = [i for i in was_moving if t < ends[i]] if t else \
            [i for i in range(len(paths)) if ends[i] > 0]
        active: dict[int, list[int]] = {}
        for i in moving:
            active.setdefault(paths[i][t], []).append(i)
        found: list[_Conflict] = []
        cells = {v for v, lst in active.items() if len(lst) > 1 or v in parked} | crowded
        for v in cells:
            group = sorted(active.get(v, []) + parked.get(v, []))
            j = group[0]
            for i in group[1:]:
                total += 1
                if t >= ends[j]:
                    found.append(_Conflict(t, i, j, "target", v))
                elif t >= ends[i]:
                    found.append(_Conflict(t, j, i, "target", v))
                else:
                    found.append(_Conflict(t, j, i, "vertex", v))
        moves: dict[int, tuple[int, int]] = {}
        if t > 0:
            for i in was_moving:
                p = paths[i]
                u, v = p[t - 1], p[t]
                if u == v:
                    continue
                moves[u] = (i, v)
                # lowest agent on v at t-1: still moving then, or already parked
                j = prev_low.get(v)
                early = [k for k in parked.get(v, ()) if ends[k] <= t - 1]
                if early and (j is None or early[0] < j):
                    j = early[0]
                if j is None or j == i:
                    continue
                if one_robust:
                    # i enters v at t while j was on v at t-1 (covers swaps too)
                    total += 1
                    if t - 1 >= ends[j]:
                        # j rests on v since t-1 at the latest
                        found.append(_Conflict(t - 1, i, j, "target", v))
                        continue
                    found.append(_Conflict(t - 1, min(i, j), max(i, j), "follow", v, u=i))
                elif _pos(paths[j], t) == u and i < j:
                    total += 1
                    found.append(_Conflict(t - 1, i, j, "edge", v, u))
        if no_rotation and not one_robust and t > 0:
            rot = _rotations(moves, t - 1)
            total += len(rot)
            found.extend(rot)
        if first is None and found:
            first = min(found, key=lambda c: (c.t, c.a, c.b, c.kind))
        if pairs is not None:
            pairs.update((c.a, c.b) for c in found)
        prev_low = {v: lst[0] for v, lst in active.items()}
    return total, first


def _branch(c: _Conflict, paths) -> list[list[tuple[int, str, object]]]:
    """Constraints of each child as (agent, kind, data); the first one names the
    agent to replan, any others hold for paths that already satisfy them."""
    if c.kind == "rotation":
        return [[(i, "e", (u, v, c.t))] for i, u, v in c.cycle]
    if c.kind == "target":
        # b rests on v from c.t or earlier and a is on v at c.t or later.  Either
        # b comes to rest only after c.t, or it rests by c.t and a keeps off v
        return [[(c.b, "rest_after", c.t)],
                [(c.a, "r", (c.v, c.t)), (c.b, "finish_by", c.t)]]
    if c.kind == "vertex":
        return [[(c.a, "v", (c.v, c.t))], [(c.b, "v", (c.v, c.t))]]
    if c.kind == "edge":
        # a moves u -> v during t -> t+1, b moves v -> u
        return [[(c.a, "e", (c.u, c.v, c.t))], [(c.b, "e", (c.v, c.u, c.t))]]
    mover = c.u
    other = c.b if mover == c.a else c.a
    return [[(mover, "v", (c.v, c.t + 1))], [(other, "v", (c.v, c.t))]]


@dataclass
class _Node:
    parent: _Node | None
    constraints: tuple           # ((agent, kind, data), ...) added at this node
    paths: list
    lbs: list
    cost: int
    lb: float
    conflicts: int
    first: _Conflict | None
    depth: int = 0

    def constraints_for(self, agent: int, base: Constraints, extra=()) -> Constraints:
        sets = {"v": set(base.vertex), "e": set(base.edge), "r": set(base.after)}
        rest_after, finish_by = base.rest_after, base.finish_by
        node = self
        items = list(extra)
        while node is not None:
            items.extend(node.constraints)
            node = node.parent
        for a, kind, data in items:
            if a != agent:
                continue
            if kind == "rest_after":
                rest_after = max(rest_after, data)
            elif kind == "finish_by":
                finish_by = data if finish_by is None else min(finish_by, data)
            else:
                sets[kind].add(data)
        return Constraints(frozenset(sets["v"]), frozenset(sets["e"]), frozenset(sets["r"]),
                           rest_after, finish_by)


def _path_cost(p: Sequence[int]) -> int:
    return len(p) - 1


def _compile(problem: MapfProblem):
    grid = problem.grid
    res = build_reservation(problem)
    base = Constraints(
        frozenset((grid.cell_id(c), t) for c, t in problem.vertex_constraints),
        frozenset((grid.cell_id(a), grid.cell_id(b), t) for a, b, t in problem.edge_constraints),
    )
    forbidden = frozenset(grid.cell_id(c) for c in problem.forbidden)
    starts = [grid.cell_id(c) for c in problem.starts]
    goals = [grid.cell_id(c) for c in problem.goals]
    max_t = grid.num_free() * (problem.num_agents + 1) + res.horizon + base.horizon()
    return res, base, forbidden, starts, goals, max_t


def _to_cells(grid: GridMap, paths) -> list:
    return [[grid.cell_of(v) for v in p] for p in paths]


def solve_cbs(problem: MapfProblem, node_limit: int | None = None,
              initial: Sequence[Sequence[Cell]] | None = None,
              root_limit: int | None = None) -> MapfSolution:
    """Focal CBS: solution cost is at most ``w`` times the optimal sum of costs.

    ``initial`` replaces the root's paths (the bound then only holds if they are
    within ``w`` of optimal themselves).  ``node_limit`` caps high-level
    expansions and ``root_limit`` the root's conflict count; exceeding either
    raises :class:`MapfTimeout` (:class:`MapfRootLimit` for the latter).

    Raises :class:`MapfTimeout` when ``problem.time_budget`` runs out and
    :class:`MapfUnsolvable` when the search space is exhausted.
    """
    t0 = time.perf_counter()
    deadline = t0 + problem.time_budget
    grid = problem.grid
    res, base, forbidden, starts, goals, max_t = _compile(problem)
    robust = problem.one_robust
    w = problem.w
    stats = {"expansions": 0, "hl_expanded": 0, "hl_generated": 1}
    n_ag = problem.num_agents

    paths: list = [None] * n_ag
    lbs: list = [0.0] * n_ag
    cat = ConflictTable(grid.size, robust)
    for i in range(n_ag):
        if initial is not None:
            paths[i] = [grid.cell_id(c) for c in initial[i]]
            lbs[i] = float(grid.dist_table(goals[i])[starts[i]])
            cat.add(paths[i])
            continue
        out = space_time_search(grid, starts[i], goals[i], res, base, cat, w, max_t,
                                forbidden, deadline, stats, i in problem.strict_rest)
        if out is None:
            raise MapfUnsolvable(f"agent {i} cannot reach its goal")
        paths[i], lbs[i] = out
        cat.add(paths[i])
    n_conf, first = count_conflicts(paths, robust, no_rotation=problem.no_rotation) if n_ag > 1 else (0, None)
    if root_limit is not None and n_conf > root_limit:
        raise MapfRootLimit(f"{n_conf} conflicts at the root")
    root = _Node(None, (), paths, lbs, sum(map(_path_cost, paths)), sum(lbs), n_conf, first)

    # one conflict table for the whole search, holding the paths of ``in_cat``;
    # nodes share most path objects with their parent, so switching is cheap
    in_cat = list(paths)

    def sync(node_paths) -> None:
        for k in range(n_ag):
            if in_cat[k] is not node_paths[k]:
                cat.remove(in_cat[k])
                cat.add(node_paths[k])
                in_cat[k] = node_paths[k]

    def expand(node: _Node, conflict: _Conflict) -> list[_Node]:
        children = []
        sync(node.paths)
        for added in _branch(conflict, node.paths):
            agent = added[0][0]
            cons = node.constraints_for(agent, base, added)
            cat.remove(node.paths[agent])
            try:
                out = space_time_search(grid, starts[agent], goals[agent], res, cons, cat, w, max_t,
                                        forbidden, deadline, stats, agent in problem.strict_rest)
            finally:
                cat.add(node.paths[agent])
            if out is None:
                continue
            new_path, new_lb = out
            paths = list(node.paths)
            paths[agent] = new_path
            lbs = list(node.lbs)
            lbs[agent] = max(lbs[agent], new_lb)
            n_conf, first = count_conflicts(paths, robust, no_rotation=problem.no_rotation)
            children.append(_Node(node, tuple(added), paths, lbs,
                                  node.cost - _path_cost(node.paths[agent]) + _path_cost(new_path),
                                  sum(lbs), n_conf, first, node.depth + 1))
        return children

    queue = FocalQueue(w)
    queue.push(root.lb, (root.conflicts, root.cost, 0), root)
    counter = 0
    while True:
        if time.perf_counter() > deadline:
            raise MapfTimeout("time budget exhausted in high-level search")
        popped = queue.pop()
        if popped is None:
            raise MapfUnsolvable("constraint tree exhausted")
        _, node = popped
        stats["hl_expanded"] += 1
        if node.first is None:
            stats["runtime"] = time.perf_counter() - t0
            return MapfSolution(_to_cells(grid, node.paths), node.lb, stats)
        if node_limit is not None and stats["hl_expanded"] > node_limit:
            raise MapfTimeout("node limit reached")
        children = expand(node, node.first)
        for child in children:
            counter += 1
            stats["hl_generated"] += 1
            queue.push(child.lb, (child.conflicts, child.cost, counter), child)


def solve_prioritized(problem: MapfProblem, order: Sequence[int] | None = None) -> MapfSolution:
    """Plan agents one at a time in ``order``; each path is time-minimal given the
    earlier ones.  Raises :class:`MapfUnsolvable` if some agent has no path."""
    t0 = time.perf_counter()
    deadline = t0 + problem.time_budget
    grid = problem.grid
    res, base, forbidden, starts, goals, max_t = _compile(problem)
    order = list(range(problem.num_agents)) if order is None else list(order)
    if sorted(order) != list(range(problem.num_agents)):
        raise ValueError("order must be a permutation of agent ids")
    stats = {"expansions": 0}
    paths: list = [None] * problem.num_agents
    for rank, i in enumerate(order):
        # lower-priority agents still stand on their starts at t=0
        waiting = [starts[k] for k in order[rank + 1:]]
        for v in waiting:
            res.occ.add(v)
        try:
            out = space_time_search(grid, starts[i], goals[i], res, base, None, 1.0, max_t,
                                    forbidden, deadline, stats, i in problem.strict_rest)
        finally:
            for v in waiting:
                res.occ.discard(v)
        if out is None:
            raise MapfUnsolvable(f"prioritized planning failed for agent {i}")
        paths[i] = out[0]
        res.add(paths[i], hold=True, blocks_goal=True)
    stats["runtime"] = time.perf_counter() - t0
    return MapfSolution(_to_cells(grid, paths), 0.0, stats)


def solve(problem: MapfProblem, prefer: str = "cbs") -> MapfSolution:
    """CBS first, prioritized planning as a fallback on failure or timeout."""
    if prefer == "cbs":
        try:
            return solve_cbs(problem)
        except MapfTimeout:
            pass
        except MapfUnsolvable:
            pass
        return solve_prioritized(problem)
    try:
        return solve_prioritized(problem)
    except MapfUnsolvable:
        return solve_cbs(problem)
