"""Push and Swap: a sequential (one move per timestep) MAPF solver.

Agents are pushed along shortest paths; when an agent is blocked by one that
cannot be pushed away, the pair is taken to a vertex of degree three or more,
exchanged there, and every other agent is put back by replaying the preparatory
moves in reverse.
"""
from __future__ import annotations

import time
from collections import deque

from ..domain import GridMap
from .core import MapfProblem, MapfSolution, MapfTimeout, MapfUnsolvable


class _Board:
    def __init__(self, grid: GridMap, blocked: frozenset[int], starts: list[int]):
        self.grid = grid
        self.blocked = blocked
        self.pos = list(starts)
        self.occ = {v: i for i, v in enumerate(starts)}
        self.moves: list[tuple[int, int, int]] = []   # (agent, from, to)

    def nbrs(self, v: int):
        return [u for u in self.grid.nbrs[v] if u not in self.blocked]

    def move(self, a: int, to: int) -> None:
        frm = self.pos[a]
        assert to not in self.occ and to in self.grid.nbrs[frm]
        del self.occ[frm]
        self.occ[to] = a
        self.pos[a] = to
        self.moves.append((a, frm, to))

    def snapshot(self):
        return list(self.pos), dict(self.occ), len(self.moves)

    def restore(self, snap) -> None:
        self.pos, self.occ, n = list(snap[0]), dict(snap[1]), snap[2]
        del self.moves[n:]

    def path(self, src: int, dst: int, avoid=frozenset()) -> list[int] | None:
        """BFS path ignoring agents; neighbours in id order, so ties go to (row, col)."""
        if src == dst:
            return [src]
        parent = {src: -1}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            for u in self.nbrs(v):
                if u in parent or u in avoid:
                    continue
                parent[u] = v
                if u == dst:
                    out = [u]
                    while parent[out[-1]] != -1:
                        out.append(parent[out[-1]])
                    return out[::-1]
                queue.append(u)
        return None

    def push_to_empty(self, v: int, frozen: set[int]) -> bool:
        """Empty vertex ``v`` by shifting agents toward the nearest blank, never moving
        agents on ``frozen`` vertices."""
        if v not in self.occ:
            return True
        if v in frozen:
            return False
        parent = {v: -1}
        queue = deque([v])
        blank = None
        while queue and blank is None:
            x = queue.popleft()
            for u in self.nbrs(x):
                if u in parent or u in frozen:
                    continue
                parent[u] = x
                if u not in self.occ:
                    blank = u
                    break
                queue.append(u)
        if blank is None:
            return False
        chain = [blank]
        while parent[chain[-1]] != -1:
            chain.append(parent[chain[-1]])
        # chain runs blank -> v; shift occupants one vertex toward the blank
        for k in range(1, len(chain)):
            self.move(self.occ[chain[k]], chain[k - 1])
        return True


def _swap_vertices(board: _Board) -> list[int]:
    return [v for v in range(board.grid.size)
            if board.grid.is_free(board.grid.cell_of(v)) and v not in board.blocked
            and len(board.nbrs(v)) >= 3]


def _multipush(board: _Board, r: int, s: int, x: int) -> bool:
    """Bring the adjacent pair (r, s) so that one of them stands on ``x`` and the
    other on a neighbour of ``x``."""
    pr, ps = board.pos[r], board.pos[s]
    to_x = board.path(pr, x)
    if to_x is None:
        return False
    if len(to_x) > 1 and to_x[1] == ps:
        lead, trail = s, r
        route = board.path(ps, x, avoid={pr})
    else:
        lead, trail = r, s
        route = board.path(pr, x, avoid={ps})
    if route is None:
        return False
    for y in route[1:]:
        if y in board.occ:
            if not board.push_to_empty(y, {board.pos[lead], board.pos[trail]}):
                return False
        prev = board.pos[lead]
        board.move(lead, y)
        board.move(trail, prev)
    return True


def _clear(board: _Board, x: int, keep: int) -> list[int] | None:
    """Make two neighbours of ``x`` (other than ``keep``) empty."""
    cand = [u for u in board.nbrs(x) if u != keep]
    empty = [u for u in cand if u not in board.occ]
    if len(empty) >= 2:
        return empty[:2]
    for u in cand:
        if u in empty:
            continue
        snap = board.snapshot()
        if board.push_to_empty(u, {x, keep, *empty}):
            empty.append(u)
            if len(empty) >= 2:
                return empty[:2]
        else:
            board.restore(snap)
    return None


def _swap(board: _Board, r: int, s: int) -> bool:
    """Exchange adjacent agents r and s, leaving everyone else where they were."""
    origin = board.pos[r]
    verts = _swap_vertices(board)
    dist = board.grid.dist_table(origin)
    verts.sort(key=lambda v: (dist[v] if dist[v] >= 0 else 10**9, v))
    for x in verts:
        snap = board.snapshot()
        start = len(board.moves)
        if not _multipush(board, r, s, x):
            board.restore(snap)
            continue
        on_x = board.occ[x]
        other = s if on_x == r else r
        y = board.pos[other]
        spots = _clear(board, x, y)
        if spots is None:
            board.restore(snap)
            continue
        prep = board.moves[start:]
        n1, n2 = spots
        a, b = on_x, other
        board.move(a, n1)
        board.move(b, x)
        board.move(b, n2)
        board.move(a, x)
        board.move(a, y)
        board.move(b, x)
        swap_id = {r: s, s: r}
        for agent, frm, to in reversed(prep):
            board.move(swap_id.get(agent, agent), frm)
        return True
    return False


def _route_agent(board: _Board, r: int, goal: int, done: set[int], budget: int) -> None:
    while board.pos[r] != goal:
        if len(board.moves) > budget:
            raise MapfUnsolvable("push and swap exceeded its move budget")
        route = board.path(board.pos[r], goal)
        if route is None:
            raise MapfUnsolvable("goal unreachable")
        nxt = route[1]
        if nxt not in board.occ:
            board.move(r, nxt)
            continue
        frozen = {board.pos[a] for a in done} | {board.pos[r]}
        snap = board.snapshot()
        if board.push_to_empty(nxt, frozen):
            board.move(r, nxt)
            continue
        board.restore(snap)
        if not _swap(board, r, board.occ[nxt]):
            raise MapfUnsolvable("no vertex to swap at")


def solve_push_and_swap(problem: MapfProblem) -> MapfSolution:
    """Sequential solution: exactly one agent moves per timestep, so the result is
    1-robust.  ``solution.segments`` lists maximal runs of consecutive moves made by
    one agent as (agent, first step, last step)."""
    t0 = time.perf_counter()
    grid = problem.grid
    if problem.frozen or problem.vertex_constraints or problem.edge_constraints:
        raise ValueError("push and swap does not take timed constraints")
    blocked = frozenset(grid.cell_id(c) for c in problem.forbidden)
    starts = [grid.cell_id(c) for c in problem.starts]
    goals = [grid.cell_id(c) for c in problem.goals]
    if any(v in blocked for v in starts + goals):
        raise MapfUnsolvable("a start or goal is a forbidden cell")
    n_vertices = grid.num_free() - len(blocked)
    if n_vertices - len(starts) < 2:
        raise MapfUnsolvable("push and swap needs at least two blank vertices")
    board = _Board(grid, blocked, starts)
    budget = 50 * n_vertices * max(1, len(starts)) ** 2
    deadline = t0 + problem.time_budget
    done: set[int] = set()
    pending = list(range(len(starts)))
    rounds = 0
    while pending:
        if time.perf_counter() > deadline:
            raise MapfTimeout("time budget exhausted in push and swap")
        rounds += 1
        if rounds > 10 * len(starts) + 10:
            raise MapfUnsolvable("push and swap did not settle")
        for r in pending:
            _route_agent(board, r, goals[r], done, budget)
            done.add(r)
        # swaps may have displaced finished agents; send them back
        pending = [a for a in sorted(done) if board.pos[a] != goals[a]]
        for a in pending:
            done.discard(a)
    paths = [[grid.cell_of(v)] for v in starts]
    T = len(board.moves)
    cur = [grid.cell_of(v) for v in starts]
    for step, (agent, _, to) in enumerate(board.moves):
        cur[agent] = grid.cell_of(to)
        for i in range(len(starts)):
            paths[i].append(cur[i])
    segments: list[tuple[int, int, int]] = []
    for step, (agent, _, _) in enumerate(board.moves):
        if segments and segments[-1][0] == agent and segments[-1][2] == step - 1:
            segments[-1] = (agent, segments[-1][1], step)
        else:
            segments.append((agent, step, step))
    for p in paths:
        while len(p) > 1 and p[-1] == p[-2]:
            p.pop()
    stats = {"moves": T, "runtime": time.perf_counter() - t0}
    return MapfSolution(paths, 0.0, stats, segments)
