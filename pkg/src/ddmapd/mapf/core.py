"""Problem/solution types and the single-agent space-time search shared by all solvers.

Internally cells are integer ids (``row * width + col``); the public types use
(row, col) tuples.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..domain import Cell, GridMap, Path


class MapfError(Exception):
    pass


class MapfTimeout(MapfError):
    pass


class MapfRootLimit(MapfTimeout):
    """The initial solution already has more conflicts than allowed."""


class MapfUnsolvable(MapfError):
    pass


@dataclass
class FrozenPath:
    """A timed path (t = 0, 1, ...) that planned agents must steer around.

    ``hold``: the unit stays on its last cell forever.
    ``blocks_goal``: a planned agent may not come to rest on a cell this path
    visits afterwards.  Turned off for units whose later positions are only a
    forecast that is re-planned before it can matter.
    """

    path: Path
    hold: bool = True
    blocks_goal: bool = True


@dataclass
class MapfProblem:
    grid: GridMap
    starts: list[Cell]
    goals: list[Cell]
    frozen: list[FrozenPath] = field(default_factory=list)
    vertex_constraints: set[tuple[Cell, int]] = field(default_factory=set)
    edge_constraints: set[tuple[Cell, Cell, int]] = field(default_factory=set)
    one_robust: bool = False
    forbidden: frozenset[Cell] = frozenset()
    w: float = 1.0
    time_budget: float = 60.0
    # agents whose resting goal must stay clear of every frozen path, even those
    # added with blocks_goal=False
    strict_rest: frozenset[int] = frozenset()
    # forbid three or more agents moving around a cycle in lock step
    no_rotation: bool = False

    def __post_init__(self):
        self.starts = [tuple(s) for s in self.starts]
        self.goals = [tuple(g) for g in self.goals]
        if len(self.starts) != len(self.goals):
            raise ValueError("starts and goals differ in length")
        if len(set(self.starts)) != len(self.starts):
            raise ValueError("starts must be pairwise distinct")
        if len(set(self.goals)) != len(self.goals):
            raise ValueError("goals must be pairwise distinct")
        if self.w < 1:
            raise ValueError("suboptimality factor must be >= 1")
        for c in self.starts + self.goals:
            if not self.grid.is_free(c):
                raise ValueError(f"cell {c} is blocked")

    @property
    def num_agents(self) -> int:
        return len(self.starts)


@dataclass
class MapfSolution:
    paths: list[Path]
    lower_bound: float = 0.0
    stats: dict = field(default_factory=dict)
    # sequential solvers: (agent, first step, last step) runs of consecutive moves
    segments: list[tuple[int, int, int]] | None = None

    @property
    def cost(self) -> int:
        return sum(len(p) - 1 for p in self.paths)

    @property
    def makespan(self) -> int:
        return max((len(p) - 1 for p in self.paths), default=0)


# ----------------------------------------------------------------- reservations

class Reservation:
    """Space-time occupancy of frozen units plus global constraints."""

    def __init__(self, grid: GridMap, one_robust: bool = False):
        self.n = grid.size
        self.one_robust = one_robust
        self.occ: set[int] = set()          # t * n + v
        self.moves: set[tuple[int, int, int]] = set()   # (t, u, v): u -> v during t -> t+1
        self.hold_from: dict[int, int] = {}  # v -> t0, occupied for all t >= t0
        self.goal_block: dict[int, int] = {}  # v -> last t a goal-blocking unit is there
        self.last_seen: dict[int, int] = {}   # v -> last t any unit is there
        self.horizon = 0

    def add(self, path_ids: Sequence[int], hold: bool = True, blocks_goal: bool = True) -> None:
        n = self.n
        for t, v in enumerate(path_ids):
            self.occ.add(t * n + v)
            if t + 1 < len(path_ids) and path_ids[t + 1] != v:
                self.moves.add((t, v, path_ids[t + 1]))
        last = len(path_ids) - 1
        end = path_ids[-1]
        if hold:
            prev = self.hold_from.get(end)
            self.hold_from[end] = last if prev is None else min(prev, last)
        for t, v in enumerate(path_ids):
            if self.last_seen.get(v, -1) < t:
                self.last_seen[v] = t
            if blocks_goal and self.goal_block.get(v, -1) < t:
                self.goal_block[v] = t
        self.horizon = max(self.horizon, last + 1)

    def occupied(self, v: int, t: int) -> bool:
        if t < 0:
            return False
        if t * self.n + v in self.occ:
            return True
        h = self.hold_from.get(v)
        return h is not None and t >= h

    def blocked_move(self, u: int, v: int, t: int) -> bool:
        """True if moving (or waiting, when u == v) from u at t to v at t+1 hits a frozen unit."""
        if self.occupied(v, t + 1):
            return True
        if u != v and (t, v, u) in self.moves:
            return True
        if self.one_robust:
            if u != v and self.occupied(v, t):
                return True
            if self.occupied(v, t + 2):
                return True
        return False

    def earliest_rest(self, v: int, strict: bool = False) -> float:
        """First time a unit may arrive at ``v`` and stay forever.  Units added
        with ``blocks_goal=False`` only count when ``strict``."""
        if v in self.hold_from:
            return float("inf")
        last = (self.last_seen if strict else self.goal_block).get(v)
        return 0 if last is None else last + 1


def build_reservation(problem: MapfProblem) -> Reservation:
    grid = problem.grid
    res = Reservation(grid, problem.one_robust)
    for fp in problem.frozen:
        res.add([grid.cell_id(c) for c in fp.path], fp.hold, fp.blocks_goal)
    return res


# ------------------------------------------------------------------ focal queue

class FocalQueue:
    """Open/focal pair: pops the item with the smallest secondary key among items whose
    primary value is within ``w`` times the smallest primary value still queued."""

    def __init__(self, w: float = 1.0):
        self.w = w
        self._open: list = []
        self._pending: list = []
        self._focal: list = []
        self._alive: dict[int, tuple] = {}
        self._ids = itertools.count()
        self._bound = -1.0

    def __len__(self) -> int:
        return len(self._alive)

    def push(self, f: float, key: tuple, item) -> int:
        i = next(self._ids)
        self._alive[i] = (f, key, item)
        heapq.heappush(self._open, (f, i))
        if f <= self._bound:
            heapq.heappush(self._focal, (key, i))
        else:
            heapq.heappush(self._pending, (f, i))
        return i

    def discard(self, i: int) -> None:
        self._alive.pop(i, None)

    def min_primary(self) -> float | None:
        op = self._open
        while op and op[0][1] not in self._alive:
            heapq.heappop(op)
        return op[0][0] if op else None

    def pop(self):
        """Returns (f, item) or None when empty."""
        fmin = self.min_primary()
        if fmin is None:
            return None
        bound = fmin * self.w
        if bound > self._bound:
            self._bound = bound
            pend = self._pending
            while pend and pend[0][0] <= bound:
                _, i = heapq.heappop(pend)
                if i in self._alive:
                    heapq.heappush(self._focal, (self._alive[i][1], i))
        focal = self._focal
        while focal:
            _, i = heapq.heappop(focal)
            entry = self._alive.pop(i, None)
            if entry is not None:
                return entry[0], entry[2]
        # only reachable if fmin dropped below an earlier bound; fall back to open order
        _, i = heapq.heappop(self._open)
        entry = self._alive.pop(i)
        return entry[0], entry[2]


# ------------------------------------------------------------ low-level search

@dataclass
class Constraints:
    """Per-agent constraints from the high-level search."""

    vertex: frozenset = frozenset()   # (v, t)
    edge: frozenset = frozenset()     # (u, v, t)
    after: frozenset = frozenset()    # (v, t): v is off limits from t on
    rest_after: int = -1              # may come to rest on the goal only after this
    finish_by: int | None = None      # must be resting on the goal by this time

    def last_at(self, v: int) -> int:
        return max((t for (c, t) in self.vertex if c == v), default=-1)

    def horizon(self) -> int:
        return max([t for _, t in self.vertex] + [t + 1 for _, _, t in self.edge]
                   + [t for _, t in self.after] + [self.rest_after + 1], default=0)

    def closed_from(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for v, t in self.after:
            if t < out.get(v, t + 1):
                out[v] = t
        return out


class ConflictTable:
    """Occupancy of the other agents' current paths, used to break ties toward
    fewer conflicts."""

    def __init__(self, n: int, one_robust: bool = False):
        self.n = n
        self.one_robust = one_robust
        self.occ: dict[int, int] = {}
        self.hold: dict[int, int] = {}   # v -> earliest t of a resting agent
        self.rests: dict[int, list[int]] = {}
        self.visits: dict[int, list[int]] = {}
        self.lengths: dict[int, int] = {}   # path length -> number of paths
        self.horizon = 0

    @classmethod
    def from_paths(cls, n: int, paths: Iterable[Sequence[int] | None], one_robust: bool = False):
        table = cls(n, one_robust)
        for p in paths:
            if p is not None:
                table.add(p)
        return table

    def add(self, p: Sequence[int]) -> None:
        n = self.n
        occ = self.occ
        visits = self.visits
        for t, v in enumerate(p):
            k = t * n + v
            occ[k] = occ.get(k, 0) + 1
            visits.setdefault(v, []).append(t)
        last = len(p) - 1
        self.rests.setdefault(p[-1], []).append(last)
        if self.hold.get(p[-1], last + 1) > last:
            self.hold[p[-1]] = last
        self.lengths[len(p)] = self.lengths.get(len(p), 0) + 1
        self.horizon = max(self.horizon, len(p))

    def remove(self, p: Sequence[int]) -> None:
        n = self.n
        for t, v in enumerate(p):
            k = t * n + v
            c = self.occ[k] - 1
            if c:
                self.occ[k] = c
            else:
                del self.occ[k]
            self.visits[v].remove(t)
        rest = self.rests[p[-1]]
        rest.remove(len(p) - 1)
        if rest:
            self.hold[p[-1]] = min(rest)
        else:
            del self.rests[p[-1]]
            del self.hold[p[-1]]
        k = self.lengths[len(p)] - 1
        if k:
            self.lengths[len(p)] = k
        else:
            del self.lengths[len(p)]
            if len(p) == self.horizon:
                self.horizon = max(self.lengths, default=0)

    def after(self, v: int, t: int) -> int:
        """Conflicts an agent parked on v from t on would have with the table."""
        c = sum(1 for x in self.visits.get(v, ()) if x > t)
        return c + (1 if v in self.hold else 0)

    def count(self, u: int, v: int, t: int) -> int:
        n = self.n
        occ = self.occ
        c = occ.get((t + 1) * n + v, 0)
        h = self.hold.get(v)
        if h is not None and h <= t + 1:
            c += 1
        if u != v and occ.get(t * n + v) and occ.get((t + 1) * n + u):
            c += 1
        if self.one_robust and u != v:
            if occ.get(t * n + v):          # entering a cell someone just left
                c += 1
            if occ.get((t + 1) * n + u):    # someone entering the cell we leave
                c += 1
        return c


def _reconstruct(nodes, idx) -> list[int]:
    out = []
    while idx >= 0:
        v, _, parent = nodes[idx][0], nodes[idx][1], nodes[idx][3]
        out.append(v)
        idx = parent
    out.reverse()
    return out


def space_time_search(
    grid: GridMap,
    start: int,
    goal: int,
    res: Reservation,
    cons: Constraints = Constraints(),
    cat: ConflictTable | None = None,
    w: float = 1.0,
    max_t: int | None = None,
    forbidden: frozenset[int] | set[int] = frozenset(),
    deadline: float | None = None,
    stats: dict | None = None,
    strict_rest: bool = False,
) -> tuple[list[int], float] | None:
    """Focal space-time A* from ``start`` at t=0 to rest at ``goal``.

    Returns ``(path, lower_bound)`` where the path ends on the first time the agent
    may stay at the goal forever, or ``None`` if no such path exists within ``max_t``.
    With ``w == 1`` the path is time-minimal.
    """
    h = grid.dist_table(goal)
    if h[start] < 0 or start in forbidden:
        return None
    if res.occupied(start, 0) or (start, 0) in cons.vertex:
        return None
    closed = cons.closed_from()
    if goal in closed or closed.get(start, 1) <= 0:
        return None
    goal_min = max(res.earliest_rest(goal, strict_rest), cons.last_at(goal) + 1, cons.rest_after + 1)
    if goal_min == float("inf"):
        return None
    finish_by = cons.finish_by
    if finish_by is not None and max(goal_min, h[start]) > finish_by:
        return None
    static_after = max(res.horizon, cons.horizon(), cat.horizon if cat else 0) + 2
    if max_t is None:
        max_t = grid.num_free() * 2 + static_after
    nbrs = grid.nbrs
    vcons, econs = cons.vertex, cons.edge
    robust = res.one_robust

    # node: (v, t, conflicts, parent)
    nodes: list[tuple[int, int, int, int]] = []
    best: dict[tuple[int, int], tuple[int, int, int]] = {}   # state -> (t, conflicts, queue id)
    q = FocalQueue(w)
    f0 = max(h[start], goal_min)
    nodes.append((start, 0, 0, -1))
    best[(start, 0)] = (0, 0, q.push(f0, (0, f0, 0, 0), 0))
    expanded = 0
    expanded_states: set = set()
    while True:
        popped = q.pop()
        if popped is None:
            break
        f, idx = popped
        v, t, conf, parent = nodes[idx]
        if parent < -1:
            # parked copy of a goal node, see below
            if stats is not None:
                stats["expansions"] = stats.get("expansions", 0) + expanded
            lb = q.min_primary()
            return _reconstruct(nodes, -2 - parent), min(f, lb) if lb is not None else f
        key = (v, t if t < static_after else static_after)
        if key in expanded_states:
            continue
        expanded_states.add(key)
        expanded += 1
        if deadline is not None and expanded % 512 == 0 and time.perf_counter() > deadline:
            if stats is not None:
                stats["expansions"] = stats.get("expansions", 0) + expanded
            raise MapfTimeout("time budget exhausted in low-level search")
        if v == goal and t >= goal_min and cat is not None:
            # parking here clashes with later visits of other agents; queue a
            # parked copy that carries those conflicts and keep searching
            extra = cat.after(v, t)
            if extra:
                nodes.append((v, t, conf + extra, -2 - idx))
                q.push(f, (conf + extra, f, -t, len(nodes)), len(nodes) - 1)
                extra = -1
        else:
            extra = 0
        if v == goal and t >= goal_min and extra == 0:
            if stats is not None:
                stats["expansions"] = stats.get("expansions", 0) + expanded
            lb = q.min_primary()
            return _reconstruct(nodes, idx), min(f, lb) if lb is not None else f
        nt = t + 1
        if nt > max_t:
            continue
        for u in (*nbrs[v], v):
            if u in forbidden:
                continue
            if (u, nt) in vcons or (v, u, t) in econs:
                continue
            if closed and closed.get(u, nt + 1) <= nt:
                continue
            if res.blocked_move(v, u, t):
                continue
            hu = h[u]
            if hu < 0 or (finish_by is not None and nt + hu > finish_by):
                continue
            nkey = (u, nt if nt < static_after else static_after)
            if nkey in expanded_states:
                continue
            nc = conf + (cat.count(v, u, t) if cat is not None else 0)
            prev = best.get(nkey)
            if prev is not None and (prev[0] < nt or (prev[0] == nt and prev[1] <= nc)):
                continue
            if prev is not None:
                q.discard(prev[2])
            nf = nt + hu
            if nf < goal_min:
                nf = goal_min
            nodes.append((u, nt, nc, idx))
            best[nkey] = (nt, nc, q.push(nf, (nc, nf, -nt, len(nodes)), len(nodes) - 1))
    if stats is not None:
        stats["expansions"] = stats.get("expansions", 0) + expanded
    return None
