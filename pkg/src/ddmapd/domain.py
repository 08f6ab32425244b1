"""Core data model: grid graph, instances, shelf trajectories, execution logs.

Two decks share the same graph.  Agents collide only with agents and shelves
only with shelves; an agent standing beneath a shelf is always legal.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

Cell = tuple[int, int]
Path = list[Cell]

MOVES = ((-1, 0), (0, -1), (0, 1), (1, 0))


class InvalidInstance(ValueError):
    pass


class StructuralError(ValueError):
    """An execution log whose shape does not match its instance."""


class GridMap:
    """4-neighbour grid; ``blocked`` cells are removed from the graph."""

    def __init__(self, height: int, width: int, blocked: Iterable[Cell] = ()):
        if height <= 0 or width <= 0:
            raise InvalidInstance("grid must be non-empty")
        self.height = height
        self.width = width
        self.blocked = frozenset(blocked)
        for cell in self.blocked:
            if not self.in_bounds(cell):
                raise InvalidInstance(f"blocked cell {cell} out of bounds")
        n = height * width
        # integer-id adjacency for the search code
        self.free = [True] * n
        for r, c in self.blocked:
            self.free[r * width + c] = False
        self.nbrs: list[tuple[int, ...]] = []
        for v in range(n):
            r, c = divmod(v, width)
            out = []
            if self.free[v]:
                for dr, dc in MOVES:
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < height and 0 <= cc < width and self.free[rr * width + cc]:
                        out.append(rr * width + cc)
            self.nbrs.append(tuple(out))
        self._dist_cache: dict[int, list[int]] = {}

    @classmethod
    def from_rows(cls, rows: Sequence[str]) -> GridMap:
        height = len(rows)
        width = len(rows[0]) if rows else 0
        blocked = []
        for r, row in enumerate(rows):
            if len(row) != width:
                raise InvalidInstance(f"row {r} has length {len(row)}, expected {width}")
            for c, ch in enumerate(row):
                if ch not in ".@":
                    raise InvalidInstance(f"unknown map character {ch!r}")
                if ch == "@":
                    blocked.append((r, c))
        return cls(height, width, blocked)

    def rows(self) -> list[str]:
        return ["".join("@" if (r, c) in self.blocked else "." for c in range(self.width))
                for r in range(self.height)]

    @property
    def size(self) -> int:
        return self.height * self.width

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.blocked

    def cell_id(self, cell: Cell) -> int:
        return cell[0] * self.width + cell[1]

    def cell_of(self, v: int) -> Cell:
        return divmod(v, self.width)

    def free_cells(self) -> list[Cell]:
        return [self.cell_of(v) for v in range(self.size) if self.free[v]]

    def num_free(self) -> int:
        return sum(self.free)

    def neighbors(self, cell: Cell) -> list[Cell]:
        return [self.cell_of(u) for u in self.nbrs[self.cell_id(cell)]]

    def adjacent_or_same(self, a: Cell, b: Cell) -> bool:
        return a == b or abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1

    def dist_table(self, goal: int) -> list[int]:
        """BFS distances (by id) to ``goal``; unreachable cells get -1.  Cached."""
        table = self._dist_cache.get(goal)
        if table is None:
            table = bfs_ids(self, goal)
            self._dist_cache[goal] = table
        return table

    def distance(self, a: Cell, b: Cell) -> int:
        d = self.dist_table(self.cell_id(b))[self.cell_id(a)]
        return d if d >= 0 else UNREACHABLE

    def is_connected(self, removed: Iterable[Cell] = ()) -> bool:
        gone = {self.cell_id(c) for c in removed}
        nodes = [v for v in range(self.size) if self.free[v] and v not in gone]
        if not nodes:
            return True
        seen = {nodes[0]}
        queue = deque([nodes[0]])
        while queue:
            v = queue.popleft()
            for u in self.nbrs[v]:
                if u not in seen and u not in gone:
                    seen.add(u)
                    queue.append(u)
        return len(seen) == len(nodes)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, GridMap) and self.height == other.height
                and self.width == other.width and self.blocked == other.blocked)

    def __hash__(self) -> int:
        return hash((self.height, self.width, self.blocked))

    def __repr__(self) -> str:
        return f"GridMap({self.height}x{self.width}, blocked={len(self.blocked)})"


UNREACHABLE = 10 ** 9


def bfs_ids(grid: GridMap, source: int, blocked: frozenset[int] | set[int] = frozenset()) -> list[int]:
    dist = [-1] * grid.size
    if not grid.free[source]:
        return dist
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        d = dist[v] + 1
        for u in grid.nbrs[v]:
            if dist[u] < 0 and u not in blocked:
                dist[u] = d
                queue.append(u)
    return dist


def shortest_path(grid: GridMap, a: Cell, b: Cell, avoid: Iterable[Cell] = ()) -> Path | None:
    """One shortest path from ``a`` to ``b``; ties broken by smallest (row, col)."""
    avoid_ids = {grid.cell_id(c) for c in avoid} - {grid.cell_id(a), grid.cell_id(b)}
    target = grid.cell_id(b)
    dist = bfs_ids(grid, target, avoid_ids)
    v = grid.cell_id(a)
    if dist[v] < 0:
        return None
    path = [a]
    while v != target:
        v = min(u for u in grid.nbrs[v] if dist[u] == dist[v] - 1 and u not in avoid_ids)
        path.append(grid.cell_of(v))
    return path


@dataclass(frozen=True)
class Shelf:
    pickup: Cell
    delivery: Cell

    @property
    def needs_relocation(self) -> bool:
        return self.pickup != self.delivery


@dataclass
class Instance:
    grid: GridMap
    agents: list[Cell]
    shelves: list[Shelf]
    name: str = ""

    def __post_init__(self):
        self.agents = [tuple(a) for a in self.agents]
        self.shelves = [s if isinstance(s, Shelf) else Shelf(tuple(s[0]), tuple(s[1]))
                        for s in self.shelves]

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    @property
    def num_shelves(self) -> int:
        return len(self.shelves)

    @property
    def pickups(self) -> list[Cell]:
        return [s.pickup for s in self.shelves]

    @property
    def deliveries(self) -> list[Cell]:
        return [s.delivery for s in self.shelves]

    def check(self) -> None:
        """Raise :class:`InvalidInstance` on the first broken invariant."""
        if self.num_agents == 0:
            raise InvalidInstance("at least one agent is required")
        if self.num_shelves < self.num_agents:
            raise InvalidInstance(f"need M >= N, got M={self.num_shelves} N={self.num_agents}")
        for what, cells in (("agent start", self.agents), ("pickup", self.pickups),
                            ("delivery", self.deliveries)):
            if len(set(cells)) != len(cells):
                raise InvalidInstance(f"duplicate {what} locations")
            for cell in cells:
                if not self.grid.is_free(cell):
                    raise InvalidInstance(f"{what} {cell} is blocked or out of bounds")
        if not self.grid.is_connected():
            raise InvalidInstance("free cells of the map are not connected")


# ---------------------------------------------------------------- trajectories

def trim_path(path: Sequence[Cell]) -> Path:
    """Drop trailing waits at the goal."""
    out = list(path)
    while len(out) > 1 and out[-1] == out[-2]:
        out.pop()
    return out


def at(path: Sequence[Cell], t: int) -> Cell:
    """Location at ``t`` with the stay-at-the-end padding rule."""
    return path[t] if t < len(path) else path[-1]


@dataclass
class TrajectorySet:
    """Planned timed locations of every shelf, ``paths[j][k]`` = tau_j(k)."""

    paths: list[Path]
    one_robust: bool = False
    safe: bool = False
    w: float | None = None   # suboptimality factor the solver ended up using (0: prioritized)

    def __len__(self) -> int:
        return len(self.paths)

    def __getitem__(self, j: int) -> Path:
        return self.paths[j]

    def lengths(self) -> list[int]:
        return [len(p) - 1 for p in self.paths]

    def total_length(self) -> int:
        return sum(self.lengths())

    def problems(self, instance: Instance) -> list[str]:
        out = []
        if len(self.paths) != instance.num_shelves:
            return [f"expected {instance.num_shelves} trajectories, got {len(self.paths)}"]
        for j, (path, shelf) in enumerate(zip(self.paths, instance.shelves)):
            if not path or path[0] != shelf.pickup or path[-1] != shelf.delivery:
                out.append(f"trajectory {j} does not run from pickup to delivery")
                continue
            for a, b in zip(path, path[1:]):
                if not instance.grid.is_free(b) or not instance.grid.adjacent_or_same(a, b):
                    out.append(f"trajectory {j} makes an illegal step {a}->{b}")
                    break
        for conflict in find_conflicts(self.paths):
            out.append(f"trajectory collision {conflict}")
        if self.one_robust and not is_one_robust(self.paths):
            out.append("trajectories are not 1-robust")
        if self.safe and not is_safe(self.paths, instance.agents):
            out.append("trajectories use an agent start location")
        return out


def is_one_robust(paths: Sequence[Sequence[Cell]]) -> bool:
    """No unit occupies at t+1 a cell that another unit occupied at t."""
    horizon = max((len(p) for p in paths), default=0)
    for t in range(horizon - 1):
        now = {}
        for j, p in enumerate(paths):
            now[at(p, t)] = j
        for j, p in enumerate(paths):
            owner = now.get(at(p, t + 1))
            if owner is not None and owner != j:
                return False
    return True


def is_safe(paths: Sequence[Sequence[Cell]], agent_starts: Iterable[Cell]) -> bool:
    starts = set(agent_starts)
    return not any(cell in starts for p in paths for cell in p)


# ------------------------------------------------------------------ conflicts

@dataclass(frozen=True, order=True)
class Conflict:
    """``kind`` is 'vertex' (both at ``cell`` at ``t``) or 'edge' (swap during t -> t+1)."""

    t: int
    a: int
    b: int
    kind: str
    cell: Cell
    other: Cell | None = None


def collision_check(path_a: Sequence[Cell], path_b: Sequence[Cell]) -> list[Conflict]:
    """Vertex and edge conflicts between two padded timed paths, ordered by time."""
    out = []
    horizon = max(len(path_a), len(path_b))
    for t in range(horizon):
        a0, b0 = at(path_a, t), at(path_b, t)
        if a0 == b0:
            out.append(Conflict(t, 0, 1, "vertex", a0))
        if t + 1 < horizon:
            a1, b1 = at(path_a, t + 1), at(path_b, t + 1)
            if a0 != a1 and a0 == b1 and a1 == b0:
                out.append(Conflict(t, 0, 1, "edge", a0, a1))
    return out


def find_conflicts(paths: Sequence[Sequence[Cell]]) -> list[Conflict]:
    """All pairwise conflicts in a set of padded paths, sorted by (t, a, b, kind)."""
    out = []
    horizon = max((len(p) for p in paths), default=0)
    for t in range(horizon):
        seen: dict[Cell, list[int]] = {}
        for i, p in enumerate(paths):
            c = at(p, t)
            for k in seen.get(c, ()):
                out.append(Conflict(t, k, i, "vertex", c))
            seen.setdefault(c, []).append(i)
        if t + 1 < horizon:
            moves = {}
            for i, p in enumerate(paths):
                a, b = at(p, t), at(p, t + 1)
                if a != b:
                    moves[(a, b)] = i
            for (a, b), i in moves.items():
                k = moves.get((b, a))
                if k is not None and i < k:
                    out.append(Conflict(t, i, k, "edge", a, b))
    return sorted(out)


# -------------------------------------------------------------- execution logs

FREE = -1


@dataclass
class ExecutionLog:
    """What actually happened.

    ``carrying[i][t] == j`` means agent ``i`` holds shelf ``j`` at timestep ``t``
    and the shelf travels with it during ``t -> t+1``.
    """

    agent_paths: list[Path]
    carrying: list[list[int]]
    shelf_paths: list[Path]
    stats: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return max(len(p) for p in self.agent_paths + self.shelf_paths) - 1

    def completion_times(self) -> list[int]:
        return [completion_time(p) for p in self.agent_paths]

    @property
    def makespan(self) -> int:
        return max(self.completion_times(), default=0)

    @property
    def flowtime(self) -> int:
        return sum(self.completion_times())

    def padded(self) -> ExecutionLog:
        """Copy with every sequence extended to the common horizon."""
        T = self.horizon
        return ExecutionLog(
            [p + [p[-1]] * (T + 1 - len(p)) for p in self.agent_paths],
            [list(c) + [FREE] * (T + 1 - len(c)) for c in self.carrying],
            [p + [p[-1]] * (T + 1 - len(p)) for p in self.shelf_paths],
            dict(self.stats),
        )

    def truncated(self, horizon: int) -> ExecutionLog:
        return ExecutionLog([p[:horizon + 1] for p in self.agent_paths],
                            [c[:horizon + 1] for c in self.carrying],
                            [p[:horizon + 1] for p in self.shelf_paths], dict(self.stats))


def completion_time(path: Sequence[Cell]) -> int:
    t = len(path) - 1
    while t > 0 and path[t - 1] == path[-1]:
        t -= 1
    return max(t, 0)


@dataclass(frozen=True)
class Violation:
    kind: str
    t: int
    ids: tuple[int, ...]
    detail: str = ""

    def __str__(self) -> str:
        return f"t={self.t} {self.kind} {self.ids} {self.detail}".rstrip()


@dataclass
class ValidationReport:
    violations: list[Violation]
    makespan: int
    flowtime: int

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]


VIOLATION_KINDS = (
    "wrong_start", "blocked_cell", "agent_teleport", "shelf_teleport",
    "agent_vertex", "agent_edge", "shelf_vertex", "shelf_edge",
    "lift_wrong_cell", "double_carry", "carry_mismatch", "move_uncarried",
    "undelivered", "metric_mismatch",
)


def validate(instance: Instance, log: ExecutionLog, declared: dict | None = None) -> ValidationReport:
    """Check a log against the instance and list every violation found.

    Sequences shorter than the horizon are padded with their last entry (an agent
    that completed stopped moving and carries nothing).  Raises
    :class:`StructuralError` when the log cannot be interpreted at all.
    """
    if len(log.agent_paths) != instance.num_agents or len(log.carrying) != instance.num_agents:
        raise StructuralError("log has a different number of agents than the instance")
    if len(log.shelf_paths) != instance.num_shelves:
        raise StructuralError("log has a different number of shelves than the instance")
    for i, (p, c) in enumerate(zip(log.agent_paths, log.carrying)):
        if not p or len(c) != len(p):
            raise StructuralError(f"agent {i}: path and carrying lists differ in length")
    if any(not p for p in log.shelf_paths):
        raise StructuralError("empty shelf path")

    lg = log.padded()
    grid = instance.grid
    T = lg.horizon
    bad: list[Violation] = []

    for i, p in enumerate(lg.agent_paths):
        if p[0] != instance.agents[i]:
            bad.append(Violation("wrong_start", 0, (i,), f"agent at {p[0]}"))
    for j, p in enumerate(lg.shelf_paths):
        if p[0] != instance.shelves[j].pickup:
            bad.append(Violation("wrong_start", 0, (j,), f"shelf at {p[0]}"))

    for kind, paths in (("agent", lg.agent_paths), ("shelf", lg.shelf_paths)):
        for i, p in enumerate(paths):
            for t, cell in enumerate(p):
                if not grid.is_free(cell):
                    bad.append(Violation("blocked_cell", t, (i,), f"{kind} at {cell}"))
                    break
            for t in range(T):
                if not grid.adjacent_or_same(p[t], p[t + 1]):
                    bad.append(Violation(f"{kind}_teleport", t, (i,), f"{p[t]}->{p[t + 1]}"))
        for c in find_conflicts(paths):
            bad.append(Violation(f"{kind}_{c.kind}", c.t, (c.a, c.b), str(c.cell)))

    for t in range(T + 1):
        holders: dict[int, int] = {}
        for i in range(instance.num_agents):
            j = lg.carrying[i][t]
            if j == FREE:
                continue
            if not 0 <= j < instance.num_shelves:
                raise StructuralError(f"agent {i} carries unknown shelf {j}")
            if j in holders:
                bad.append(Violation("double_carry", t, (holders[j], i), f"shelf {j}"))
            holders[j] = i
            if lg.agent_paths[i][t] != lg.shelf_paths[j][t]:
                bad.append(Violation("lift_wrong_cell", t, (i, j)))
            elif t < T and lg.agent_paths[i][t + 1] != lg.shelf_paths[j][t + 1]:
                bad.append(Violation("carry_mismatch", t, (i, j)))
        if t < T:
            for j, p in enumerate(lg.shelf_paths):
                if p[t] != p[t + 1] and j not in holders:
                    bad.append(Violation("move_uncarried", t, (j,)))

    for j, p in enumerate(lg.shelf_paths):
        if p[T] != instance.shelves[j].delivery:
            bad.append(Violation("undelivered", T, (j,), f"at {p[T]}"))

    report = ValidationReport(bad, lg.makespan, lg.flowtime)
    if declared:
        for key in ("makespan", "flowtime"):
            if key in declared and declared[key] != getattr(report, key):
                bad.append(Violation("metric_mismatch", T, (), f"{key} {declared[key]} != {getattr(report, key)}"))
    return report
