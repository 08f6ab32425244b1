"""The decomposition planner: shelves get collision-free trajectories first, agents
then execute trajectory segments while a dependency graph keeps the execution
collision-free.

Per timestep: ``update_states`` (agents pick up, drop or finish shelves), then
``assign_and_plan`` whenever some agent's state changed, then ``step_world``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

from .assignment import SENTINEL, assignment_cost, hungarian
from .depgraph import DependencyGraph
from .domain import FREE, Cell, ExecutionLog, Instance, Path, TrajectorySet, bfs_ids, is_one_robust, is_safe
from .mapf import (
    FrozenPath, MapfError, MapfProblem, MapfRootLimit, MapfTimeout, MapfUnsolvable,
    retime_one_robust, solve_cbs, solve_prioritized,
)

ACTIVE, IDLE = "active", "free"


class Failure(Exception):
    """Planner gave up.  ``reason``: 'a' trajectory solver timeout, 'b' a soft
    dependency cycle longer than the number of agents, 'c' free-agent planning failed."""

    def __init__(self, reason: str, message: str = ""):
        super().__init__(f"({reason}) {message}")
        self.reason = reason
        self.message = message


@dataclass
class DecompConfig:
    w: float = 1.2                 # suboptimality factor for every MAPF call
    k: float = 0                   # look-ahead horizon; 0 = off, math.inf = unbounded
    one_robust: bool = False       # 1-robust shelf trajectories
    safe: bool = False             # shelf trajectories avoid agent starts
    time_budget: float = 60.0      # per MAPF call, seconds
    seed: int = 0
    max_steps: int | None = None

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.w < 1:
            raise ValueError("w must be >= 1")


ESCALATION = (1.5, 2.0, 3.0)
ESCALATION_NODES = 100   # high-level expansions before the next attempt


def _shelf_attempts(problem: MapfProblem):
    """(label, factor, solver) in the order they are tried.  A solver takes the
    time it may use and returns paths or raises a MAPF error."""
    w = problem.w
    looser = [f for f in ESCALATION if f > w]

    def direct(f, limit=True):
        def go(budget):
            kw = {"node_limit": ESCALATION_NODES} if limit else {}
            if limit:
                kw["root_limit"] = 2 * problem.num_agents
            return solve_cbs(replace(problem, w=f, time_budget=budget), **kw).paths
        return go

    def retimed(budget):
        sol = solve_cbs(replace(problem, one_robust=False, no_rotation=True, time_budget=budget))
        paths = retime_one_robust(sol.paths)
        if paths is None:
            raise MapfUnsolvable("visit order could not be retimed")
        return paths

    factors = [w] + looser
    out = [("cbs-capped", f, direct(f)) for f in factors]
    if problem.one_robust:
        out.append(("retimed", w, retimed))
    out.append(("cbs", factors[-1], direct(factors[-1], False)))
    out.append(("prioritized", 0, lambda budget: solve_prioritized(
        replace(problem, time_budget=budget)).paths))
    return out


def plan_shelf_trajectories(instance: Instance, config: DecompConfig) -> TrajectorySet:
    """One MAPF call over all shelves (pickup -> delivery).

    Most shelves stand still, so the sum of costs is small and a tight factor
    can stall the search.  Each attempt that fails within its share of the
    budget hands over to the next: looser factors with a node limit (dropped
    once a root turns out too crowded), then the loosest without one, then
    prioritized planning.  In 1-robust mode a
    plain rotation-free solution retimed to be 1-robust comes before the
    unlimited search; it scales much further in crowded layouts.  The result's
    ``w`` is the factor that succeeded (0 when no bound applies).
    """
    problem = MapfProblem(
        instance.grid, instance.pickups, instance.deliveries,
        one_robust=config.one_robust,
        forbidden=frozenset(instance.agents) if config.safe else frozenset(),
        w=config.w, time_budget=config.time_budget,
    )
    deadline = time.perf_counter() + config.time_budget
    attempts = _shelf_attempts(problem)
    paths = None
    errors = []
    crowded_root = False
    for label, f, solver in attempts:
        left = deadline - time.perf_counter()
        if left <= 0:
            break
        if label == "cbs-capped" and crowded_root:
            continue   # a looser factor barely thins out the root's conflicts
        budget = left * {"cbs-capped": 0.25, "retimed": 0.75, "cbs": 0.85}.get(label, 1.0)
        try:
            paths = solver(budget)
            used = f if label != "prioritized" else 0
            break
        except (MapfTimeout, MapfUnsolvable, ValueError) as exc:
            crowded_root |= isinstance(exc, MapfRootLimit)
            errors.append(f"{label} w={f}: {exc}")
    if paths is None:
        raise Failure("a", "shelf trajectories: " + "; ".join(errors[-2:]))
    return TrajectorySet(
        paths,
        one_robust=is_one_robust(paths),
        safe=is_safe(paths, instance.agents),
        w=used,
    )


# ------------------------------------------------------------------------- world

class World:
    """Agent states, shelf steps and free-agent paths at the current timestep."""

    def __init__(self, instance: Instance, trajectories: Sequence[Path], dep: DependencyGraph):
        self.instance = instance
        self.traj = trajectories
        self.dep = dep
        n = instance.num_agents
        self.loc: list[Cell] = list(instance.agents)
        self.typ: list[str] = [IDLE] * n
        self.shelf: list[int | None] = [None] * n
        self.path: list[Path] = [[c] for c in self.loc]   # free agents; path[0] is now
        self.t = 0

    def copy(self) -> "World":
        w = World.__new__(World)
        w.instance, w.traj, w.dep = self.instance, self.traj, self.dep.copy()
        w.loc, w.typ, w.shelf = list(self.loc), list(self.typ), list(self.shelf)
        w.path = list(self.path)
        w.t = self.t
        return w

    @property
    def num_agents(self) -> int:
        return len(self.loc)

    def shelf_loc(self, j: int) -> Cell:
        return self.traj[j][self.dep.steps[j]]

    def carriers(self) -> dict[int, int]:
        return {self.shelf[i]: i for i in range(self.num_agents) if self.typ[i] == ACTIVE}

    def snapshot(self) -> list[tuple[str, int | None]]:
        return list(zip(self.typ, self.shelf))

    def all_completed(self) -> bool:
        return all(self.dep.is_completed(j) for j in range(self.dep.num_shelves))

    def remaining(self, i: int) -> Path:
        j = self.shelf[i]
        return self.traj[j][self.dep.steps[j]:]


def find_no_move(world: World, a_sc: Sequence[int]) -> set[int]:
    """Agents of ``a_sc`` whose softly constrained shelves cannot advance this step.

    Each shelf in ``a_sc`` waits on exactly one other shelf, so following these
    links gives chains and cycles.  Cycles move together; a chain moves iff the
    shelf at its end is carried by an active agent outside ``a_sc``.
    """
    dep = world.dep
    by_shelf = {world.shelf[a]: a for a in a_sc}
    succ = {j: dep.next_dep(j)[0] for j in by_shelf}
    carriers = world.carriers()
    status: dict[int, bool] = {}
    for start in sorted(by_shelf):
        seq: list[int] = []
        pos: dict[int, int] = {}
        cur = start
        while cur in by_shelf and cur not in status and cur not in pos:
            pos[cur] = len(seq)
            seq.append(cur)
            cur = succ[cur]
        if cur in status:
            ok = status[cur]
        elif cur in pos:
            ok = True
        else:
            holder = carriers.get(cur)
            ok = holder is not None and holder not in a_sc
        for j in seq:
            status[j] = ok
    return {by_shelf[j] for j, ok in status.items() if not ok}


def update_states(world: World) -> bool:
    """Agent state transitions for the current timestep.  Returns True if any
    agent's type or shelf changed."""
    before = world.snapshot()
    dep = world.dep
    a_sc: list[int] = []
    for i in range(world.num_agents):
        j = world.shelf[i]
        if j is None:
            continue
        if world.typ[i] == ACTIVE and dep.is_completed(j):
            world.shelf[i] = None
            world.typ[i] = IDLE
            continue
        n_deps = dep.num_deps(j)
        soft = n_deps == 1 and dep.soft_dep(j)
        if world.typ[i] == IDLE:
            if world.loc[i] != world.shelf_loc(j):
                continue
            if soft:
                a_sc.append(i)
            elif n_deps >= 1:
                world.shelf[i] = None
            else:
                world.typ[i] = ACTIVE
        else:
            if soft:
                a_sc.append(i)
            elif n_deps >= 1:
                world.shelf[i] = None
                world.typ[i] = IDLE
    if a_sc:
        no_move = find_no_move(world, a_sc)
        for i in a_sc:
            if i in no_move:
                world.shelf[i] = None
                world.typ[i] = IDLE
            else:
                world.typ[i] = ACTIVE
    for i in range(world.num_agents):
        if world.typ[i] == ACTIVE:
            world.path[i] = [world.loc[i]]
    return world.snapshot() != before


def step_world(world: World) -> bool:
    """Advance one timestep.  Returns True if anything moved."""
    moved = False
    for i in range(world.num_agents):
        if world.typ[i] == ACTIVE:
            j = world.shelf[i]
            world.dep.advance(j)
            nxt = world.shelf_loc(j)
            moved = True   # a wait entry is still progress along the trajectory
            world.loc[i] = nxt
            world.path[i] = [nxt]
        else:
            p = world.path[i]
            if len(p) > 1:
                p = p[1:]
                world.path[i] = p
                moved |= p[0] != world.loc[i]
                world.loc[i] = p[0]
    world.t += 1
    return moved


# ------------------------------------------------------------------ assignment

@dataclass
class _Planner:
    world: World
    config: DecompConfig
    stats: dict = field(default_factory=dict)

    # ---- candidates
    def _taken(self, assigned: dict[int, int], reserved: dict[int, int]) -> set[int]:
        w = self.world
        taken = {w.shelf[i] for i in range(w.num_agents) if w.typ[i] == ACTIVE}
        return taken | set(assigned.values()) | set(reserved.values())

    def _open_shelves(self, taken: set[int]) -> list[int]:
        dep = self.world.dep
        return [j for j in range(dep.num_shelves) if j not in taken and not dep.is_completed(j)]

    def _executable_now(self, shelves: list[int]) -> dict[int, int]:
        w = self.world
        dep = w.dep
        carriers = w.carriers()
        out = {}
        for j in shelves:
            n = dep.num_deps(j)
            if n == 0:
                out[j] = 0
            elif n == 1 and dep.soft_dep(j) and dep.next_dep(j)[0] in carriers:
                out[j] = 0
        return out

    def _executable_later(self, shelves: list[int], planned: dict[int, Path],
                          assigned: dict[int, int]) -> dict[int, int]:
        """Let actives and planned free agents play out; report the shelves that
        become executable first, with the time they do."""
        if not shelves:
            return {}
        sim = self.world.copy()
        for i in range(sim.num_agents):
            if sim.typ[i] != ACTIVE:
                sim.shelf[i] = assigned.get(i)
                sim.path[i] = planned.get(i, [sim.loc[i]])
        cap = max([len(sim.remaining(i)) for i in range(sim.num_agents) if sim.typ[i] == ACTIVE]
                  + [len(p) for p in planned.values()] + [1])
        cap = cap + sim.instance.num_agents + 2
        for tau in range(1, cap + 1):
            moved = step_world(sim)
            changed = update_states(sim)
            found = {j: tau for j in shelves if sim.dep.num_deps(j) == 0}
            if found:
                return found
            if not moved and not changed:
                break
        return {}

    def _cycles(self, shelves: list[int]) -> dict[int, int]:
        dep = self.world.dep
        pool = set(shelves)
        succ = {}
        for j in shelves:
            if dep.num_deps(j) == 1 and dep.soft_dep(j):
                j2 = dep.next_dep(j)[0]
                if j2 in pool:
                    succ[j] = j2
        on_cycle: set[int] = set()
        done: set[int] = set()
        for start in sorted(succ):
            seq, pos, cur = [], {}, start
            while cur in succ and cur not in done and cur not in pos:
                pos[cur] = len(seq)
                seq.append(cur)
                cur = succ[cur]
            if cur in pos:
                cycle = seq[pos[cur]:]
                if len(cycle) > self.world.num_agents:
                    raise Failure("b", f"soft dependency cycle of {len(cycle)} shelves")
                on_cycle.update(cycle)
            done.update(seq)
        return {j: 0 for j in sorted(on_cycle)}

    # ---- look-ahead
    def _future_agents(self) -> list[tuple[int, int, Cell]]:
        """(agent, time it becomes free, where) for actives freed within the horizon."""
        k = self.config.k
        w = self.world
        if k <= 0 or not any(t == ACTIVE for t in w.typ):
            return []
        sim = w.copy()
        for i in range(sim.num_agents):
            if sim.typ[i] != ACTIVE:
                sim.shelf[i] = None
                sim.path[i] = [sim.loc[i]]
        horizon = max(len(sim.remaining(i)) for i in range(sim.num_agents)
                      if sim.typ[i] == ACTIVE) + 1
        if k != math.inf:
            horizon = min(horizon, int(k))
        out = []
        seen = set()
        for tau in range(1, horizon + 1):
            step_world(sim)
            update_states(sim)
            for i in range(sim.num_agents):
                if w.typ[i] == ACTIVE and i not in seen and sim.typ[i] != ACTIVE:
                    seen.add(i)
                    out.append((i, tau, sim.loc[i]))
            if not any(t == ACTIVE for t in sim.typ):
                break
        return out

    # ---- paths
    def _frozen_actives(self) -> list[FrozenPath]:
        w = self.world
        return [FrozenPath(w.remaining(i), hold=False, blocks_goal=False)
                for i in range(w.num_agents) if w.typ[i] == ACTIVE]

    def _mapf(self, agents: list[int], goals: list[Cell], frozen: list[FrozenPath],
              retreating: Sequence[int] = ()) -> list[Path]:
        """Paths to ``goals``.  A shelf cell is a safe place to wait even if an
        active path crosses it later (that shelf has to leave first); a retreat
        cell is not, so agents in ``retreating`` rest only where no active path
        passes afterwards."""
        w = self.world
        strict = frozenset(k for k, i in enumerate(agents) if i in retreating)
        problem = MapfProblem(w.instance.grid, [w.loc[i] for i in agents], goals, frozen=frozen,
                              w=self.config.w, time_budget=self.config.time_budget,
                              strict_rest=strict)
        self.stats["mapf_calls"] = self.stats.get("mapf_calls", 0) + 1
        try:
            return solve_cbs(problem).paths
        except MapfError:
            pass
        return solve_prioritized(problem).paths

    def _retreats(self, agents: list[int], taken_goals: set[Cell]) -> list[Cell]:
        """Nearest cell off every active agent's remaining path; failing that, off
        their end cells; failing that, stay put."""
        w = self.world
        grid = w.instance.grid
        actives = [i for i in range(w.num_agents) if w.typ[i] == ACTIVE]
        on_paths = {grid.cell_id(c) for i in actives for c in w.remaining(i)}
        ends = {grid.cell_id(w.remaining(i)[-1]) for i in actives}
        used = {grid.cell_id(c) for c in taken_goals}
        goals = []
        for i in agents:
            here = grid.cell_id(w.loc[i])
            dist = grid.dist_table(here)
            order = sorted(bfs_ids(grid, here), key=lambda v: (dist[v], v))
            pick = next((v for v in order if v not in on_paths and v not in used), None)
            if pick is None:
                pick = next((v for v in order if v not in ends and v not in used), None)
            if pick is None:
                if here in used:
                    raise Failure("c", f"no retreat cell for agent {i}")
                pick = here
            used.add(pick)
            goals.append(grid.cell_of(pick))
        return goals

    def run(self) -> None:
        w = self.world
        grid = w.instance.grid
        pool = [i for i in range(w.num_agents) if w.typ[i] != ACTIVE]
        for i in pool:
            w.shelf[i] = None
        future = self._future_agents()
        assigned: dict[int, int] = {}
        reserved: dict[int, int] = {}
        planned: dict[int, Path] = {}
        frozen_active = self._frozen_actives()
        rounds = 0
        while pool or future:
            rounds += 1
            if rounds > w.dep.num_shelves + 1:
                raise Failure("c", "assignment rounds exceeded the number of shelves")
            open_shelves = self._open_shelves(self._taken(assigned, reserved))
            cand = self._executable_now(open_shelves)
            if not cand:
                cand = self._executable_later(open_shelves, planned, assigned)
            if not cand:
                cand = self._cycles(open_shelves)
            if not cand:
                break
            shelves = sorted(cand)
            rows: list[tuple[int, int, Cell]] = [(i, 0, w.loc[i]) for i in pool] + future
            targets = [grid.cell_id(w.shelf_loc(j)) for j in shelves]
            # ties go to agents that are free now: scale so that one extra
            # look-ahead agent never outweighs a unit of cost
            scale = len(future) + 1
            costs = []
            for r, (_, free_at, cell) in enumerate(rows):
                d = grid.dist_table(grid.cell_id(cell))
                extra = 0 if r < len(pool) else 1
                row = []
                for j, v in zip(shelves, targets):
                    c = assignment_cost(d[v] if d[v] >= 0 else SENTINEL, cand[j], free_at)
                    row.append(c if c >= SENTINEL else c * scale + extra)
                costs.append(row)
            pairs, _ = hungarian(costs)
            if not pairs:
                break
            now_agents, now_goals = [], []
            for r, c in pairs:
                i, j = rows[r][0], shelves[c]
                if r < len(pool):
                    assigned[i] = j
                    now_agents.append(i)
                    now_goals.append(w.shelf_loc(j))
                else:
                    reserved[i] = j
            taken_rows = {rows[r][0] for r, _ in pairs}
            pool = [i for i in pool if i not in taken_rows]
            future = [f for f in future if f[0] not in taken_rows]
            if now_agents:
                frozen = frozen_active + [FrozenPath(p) for p in planned.values()]
                try:
                    paths = self._mapf(now_agents, now_goals, frozen)
                except MapfError:
                    paths = None
                if paths is None:
                    planned = self._joint(list(planned) + now_agents, assigned, pool)
                    pool = []
                    break
                for i, p in zip(now_agents, paths):
                    planned[i] = p
        self.stats["rounds"] = self.stats.get("rounds", 0) + rounds
        if pool:
            goals = self._retreats(pool, {w.shelf_loc(j) for j in assigned.values()})
            frozen = frozen_active + [FrozenPath(p) for p in planned.values()]
            try:
                paths = self._mapf(pool, goals, frozen, pool)
                for i, p in zip(pool, paths):
                    planned[i] = p
            except MapfError:
                planned = self._joint(list(planned), assigned, pool)
        for i, j in assigned.items():
            w.shelf[i] = j
        for i, p in planned.items():
            w.path[i] = p
        self.stats["reserved"] = self.stats.get("reserved", 0) + len(reserved)

    def _joint(self, agents: list[int], assigned: dict[int, int], leftover: list[int]) -> dict[int, Path]:
        """Re-solve every free agent at once."""
        w = self.world
        goals = [w.shelf_loc(assigned[i]) for i in agents]
        goals += self._retreats(leftover, set(goals))
        everyone = agents + leftover
        self.stats["joint_replans"] = self.stats.get("joint_replans", 0) + 1
        try:
            paths = self._mapf(everyone, goals, self._frozen_actives(), leftover)
        except MapfError as exc:
            raise Failure("c", f"free-agent paths at t={w.t}: {exc}") from exc
        return dict(zip(everyone, paths))


def assign_and_plan(world: World, config: DecompConfig, stats: dict | None = None) -> None:
    """Give every free agent a shelf or a retreat cell and a collision-free path."""
    _Planner(world, config, stats if stats is not None else {}).run()


# -------------------------------------------------------------------------- run

def _record(world: World, log_agents, log_carry, log_shelves) -> None:
    for i in range(world.num_agents):
        log_agents[i].append(world.loc[i])
        log_carry[i].append(world.shelf[i] if world.typ[i] == ACTIVE else FREE)
    for j in range(world.dep.num_shelves):
        log_shelves[j].append(world.shelf_loc(j))


def run(instance: Instance, config: DecompConfig | None = None,
        trajectories: TrajectorySet | Sequence[Path] | None = None) -> ExecutionLog:
    """Plan and execute.  Raises :class:`Failure` with reason a, b or c."""
    config = config or DecompConfig()
    t0 = time.perf_counter()
    if trajectories is None:
        trajectories = plan_shelf_trajectories(instance, config)
    t_traj = time.perf_counter() - t0
    paths = [list(p) for p in (trajectories.paths if isinstance(trajectories, TrajectorySet)
                               else trajectories)]
    dep = DependencyGraph(paths)
    world = World(instance, paths, dep)
    stats: dict = {}
    log_agents = [[] for _ in range(instance.num_agents)]
    log_carry = [[] for _ in range(instance.num_agents)]
    log_shelves = [[] for _ in range(instance.num_shelves)]
    n_free = instance.grid.num_free()
    stall_limit = 4 * n_free + 100
    max_steps = config.max_steps or 50 * n_free * max(1, sum(len(p) for p in paths))
    last_progress = 0
    last_steps = list(dep.steps)
    replans = 0
    while not world.all_completed():
        changed = update_states(world)
        if changed or world.t == 0:
            replans += 1
            assign_and_plan(world, config, stats)
        _record(world, log_agents, log_carry, log_shelves)
        step_world(world)
        if dep.steps != last_steps:
            last_steps = list(dep.steps)
            last_progress = world.t
        elif world.t - last_progress > stall_limit or world.t > max_steps:
            raise Failure("b" if _long_cycle(world) else "c", f"no progress since t={last_progress}")
    for i in range(world.num_agents):
        world.typ[i] = IDLE
    _record(world, log_agents, log_carry, log_shelves)
    total = time.perf_counter() - t0
    stats.update({"replans": replans, "total_time": total, "trajectory_time": t_traj,
                  "agent_time": total - t_traj, "shelf_w": getattr(trajectories, "w", None),
                  "trajectory_length": sum(len(p) - 1 for p in paths)})
    return ExecutionLog(log_agents, log_carry, log_shelves, stats)


def _long_cycle(world: World) -> bool:
    dep = world.dep
    succ = {j: dep.next_dep(j)[0] for j in range(dep.num_shelves)
            if not dep.is_completed(j) and dep.num_deps(j) == 1 and dep.soft_dep(j)}
    for start in succ:
        seen = [start]
        cur = succ[start]
        while cur in succ and cur not in seen:
            seen.append(cur)
            cur = succ[cur]
        if cur == start and len(seen) > world.num_agents:
            return True
    return False
