"""Prioritized variant of the decomposition planner.

Shelf trajectories are safe and 1-robust, so the dependency graph is acyclic.
Each planning event commits one (agent, shelf) pair at a time: the agent walks
to the shelf, carries it along the longest trajectory stretch whose
dependencies are already scheduled to be released, and walks back to its own
start.  Every agent's committed path therefore ends on its start cell, which
keeps a way out for everyone else.
"""
from __future__ import annotations

import bisect
import math
import time
from dataclasses import dataclass, field

from .decomp import DecompConfig, Failure, plan_shelf_trajectories
from .depgraph import DependencyGraph
from .domain import FREE, Cell, ExecutionLog, Instance, Path, TrajectorySet, at
from .mapf import FrozenPath, Segment, multi_label_astar


@dataclass
class WellFormedReport:
    distinct_starts: bool
    connected_without_starts: bool
    trajectories_found: bool | None = None   # None: not attempted
    detail: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.distinct_starts and self.connected_without_starts and self.trajectories_found is not False


def check_well_formed(instance: Instance, try_trajectories: bool = False,
                      time_budget: float = 60.0) -> WellFormedReport:
    """Distinct starts; the map stays connected once any N-1 starts are removed;
    optionally try to find safe 1-robust shelf trajectories (failure to find one
    within the budget is not a proof that none exists)."""
    starts = list(instance.agents)
    grid = instance.grid
    detail = []
    distinct = len(set(starts)) == len(starts)
    if not distinct:
        detail.append("two agents share a start cell")
    connected = True
    for i in range(len(starts)):
        others = starts[:i] + starts[i + 1:]
        if not grid.is_connected(others):
            connected = False
            detail.append(f"removing every start except agent {i}'s disconnects the map")
            break
    found = None
    if try_trajectories:
        cfg = DecompConfig(one_robust=True, safe=True, time_budget=time_budget)
        try:
            plan_shelf_trajectories(instance, cfg)
            found = True
        except Failure as exc:
            found = False
            detail.append(f"no safe 1-robust trajectories found: {exc}")
    return WellFormedReport(distinct, connected, found, detail)


class _Schedule:
    """Committed shelf progress: shelf j is at step ``steps[k]`` from ``times[k]`` on."""

    def __init__(self, n: int):
        self.times = [[0] for _ in range(n)]
        self.steps = [[0] for _ in range(n)]
        self.busy_until = [0] * n

    def step_at(self, j: int, t: int) -> int:
        k = bisect.bisect_right(self.times[j], t) - 1
        return self.steps[j][k]

    def reach_time(self, j: int, k: int) -> float:
        """First time shelf j is at step >= k, or inf if not scheduled."""
        for tt, s in zip(self.times[j], self.steps[j]):
            if s >= k:
                return tt
        return math.inf

    def add(self, j: int, t: int, step: int) -> None:
        if t == self.times[j][-1]:
            self.steps[j][-1] = step
        else:
            self.times[j].append(t)
            self.steps[j].append(step)


def _runs(traj: Path, s: int) -> list[tuple[Cell, int]]:
    """Cells of traj from step s on with repeats collapsed: (cell, last step index)."""
    out: list[tuple[Cell, int]] = []
    for k in range(s, len(traj)):
        if out and out[-1][0] == traj[k]:
            out[-1] = (traj[k], k)
        else:
            out.append((traj[k], k))
    return out


class _PPState:
    def __init__(self, instance: Instance, traj: list[Path], dep: DependencyGraph, config: DecompConfig):
        self.instance = instance
        self.grid = instance.grid
        self.traj = traj
        self.dep = dep
        self.config = config
        self.homes = list(instance.agents)
        n = instance.num_agents
        self.plans: list[Path] = [[h] for h in self.homes]
        # per agent: (lift time, shelf, [(cell, step) for each timestep from the lift on])
        self.carries: list[list[tuple[int, int, list[tuple[Cell, int]]]]] = [[] for _ in range(n)]
        self.sched = _Schedule(len(traj))
        self.agent_busy = [0] * n
        self.events: set[int] = {0}
        self.last = [len(p) - 1 for p in traj]
        self.stats = {"assignments": 0, "events": 0}

    def release_time(self, j: int, k: int) -> float:
        return max((self.sched.reach_time(j2, k2) for j2, k2 in self.dep.out.get((j, k), ())),
                   default=0)

    def candidates(self, t: int) -> dict[int, tuple[float, list[tuple[Cell, int]]]]:
        """Untaken shelves whose next move is scheduled to be released:
        shelf -> (release time, collapsed remaining cells)."""
        out = {}
        sched = self.sched
        for j in range(len(self.traj)):
            if sched.busy_until[j] > t:
                continue
            s = sched.step_at(j, t)
            if s >= self.last[j]:
                continue
            runs = _runs(self.traj[j], s)
            rel = max(self.release_time(j, k) for k in range(s + 1, runs[1][1] + 1))
            if rel < math.inf:
                out[j] = (max(rel, t), runs)
        return out

    def segment(self, j: int, rel: float, runs: list[tuple[Cell, int]]) -> list[tuple[Cell, int]]:
        """Longest stretch whose dependencies are all released by ``rel``."""
        seg = runs[:2]
        for m in range(2, len(runs)):
            if max(self.release_time(j, k) for k in range(runs[m - 1][1] + 1, runs[m][1] + 1)) > rel:
                break
            seg.append(runs[m])
        return seg

    def assign(self, t: int) -> None:
        self.stats["events"] += 1
        grid = self.grid
        free = [i for i in range(len(self.homes)) if self.agent_busy[i] <= t]
        while free:
            cand = self.candidates(t)
            if not cand:
                return
            best = None
            for i in free:
                d = grid.dist_table(grid.cell_id(at(self.plans[i], t)))
                for j, (rel, runs) in cand.items():
                    dist = d[grid.cell_id(runs[0][0])]
                    if dist < 0:
                        continue
                    key = (max(dist, rel - t), i, j)
                    if best is None or key < best:
                        best = key
            if best is None:
                return
            _, i, j = best
            rel, runs = cand[j]
            seg = self.segment(j, rel, runs)
            frozen = []
            for b in range(len(self.homes)):
                if b != i:
                    p = self.plans[b]
                    frozen.append(FrozenPath(p[t:] if len(p) > t else [p[-1]]))
            found = multi_label_astar(grid, at(self.plans[i], t),
                                      [Segment([c for c, _ in seg], int(rel) - t), self.homes[i]],
                                      frozen, return_times=True)
            if found is None:
                raise Failure("c", f"no path for agent {i} to shelf {j} at t={t}")
            path, starts = found
            lift = t + starts[0]
            old = self.plans[i]
            self.plans[i] = (old + [old[-1]] * (t - len(old) + 1))[:t] + path
            self.carries[i].append((lift, j, seg))
            for m, (_, step) in enumerate(seg):
                self.sched.add(j, lift + m, step)
            end = lift + len(seg) - 1
            self.sched.busy_until[j] = end
            self.agent_busy[i] = end
            self.events.add(end)
            self.stats["assignments"] += 1
            free.remove(i)
            assert self.plans[i][-1] == self.homes[i]


def run_pp(instance: Instance, config: DecompConfig | None = None,
           trajectories: TrajectorySet | list[Path] | None = None) -> ExecutionLog:
    """Plan and execute with one committed assignment per round.  Raises
    :class:`Failure` ('a' if no safe 1-robust trajectories were found)."""
    config = config or DecompConfig()
    config = DecompConfig(w=config.w, k=0, one_robust=True, safe=True,
                          time_budget=config.time_budget, seed=config.seed, max_steps=config.max_steps)
    t0 = time.perf_counter()
    if trajectories is None:
        trajectories = plan_shelf_trajectories(instance, config)
    t_traj = time.perf_counter() - t0
    traj = [list(p) for p in (trajectories.paths if isinstance(trajectories, TrajectorySet)
                              else trajectories)]
    for p in traj:
        # trailing waits carry no information and would leave a step with no move after it
        while len(p) > 1 and p[-1] == p[-2]:
            p.pop()
    dep = DependencyGraph(traj)
    if not dep.is_acyclic():
        raise Failure("b", "dependency graph has a cycle; trajectories are not 1-robust")
    st = _PPState(instance, traj, dep, config)
    t = 0
    while True:
        st.assign(t)
        later = [e for e in st.events if e > t]
        if not later:
            break
        t = min(later)
    end = max([len(p) - 1 for p in st.plans] + [t])
    if any(st.sched.step_at(j, end) < st.last[j] for j in range(len(traj))):
        raise Failure("c", f"stuck at t={t} with undelivered shelves")
    log = _build_log(st, end)
    total = time.perf_counter() - t0
    log.stats.update(st.stats)
    log.stats.update({"total_time": total, "trajectory_time": t_traj, "agent_time": total - t_traj,
                      "shelf_w": getattr(trajectories, "w", None),
                      "trajectory_length": sum(st.last)})
    return log


def _build_log(st: _PPState, end: int) -> ExecutionLog:
    agents = [[at(p, t) for t in range(end + 1)] for p in st.plans]
    carrying = [[FREE] * (end + 1) for _ in st.plans]
    for i, items in enumerate(st.carries):
        for lift, j, seg in items:
            for m in range(len(seg) - 1):
                carrying[i][lift + m] = j
    shelves = [[st.traj[j][st.sched.step_at(j, t)] for t in range(end + 1)]
               for j in range(len(st.traj))]
    return ExecutionLog(agents, carrying, shelves, {})
