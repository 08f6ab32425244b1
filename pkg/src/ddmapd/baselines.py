"""Single-agent baselines.  Agent 0 does all the work; the rest stay home.

BASE executes safe 1-robust trajectories in lock step (every shelf's step t
before anyone's step t+1).  PAS executes the move sequence of Push and Swap,
one contiguous run of moves per shelf at a time.
"""
from __future__ import annotations

import time

from .decomp import DecompConfig, Failure, plan_shelf_trajectories
from .domain import FREE, Cell, ExecutionLog, Instance, Path, TrajectorySet, shortest_path
from .mapf import MapfError, MapfProblem, solve_push_and_swap


class _Runner:
    """Builds the log while agent 0 walks and carries."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.avoid = set(instance.agents[1:])
        self.pos: Cell = instance.agents[0]
        self.agent: Path = [self.pos]
        self.carry: list[int] = []
        self.shelf_pos = list(instance.pickups)
        self.shelves: list[Path] = [[c] for c in self.shelf_pos]

    def _tick(self, nxt: Cell, carried: int) -> None:
        self.carry.append(carried)
        self.pos = nxt
        self.agent.append(nxt)
        if carried != FREE:
            self.shelf_pos[carried] = nxt
        for j, c in enumerate(self.shelf_pos):
            self.shelves[j].append(c)

    def walk_to(self, target: Cell) -> None:
        path = shortest_path(self.instance.grid, self.pos, target, self.avoid)
        if path is None:
            raise Failure("c", f"agent 0 cannot reach {target} without crossing another start")
        for c in path[1:]:
            self._tick(c, FREE)

    def carry_along(self, j: int, cells: list[Cell]) -> None:
        """Lift shelf j at cells[0] and carry it through the rest."""
        self.walk_to(cells[0])
        for c in cells[1:]:
            self._tick(c, j)

    def log(self, stats: dict) -> ExecutionLog:
        self.carry.append(FREE)
        n = self.instance.num_agents
        agents = [self.agent] + [[s] for s in self.instance.agents[1:]]
        carrying = [self.carry] + [[FREE] for _ in range(n - 1)]
        return ExecutionLog(agents, carrying, self.shelves, stats)


def run_base(instance: Instance, config: DecompConfig | None = None,
             trajectories: TrajectorySet | list[Path] | None = None) -> ExecutionLog:
    config = config or DecompConfig()
    t0 = time.perf_counter()
    if trajectories is None:
        cfg = DecompConfig(w=config.w, one_robust=True, safe=True, time_budget=config.time_budget)
        trajectories = plan_shelf_trajectories(instance, cfg)
    t_traj = time.perf_counter() - t0
    traj = [list(p) for p in (trajectories.paths if isinstance(trajectories, TrajectorySet)
                              else trajectories)]
    runner = _Runner(instance)
    horizon = max(len(p) for p in traj)
    for step in range(1, horizon):
        for j, p in enumerate(traj):
            if step < len(p) and p[step] != p[step - 1]:
                runner.carry_along(j, [p[step - 1], p[step]])
    total = time.perf_counter() - t0
    return runner.log({"total_time": total, "trajectory_time": t_traj, "agent_time": total - t_traj,
                       "shelf_w": getattr(trajectories, "w", None),
                       "trajectory_length": sum(len(p) - 1 for p in traj)})


def run_pas(instance: Instance, config: DecompConfig | None = None) -> ExecutionLog:
    config = config or DecompConfig()
    t0 = time.perf_counter()
    problem = MapfProblem(instance.grid, instance.pickups, instance.deliveries,
                          forbidden=frozenset(instance.agents), time_budget=config.time_budget)
    try:
        sol = solve_push_and_swap(problem)
    except MapfError as exc:
        raise Failure("a", f"push and swap: {exc}") from exc
    t_traj = time.perf_counter() - t0
    runner = _Runner(instance)
    for j, first, last in sol.segments:
        p = sol.paths[j]
        # the path of shelf j is indexed by global move number; move m goes m -> m+1
        runner.carry_along(j, [p[min(m, len(p) - 1)] for m in range(first, last + 2)])
    total = time.perf_counter() - t0
    return runner.log({"total_time": total, "trajectory_time": t_traj, "agent_time": total - t_traj,
                       "trajectory_length": sum(last - first + 1 for _, first, last in sol.segments),
                       "segments": len(sol.segments)})
