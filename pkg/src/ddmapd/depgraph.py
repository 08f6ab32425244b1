"""Dependency graph over shelf trajectory entries.

An edge (j, k) -> (j2, k2) says shelf j may enter step k only after shelf j2 has
reached step k2.  Steps only ever increase by one, so "all incoming edges of an
entry are removed once it is reached" is the same as "an edge is released once
steps[j2] >= k2"; the graph stores the static edge lists plus the step counters.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Sequence

from .domain import Cell

Entry = tuple[int, int]


def build_edges(trajectories: Sequence[Sequence[Cell]]) -> dict[Entry, list[Entry]]:
    """All edges <(j, k), (j2, k2 + 1)> with j != j2, k > k2 and the same cell."""
    visits: dict[Cell, list[Entry]] = defaultdict(list)
    for j, traj in enumerate(trajectories):
        for k, c in enumerate(traj):
            visits[c].append((j, k))
    out: dict[Entry, list[Entry]] = {}
    for entries in visits.values():
        for j, k in entries:
            for j2, k2 in entries:
                if j2 != j and k > k2:
                    if k2 + 1 >= len(trajectories[j2]):
                        raise ValueError(
                            f"shelf {j} enters {trajectories[j][k]} after shelf {j2} has parked there")
                    out.setdefault((j, k), []).append((j2, k2 + 1))
    for targets in out.values():
        targets.sort()
    return out


class DependencyGraph:
    def __init__(self, trajectories: Sequence[Sequence[Cell]], steps: list[int] | None = None,
                 _edges: dict | None = None):
        self.trajectories = [list(t) for t in trajectories] if _edges is None else trajectories
        self.out = build_edges(self.trajectories) if _edges is None else _edges
        self.steps = [0] * len(trajectories) if steps is None else steps

    def copy(self) -> "DependencyGraph":
        """Shares the static edge lists; only the step counters are copied."""
        return DependencyGraph(self.trajectories, list(self.steps), self.out)

    @property
    def num_shelves(self) -> int:
        return len(self.trajectories)

    def initial_edges(self) -> set[tuple[Entry, Entry]]:
        return {(src, dst) for src, targets in self.out.items() for dst in targets}

    def edges(self) -> set[tuple[Entry, Entry]]:
        """Edges not yet released."""
        st = self.steps
        return {(src, dst) for src, targets in self.out.items() for dst in targets
                if st[dst[0]] < dst[1]}

    def unreleased(self, j: int, k: int) -> list[Entry]:
        st = self.steps
        return [d for d in self.out.get((j, k), ()) if st[d[0]] < d[1]]

    def is_completed(self, j: int) -> bool:
        return self.steps[j] >= len(self.trajectories[j]) - 1

    def num_deps(self, j: int) -> int:
        """Unreleased out-degree of the next entry of shelf j (0 for completed shelves)."""
        if self.is_completed(j):
            return 0
        return len(self.unreleased(j, self.steps[j] + 1))

    def next_dep(self, j: int) -> Entry | None:
        deps = self.unreleased(j, self.steps[j] + 1) if not self.is_completed(j) else []
        return deps[0] if len(deps) == 1 else None

    def soft_dep(self, j: int) -> bool:
        """True iff the next entry of shelf j has exactly one open dependency and its
        source shelf stands on the step just before the releasing one."""
        dep = self.next_dep(j)
        if dep is None:
            return False
        j2, k2 = dep
        return self.steps[j2] == k2 - 1

    def executable(self, j: int) -> bool:
        return not self.is_completed(j) and self.num_deps(j) == 0

    def advance(self, j: int) -> None:
        """Shelf j moves to its next entry, releasing that entry's incoming edges."""
        if self.is_completed(j):
            raise ValueError(f"shelf {j} is already complete")
        self.steps[j] += 1

    def is_acyclic(self) -> bool:
        """Kahn's algorithm on the initial edge set."""
        indeg: dict[Entry, int] = defaultdict(int)
        nodes: set[Entry] = set()
        for src, targets in self.out.items():
            nodes.add(src)
            for d in targets:
                nodes.add(d)
                indeg[d] += 1
        ready = [v for v in nodes if indeg[v] == 0]
        seen = 0
        while ready:
            v = ready.pop()
            seen += 1
            for d in self.out.get(v, ()):
                indeg[d] -= 1
                if indeg[d] == 0:
                    ready.append(d)
        return seen == len(nodes)


def build_dep(trajectories: Sequence[Sequence[Cell]]) -> DependencyGraph:
    return DependencyGraph(trajectories)
