import random

from hypothesis import given, settings
from hypothesis import strategies as st

from ddmapd.bench import GeneratorSpec, generate_random
from ddmapd.decomp import (
    ACTIVE, IDLE, DecompConfig, Failure, World, assign_and_plan, find_no_move,
    plan_shelf_trajectories, run, step_world, update_states,
)
from ddmapd.depgraph import build_dep
from ddmapd.domain import FREE, GridMap, Instance, Shelf, is_one_robust, validate
from ddmapd.fixtures import running_example, running_example_trajectories

from oracles import brute_dep_edges, joint_optimal_cost

# -------------------------------------------------------------- dependency graph


def _random_trajectories(rng, n_shelves=4, size=6, steps=8):
    cells = [(r, c) for r in range(size) for c in range(size)]
    trajs = []
    for start in rng.sample(cells, n_shelves):
        p = [start]
        for _ in range(rng.randint(0, steps)):
            r, c = p[-1]
            opts = [(r + dr, c + dc) for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0), (0, 0))
                    if 0 <= r + dr < size and 0 <= c + dc < size]
            p.append(rng.choice(opts))
        trajs.append(p)
    return trajs


@given(st.integers(0, 100_000))
@settings(max_examples=150, deadline=None)
def test_build_dep_matches_quadruple_loop(seed):
    trajs = _random_trajectories(random.Random(seed))
    try:
        expected = brute_dep_edges(trajs)
    except ValueError:
        expected = None
    try:
        got = build_dep(trajs).initial_edges()
    except ValueError:
        got = None
    assert got == expected
    if got is not None:
        # never an edge inside one trajectory, and always forward in the source's steps
        assert all(src[0] != dst[0] for src, dst in got)


def test_disjoint_trajectories_have_no_edges():
    dep = build_dep([[(0, 0), (0, 1)], [(2, 2), (2, 3)], [(4, 4)]])
    assert dep.initial_edges() == set() and dep.is_acyclic()


def test_running_example_edges():
    dep = build_dep(running_example_trajectories())
    # shelf 0 may return to (1, 1) only once shelf 1 has moved on to (1, 0)
    assert ((0, 2), (1, 2)) in dep.initial_edges()
    assert dep.initial_edges() == {((0, 2), (1, 2)), ((1, 1), (0, 1))}


def test_cycles_only_between_equal_steps():
    # a rotation: each shelf moves into the cell the next one leaves
    ring = [(0, 0), (0, 1), (1, 1)]
    trajs = [[ring[i], ring[(i + 1) % 3]] for i in range(3)]
    dep = build_dep(trajs)
    assert not dep.is_acyclic()
    for (j, k), (j2, k2) in dep.initial_edges():
        assert k == k2


def test_soft_dep_definition():
    dep = build_dep(running_example_trajectories())
    dep.steps[0] = 1
    assert dep.next_dep(0) == (1, 2)
    dep.steps[1] = 1          # the source stands one step before the releasing entry
    assert dep.soft_dep(0)
    dep.steps[1] = 0
    assert not dep.soft_dep(0) and dep.num_deps(0) == 1 and not dep.executable(0)
    dep.steps[1] = 2          # released
    assert dep.num_deps(0) == 0 and dep.executable(0)


def test_rotation_reports_soft_for_every_shelf():
    ring = [(0, 0), (0, 1), (1, 1)]
    dep = build_dep([[ring[i], ring[(i + 1) % 3]] for i in range(3)])
    assert all(dep.soft_dep(j) for j in range(3))


def test_advance_releases_incoming_edges():
    # shelves 1 and 2 both wait for shelf 0 to leave (0, 1) at step 1
    trajs = [[(0, 1), (0, 2), (0, 3)], [(1, 1), (1, 1), (0, 1), (1, 1)], [(0, 0), (0, 0), (0, 0), (0, 1)]]
    dep = build_dep(trajs)
    before = len(dep.edges())
    assert dep.num_deps(1) == 0   # shelf 1 waits in place first
    dep.steps[1] = 1
    assert dep.num_deps(1) == 1
    dep.advance(0)
    assert dep.num_deps(1) == 0 and len(dep.edges()) < before


# ------------------------------------------------------------------- agent logic

def _world(trajs, agents, shelves, typ=ACTIVE):
    grid = GridMap(4, 4)
    inst = Instance(grid, agents, [Shelf(t[0], t[-1]) for t in trajs])
    w = World(inst, trajs, build_dep(trajs))
    for i, j in enumerate(shelves):
        w.shelf[i] = j
        w.typ[i] = typ if j is not None else IDLE
    return w


def test_find_no_move_cycle_moves_together():
    ring = [(0, 0), (0, 1), (1, 1), (1, 0)]
    trajs = [[ring[i], ring[(i + 1) % 4]] for i in range(4)]
    w = _world(trajs, ring, [0, 1, 2, 3])
    assert find_no_move(w, [0, 1, 2, 3]) == set()


def test_find_no_move_chain():
    trajs = [[(0, 0), (0, 1)], [(0, 1), (0, 2)], [(0, 2), (0, 3)]]
    # shelf 2 unassigned: the chain cannot move
    w = _world(trajs, [(0, 0), (0, 1), (3, 3)], [0, 1, None])
    assert find_no_move(w, [0, 1]) == {0, 1}
    # shelf 2 carried by an active agent outside the softly constrained set
    w = _world(trajs, [(0, 0), (0, 1), (0, 2)], [0, 1, 2])
    assert find_no_move(w, [0, 1]) == set()
    w2 = w.copy()
    step_world(w2)
    assert w2.dep.steps == [1, 1, 1]


def test_update_idle_agent_on_free_shelf_becomes_active():
    trajs = [[(0, 0), (0, 1)]]
    w = _world(trajs, [(0, 0)], [0], typ=IDLE)
    update_states(w)
    assert w.typ == [ACTIVE]
    step_world(w)
    assert w.loc == [(0, 1)] and w.dep.steps == [1]
    update_states(w)
    assert w.typ == [IDLE] and w.shelf == [None]
    # nothing left to do: the free agent waits in place
    assert not step_world(w) and w.loc == [(0, 1)]


def test_running_example_narrative():
    inst = running_example()
    trajs = running_example_trajectories()
    w = World(inst, trajs, build_dep(trajs))
    cfg = DecompConfig(k=8)
    seen = {}
    while not w.all_completed():
        changed = update_states(w)
        after_update = (list(w.typ), list(w.shelf))
        if changed or w.t == 0:
            assign_and_plan(w, cfg)
        seen[w.t] = (after_update, (list(w.typ), list(w.shelf)))
        step_world(w)
    assert w.t == 7
    # t=0: shelf 1 is not executable yet, so the agents take shelves 2 and 0
    assert seen[0][1][1] == [2, 0]
    # t=2: agent 1 keeps shelf 0 and agent 0 gets shelf 1 in the second round
    assert seen[2][1][1] == [1, 0]
    # t=4: agent 1 stands on shelf 0 but the dependency is hard, so it is freed
    assert seen[4][0] == ([IDLE, IDLE], [1, None])
    # t=6: the dependency is soft; both agents carry
    assert seen[6][0] == ([ACTIVE, ACTIVE], [1, 0])


def test_single_agent_single_shelf_takes_shortest_path():
    grid = GridMap(4, 4)
    inst = Instance(grid, [(0, 0)], [Shelf((3, 3), (3, 2))])
    log = run(inst, DecompConfig())
    report = validate(inst, log)
    assert report.ok
    assert report.makespan == 6 + 1


def test_disjoint_shelves_one_agent_each():
    grid = GridMap(5, 5)
    agents = [(0, 0), (4, 0)]
    shelves = [Shelf((0, 2), (0, 4)), Shelf((4, 2), (4, 4))]
    log = run(Instance(grid, agents, shelves), DecompConfig())
    assert validate(Instance(grid, agents, shelves), log).ok
    assert log.makespan == max(2 + 2, 2 + 2)
    assert all(c != FREE for c in log.carrying[0][2:4]) and all(c != FREE for c in log.carrying[1][2:4])


def test_nothing_to_relocate():
    grid = GridMap(3, 3)
    inst = Instance(grid, [(0, 0)], [Shelf((1, 1), (1, 1)), Shelf((2, 2), (2, 2))])
    ts = plan_shelf_trajectories(inst, DecompConfig())
    assert ts.lengths() == [0, 0]
    assert run(inst).makespan == 0


def test_running_example_trajectories_from_the_solver():
    inst = running_example()
    ts = plan_shelf_trajectories(inst, DecompConfig())
    assert ts.problems(inst) == []
    assert ts[1][-1] == (1, 0) and ts[2][-1] == (2, 4)
    assert ts[0][-1] == (1, 1) and ts[3][-1] == (2, 1)


def test_robust_trajectories_match_the_oracle():
    # two shelves in a 2x2 block where the second follows the first
    grid = GridMap(2, 2)
    inst = Instance(grid, [(1, 0)], [Shelf((0, 0), (0, 1)), Shelf((0, 1), (1, 1))])
    plain = plan_shelf_trajectories(inst, DecompConfig(w=1.0))
    robust = plan_shelf_trajectories(inst, DecompConfig(w=1.0, one_robust=True))
    starts, goals = [(0, 0), (0, 1)], [(0, 1), (1, 1)]
    assert plain.total_length() == joint_optimal_cost(grid, starts, goals)
    assert robust.total_length() == joint_optimal_cost(grid, starts, goals, one_robust=True)
    assert robust.total_length() > plain.total_length()
    assert is_one_robust(robust.paths)


def _compress(p):
    return [c for i, c in enumerate(p) if i == 0 or c != p[i - 1]]


@given(st.integers(0, 10_000), st.sampled_from([0, 8]))
@settings(max_examples=12, deadline=None)
def test_run_invariants(seed, k):
    inst = generate_random(GeneratorSpec(8, 0.3, 3, seed))
    cfg = DecompConfig(k=k, time_budget=10)
    try:
        ts = plan_shelf_trajectories(inst, cfg)
        log = run(inst, cfg, ts)
    except Failure as exc:
        assert exc.reason in "abc"
        return
    report = validate(inst, log)
    assert report.ok, report.violations[:3]
    # shelves follow their planned routes
    for j, p in enumerate(log.shelf_paths):
        assert _compress(p) == _compress(ts[j])
    assert ts.total_length() <= log.flowtime
    # deterministic
    assert run(inst, cfg, ts).agent_paths == log.agent_paths
