from hypothesis import given, settings
from hypothesis import strategies as st

from ddmapd.bench import GeneratorSpec, generate_well_formed
from ddmapd.decomp import Failure
from ddmapd.domain import FREE, GridMap, Instance, Shelf, validate
from ddmapd.pp import check_well_formed, run_pp


def test_perimeter_starts_pass():
    grid = GridMap(5, 5)
    inst = Instance(grid, [(0, 2), (4, 2)], [Shelf((2, 2), (1, 1)), Shelf((2, 3), (2, 3))])
    report = check_well_formed(inst, try_trajectories=True, time_budget=10)
    assert report.ok and report.trajectories_found


def test_shared_start_fails():
    grid = GridMap(5, 5)
    inst = Instance(grid, [(0, 2), (0, 2)], [Shelf((2, 2), (2, 2)), Shelf((2, 3), (2, 3))])
    report = check_well_formed(inst)
    assert not report.distinct_starts and not report.ok


def test_corridor_with_central_start_fails():
    grid = GridMap(1, 5)
    inst = Instance(grid, [(0, 2), (0, 0)], [Shelf((0, 3), (0, 3)), Shelf((0, 4), (0, 4))])
    report = check_well_formed(inst)
    assert report.distinct_starts and not report.connected_without_starts


def _carried_moves(log):
    return sum(1 for car in log.carrying for c in car if c != FREE)


def test_single_agent_delivers_everything():
    inst = generate_well_formed(GeneratorSpec(10, 0.2, 1, seed=3))
    log = run_pp(inst)
    report = validate(inst, log)
    assert report.ok
    # waits are collapsed: every carrying timestep moves a shelf
    moves = sum(p[t] != p[t - 1] for p in log.shelf_paths for t in range(1, len(p)))
    assert _carried_moves(log) == moves


def test_well_formed_running_layout():
    # a small layout in the spirit of the running example, agents on the border
    grid = GridMap.from_rows(["......", "......", "......", "......", "......"])
    shelves = [Shelf((2, 2), (2, 2)), Shelf((2, 3), (2, 1)), Shelf((1, 3), (3, 3)), Shelf((3, 2), (3, 2))]
    inst = Instance(grid, [(0, 3), (0, 4)], shelves)
    assert check_well_formed(inst).ok
    log = run_pp(inst)
    assert validate(inst, log).ok


@given(st.integers(0, 10_000), st.sampled_from([2, 4]))
@settings(max_examples=8, deadline=None)
def test_pp_logs_valid_and_agents_return_home(seed, n):
    inst = generate_well_formed(GeneratorSpec(10, 0.2, n, seed))
    try:
        log = run_pp(inst)
    except Failure as exc:
        raise AssertionError(f"PP failed on a well-formed instance: {exc}")
    assert validate(inst, log).ok
    # every committed plan ends on the agent's own start
    assert [p[-1] for p in log.agent_paths] == list(inst.agents)


def test_trajectories_ending_in_waits():
    grid = GridMap(5, 5)
    inst = Instance(grid, [(0, 2)], [Shelf((2, 2), (2, 4)), Shelf((3, 3), (3, 3))])
    trajs = [[(2, 2), (2, 3), (2, 4), (2, 4), (2, 4)], [(3, 3), (3, 3)]]
    log = run_pp(inst, trajectories=trajs)
    assert validate(inst, log).ok
    assert log.stats["trajectory_length"] == 2
