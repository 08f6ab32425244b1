from ddmapd.baselines import run_base, run_pas
from ddmapd.bench import GeneratorSpec, generate_well_formed
from ddmapd.domain import FREE, GridMap, Instance, Shelf, validate


def _movers(log):
    moved = set()
    for i, p in enumerate(log.agent_paths):
        if any(p[t] != p[t - 1] for t in range(1, len(p))):
            moved.add(i)
    return moved


def test_one_shelf_one_move():
    grid = GridMap(3, 3)
    inst = Instance(grid, [(0, 0)], [Shelf((0, 1), (0, 2))])
    for runner in (run_base, run_pas):
        log = runner(inst)
        assert validate(inst, log).ok
        assert log.makespan == 1 + 1


def test_nothing_to_do():
    grid = GridMap(3, 3)
    inst = Instance(grid, [(0, 0)], [Shelf((1, 1), (1, 1))])
    assert run_base(inst).makespan == 0 and run_pas(inst).makespan == 0


def test_straight_line_is_one_carry():
    grid = GridMap(3, 5)
    inst = Instance(grid, [(0, 0)], [Shelf((1, 0), (1, 4))])
    log = run_pas(inst)
    assert validate(inst, log).ok
    assert log.stats["segments"] == 1
    car = log.carrying[0]
    lifts = sum(1 for t in range(len(car)) if car[t] != FREE and (t == 0 or car[t - 1] == FREE))
    assert lifts == 1


def test_baselines_valid_with_a_single_mover():
    inst = generate_well_formed(GeneratorSpec(10, 0.2, 3, seed=1))
    base = run_base(inst)
    pas = run_pas(inst)
    for log in (base, pas):
        assert validate(inst, log).ok
        assert _movers(log) <= {0}


def test_rotation_segments_keep_the_solver_order():
    # three shelves on a ring shift by one
    grid = GridMap.from_rows([".....", ".@@@.", "....."])
    ring = [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 4), (2, 4), (2, 3), (2, 2), (2, 1), (2, 0), (1, 0)]
    inst = Instance(grid, [(2, 2)], [Shelf(ring[i], ring[i + 1]) for i in range(3)])
    log = run_pas(inst)
    assert validate(inst, log).ok
    # each lift carries one shelf over consecutive timesteps
    car = log.carrying[0]
    runs = []
    for t, c in enumerate(car):
        if c != FREE and (t == 0 or car[t - 1] != c):
            runs.append(c)
    assert len(runs) == log.stats["segments"]
