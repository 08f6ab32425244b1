"""Instance generators and the benchmark runner."""
from __future__ import annotations

import csv
import io
import math
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path as FsPath
from typing import Iterable, Sequence

from .baselines import run_base, run_pas
from .decomp import DecompConfig, Failure, plan_shelf_trajectories, run
from .domain import Cell, ExecutionLog, GridMap, Instance, InvalidInstance, Shelf, TrajectorySet, validate
from .pp import run_pp

ALGOS = ("nivf", "ivf", "ivf-r", "pp", "base", "pas")
MAX_REJECTIONS = 10_000


class GenerationError(InvalidInstance):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    size: int
    den: float = 0.2          # fraction of all cells that hold a shelf
    n_agents: int = 4
    seed: int = 0
    relocate: float = 0.1     # fraction of n^2 shelves that get a new delivery cell
    well_formed: bool = False


def _place_blocks(rng: random.Random, n: int, target: int, lo: int, hi: int) -> list[Cell]:
    """Disjoint 2x2 blocks with top-left corners in [lo, hi]; the last block is cut
    short (row-major) to hit ``target`` cells exactly."""
    cells: list[Cell] = []
    used: set[Cell] = set()
    rejections = 0
    while len(cells) < target:
        if hi < lo:
            raise GenerationError("grid too small for 2x2 blocks")
        r, c = rng.randint(lo, hi), rng.randint(lo, hi)
        block = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]
        if any(b in used for b in block):
            rejections += 1
            if rejections > MAX_REJECTIONS:
                raise GenerationError(f"could not place {target} shelf cells")
            continue
        block = block[:target - len(cells)]
        used.update(block)
        cells.extend(block)
    return cells


def _perimeter(n: int) -> list[Cell]:
    ring = [(0, c) for c in range(1, n - 1)] + [(n - 1, c) for c in range(1, n - 1)]
    ring += [(r, 0) for r in range(1, n - 1)] + [(r, n - 1) for r in range(1, n - 1)]
    return sorted(ring)


def _starts_ok(grid: GridMap, starts: list[Cell]) -> bool:
    return all(grid.is_connected(starts[:i] + starts[i + 1:]) for i in range(len(starts)))


def _generate(spec: GeneratorSpec) -> Instance:
    n = spec.size
    rng = random.Random(f"{n}-{spec.den}-{spec.n_agents}-{spec.seed}-{spec.well_formed}")
    grid = GridMap(n, n)
    target = math.floor(spec.den * n * n + 1e-9)
    if spec.well_formed:
        pickups = _place_blocks(rng, n, target, 1, n - 3)
        pool = [(r, c) for r in range(1, n - 1) for c in range(1, n - 1)]
    else:
        pickups = _place_blocks(rng, n, target, 0, n - 2)
        pool = grid.free_cells()
    taken = set(pickups)
    n_move = min(math.floor(spec.relocate * n * n + 1e-9), len(pickups))
    movers = sorted(rng.sample(range(len(pickups)), n_move))
    spots = [c for c in pool if c not in taken]
    if len(spots) < n_move:
        raise GenerationError("not enough free cells for deliveries")
    targets = rng.sample(spots, n_move)
    deliveries = list(pickups)
    for j, d in zip(movers, targets):
        deliveries[j] = d
    used = taken | set(targets)
    if spec.well_formed:
        ring = _perimeter(n)
        if spec.n_agents > len(ring):
            raise GenerationError(f"{spec.n_agents} agents do not fit on the perimeter")
        for _ in range(MAX_REJECTIONS):
            starts = rng.sample(ring, spec.n_agents)
            if _starts_ok(grid, starts):
                break
        else:
            raise GenerationError("no well-formed start placement found")
    else:
        free = [c for c in grid.free_cells() if c not in used]
        if spec.n_agents > len(free):
            raise GenerationError("not enough free cells for agent starts")
        starts = rng.sample(free, spec.n_agents)
    inst = Instance(grid, starts, [Shelf(p, d) for p, d in zip(pickups, deliveries)],
                    name=f"{'wf' if spec.well_formed else 'rnd'}_{n}_{round(spec.den * 100)}_{spec.seed}")
    inst.check()
    return inst


def generate_random(spec: GeneratorSpec) -> Instance:
    """Shelves in random 2x2 blocks; a share of them get a new delivery cell
    among the non-shelf cells; agents start on the remaining cells."""
    if spec.well_formed:
        spec = GeneratorSpec(**{**asdict(spec), "well_formed": False})
    return _generate(spec)


def generate_well_formed(spec: GeneratorSpec) -> Instance:
    """Like :func:`generate_random` but shelves and deliveries stay off the border
    and agents start on border cells other than the corners."""
    return _generate(GeneratorSpec(**{**asdict(spec), "well_formed": True}))


def generate_warehouse(seed: int = 0, n_agents: int = 32) -> Instance:
    """27 x 27 floor with 8 x 4 blocks of 5 x 2 shelves.  Every shelf moves to the
    mirror image (row and column swapped) of some shelf cell, shuffled by seed."""
    n = 27
    rng = random.Random(f"warehouse-{seed}")
    grid = GridMap(n, n)
    pickups = [(r, c) for br in range(4) for r in range(2 + 6 * br, 7 + 6 * br)
               for bc in range(8) for c in (2 + 3 * bc, 3 + 3 * bc)]
    pickups.sort()
    targets = [(c, r) for r, c in pickups]
    rng.shuffle(targets)
    ring = _perimeter(n)
    for _ in range(MAX_REJECTIONS):
        starts = rng.sample(ring, n_agents)
        if _starts_ok(grid, starts):
            break
    else:
        raise GenerationError("no well-formed start placement found")
    inst = Instance(grid, starts, [Shelf(p, d) for p, d in zip(pickups, targets)],
                    name=f"warehouse_{seed}")
    inst.check()
    return inst


# ------------------------------------------------------------------- solving

def algo_config(algo: str, k: float = 8, w: float = 1.2, timeout: float = 60.0,
                seed: int = 0) -> DecompConfig:
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}")
    return DecompConfig(
        w=w, k=0 if algo == "nivf" else k,
        one_robust=algo in ("ivf-r", "pp", "base"), safe=algo in ("pp", "base"),
        time_budget=timeout, seed=seed,
    )


def shelf_trajectories(instance: Instance, algo: str, w: float = 1.2,
                       timeout: float = 60.0) -> TrajectorySet | None:
    """Trajectories an algorithm would compute (None for PAS, which has its own)."""
    if algo == "pas":
        return None
    return plan_shelf_trajectories(instance, algo_config(algo, w=w, timeout=timeout))


def solve_instance(instance: Instance, algo: str, k: float = 8, w: float = 1.2,
                   timeout: float = 60.0, seed: int = 0,
                   trajectories: TrajectorySet | None = None) -> ExecutionLog:
    """Run one algorithm; raises :class:`Failure` on failure."""
    cfg = algo_config(algo, k, w, timeout, seed)
    if algo in ("nivf", "ivf", "ivf-r"):
        return run(instance, cfg, trajectories)
    if algo == "pp":
        return run_pp(instance, cfg, trajectories)
    if algo == "base":
        return run_base(instance, cfg, trajectories)
    return run_pas(instance, cfg)


# -------------------------------------------------------------------- suite

FIELDS = ["size", "den", "M", "N", "algo", "seed", "makespan", "flowtime", "total_time",
          "agent_time", "w", "success", "failure_reason"]
SUMMARY_FIELDS = ["size", "den", "M", "N", "algo", "runs", "solved", "success_rate", "makespan",
                  "flowtime", "total_time", "agent_time", "w", "fail_a", "fail_b", "fail_c",
                  "fail_invalid"]


def _run_cell(args) -> dict:
    spec, algo, k, w, timeout, out_dir = args
    inst = generate_well_formed(spec) if spec.well_formed else generate_random(spec)
    row = {"size": spec.size, "den": spec.den, "M": inst.num_shelves, "N": inst.num_agents,
           "algo": algo, "seed": spec.seed, "w": w, "makespan": "", "flowtime": "",
           "total_time": "", "agent_time": "", "success": 0, "failure_reason": ""}
    t0 = time.perf_counter()
    try:
        log = solve_instance(inst, algo, k, w, timeout, spec.seed)
    except Failure as exc:
        row["failure_reason"] = exc.reason
        row["total_time"] = round(time.perf_counter() - t0, 4)
        return row
    report = validate(inst, log)
    if not report.ok:
        row["failure_reason"] = "invalid"
        return row
    row.update(makespan=report.makespan, flowtime=report.flowtime, success=1,
               total_time=round(log.stats.get("total_time", 0.0), 4),
               agent_time=round(1000 * log.stats.get("agent_time", 0.0), 2))
    if out_dir:
        from .files import save_instance, save_log
        base = FsPath(out_dir) / f"{spec.size}_{round(spec.den * 100)}"
        save_instance(inst, base / f"{spec.seed}.json")
        save_log(log, base / f"{spec.seed}_{algo}_log.json")
    return row


def run_suite(specs: Iterable[GeneratorSpec], algos: Sequence[str], repetitions: int = 1,
              k: float = 8, w: float = 1.2, timeout: float = 60.0, workers: int = 1,
              out_dir: str | None = None) -> list[dict]:
    """One row per (spec, seed, algo).  ``repetitions`` seeds are taken starting at
    each spec's seed."""
    for a in algos:
        if a not in ALGOS:
            raise ValueError(f"unknown algorithm {a!r}")
    jobs = []
    for spec in specs:
        for r in range(repetitions):
            s = GeneratorSpec(**{**asdict(spec), "seed": spec.seed + r})
            for a in algos:
                jobs.append((s, a, k, w, timeout, out_dir))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(j) for j in jobs]
    rows.sort(key=lambda r: (r["size"], r["den"], r["N"], r["algo"], r["seed"]))
    return rows


def summarize(rows: Sequence[dict]) -> list[dict]:
    """Means over solved runs per (size, den, N, algo)."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["size"], r["den"], r["N"], r["algo"]), []).append(r)
    out = []
    for (size, den, n, algo), rs in sorted(groups.items()):
        ok = [r for r in rs if r["success"]]

        def mean(key):
            return round(statistics.fmean(float(r[key]) for r in ok), 2) if ok else ""
        out.append({
            "size": size, "den": den, "M": rs[0]["M"], "N": n, "algo": algo, "runs": len(rs),
            "solved": len(ok), "success_rate": round(len(ok) / len(rs), 4),
            "makespan": mean("makespan"), "flowtime": mean("flowtime"),
            "total_time": mean("total_time"), "agent_time": mean("agent_time"), "w": rs[0]["w"],
            **{f"fail_{c}": sum(r["failure_reason"] == c for r in rs) for c in ("a", "b", "c")},
            "fail_invalid": sum(r["failure_reason"] == "invalid" for r in rs),
        })
    return out


def to_csv(rows: Sequence[dict], fields: Sequence[str] = FIELDS) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
