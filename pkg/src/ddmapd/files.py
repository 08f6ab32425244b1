"""Readers and writers for map, instance and execution-log files."""
from __future__ import annotations

import json
from pathlib import Path as FsPath

from .domain import ExecutionLog, GridMap, Instance, InvalidInstance, Shelf, StructuralError


def parse_map(text: str) -> GridMap:
    lines = [ln.rstrip("\r") for ln in text.splitlines()]
    header: dict[str, str] = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        if line == "map":
            break
        key, _, value = line.partition(" ")
        header[key] = value.strip()
    else:
        raise InvalidInstance("map file has no 'map' line")
    try:
        height, width = int(header["height"]), int(header["width"])
    except (KeyError, ValueError) as exc:
        raise InvalidInstance("map header needs integer height and width") from exc
    rows = [ln.strip() for ln in lines[i:i + height]]
    if len(rows) != height:
        raise InvalidInstance(f"expected {height} map rows, got {len(rows)}")
    grid = GridMap.from_rows(rows)
    if grid.width != width:
        raise InvalidInstance(f"map rows have width {grid.width}, header says {width}")
    return grid


def format_map(grid: GridMap) -> str:
    return "\n".join(["type octile", f"height {grid.height}", f"width {grid.width}", "map",
                      *grid.rows()]) + "\n"


def load_map(path) -> GridMap:
    return parse_map(FsPath(path).read_text())


def save_map(grid: GridMap, path) -> None:
    FsPath(path).write_text(format_map(grid))


def instance_to_dict(instance: Instance, map_ref: str) -> dict:
    return {
        "map": map_ref,
        "agents": [list(a) for a in instance.agents],
        "shelves": [{"pickup": list(s.pickup), "delivery": list(s.delivery)}
                    for s in instance.shelves],
    }


def instance_from_dict(data: dict, grid: GridMap, name: str = "") -> Instance:
    try:
        agents = [tuple(a) for a in data["agents"]]
        shelves = [Shelf(tuple(s["pickup"]), tuple(s["delivery"])) for s in data["shelves"]]
    except (KeyError, TypeError) as exc:
        raise InvalidInstance(f"malformed instance: {exc}") from exc
    inst = Instance(grid, agents, shelves, name=name)
    inst.check()
    return inst


def load_instance(path) -> Instance:
    path = FsPath(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInstance(f"{path}: {exc}") from exc
    if "map" not in data:
        raise InvalidInstance("instance has no map reference")
    grid = load_map(path.parent / data["map"])
    return instance_from_dict(data, grid, name=path.stem)


def save_instance(instance: Instance, path, map_name: str | None = None) -> None:
    """Write ``path`` and its map file next to it."""
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    map_name = map_name or path.with_suffix(".map").name
    save_map(instance.grid, path.parent / map_name)
    path.write_text(json.dumps(instance_to_dict(instance, map_name)) + "\n")


def log_to_dict(log: ExecutionLog) -> dict:
    return {
        "makespan": log.makespan,
        "flowtime": log.flowtime,
        "agents": [{"path": [list(c) for c in p], "carrying": list(car)}
                   for p, car in zip(log.agent_paths, log.carrying)],
        "shelves": [{"path": [list(c) for c in p]} for p in log.shelf_paths],
        **({"stats": log.stats} if log.stats else {}),
    }


def log_from_dict(data: dict) -> tuple[ExecutionLog, dict]:
    """Returns the log and the metrics it declares about itself."""
    try:
        agents = data["agents"]
        log = ExecutionLog(
            [[tuple(c) for c in a["path"]] for a in agents],
            [list(a["carrying"]) for a in agents],
            [[tuple(c) for c in s["path"]] for s in data["shelves"]],
            dict(data.get("stats", {})),
        )
    except (KeyError, TypeError) as exc:
        raise StructuralError(f"malformed log: {exc}") from exc
    declared = {k: data[k] for k in ("makespan", "flowtime") if k in data}
    return log, declared


def save_log(log: ExecutionLog, path) -> None:
    FsPath(path).write_text(json.dumps(log_to_dict(log)) + "\n")


def load_log(path) -> tuple[ExecutionLog, dict]:
    try:
        data = json.loads(FsPath(path).read_text())
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path}: {exc}") from exc
    return log_from_dict(data)
