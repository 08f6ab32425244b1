"""Command line: generate, solve, validate, bench, render.

Exit status: 0 success, 1 invalid input, 2 solver failure, 3 the log has
violations.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path as FsPath

from . import bench
from .decomp import Failure
from .domain import InvalidInstance, StructuralError, validate
from .files import load_instance, load_log, log_to_dict, save_instance
from .fixtures import running_example
from .render import write_frames

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_VIOLATIONS = 0, 1, 2, 3


class InputError(Exception):
    pass


def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if value < 0:
            raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
        return value
    return parse


def _subopt(text):
    value = _positive(float)(text)
    if value < 1:
        raise argparse.ArgumentTypeError("suboptimality factor must be >= 1")
    return value


def _load(path) -> object:
    try:
        return load_instance(path)
    except (OSError, InvalidInstance) as exc:
        raise InputError(str(exc)) from exc


# ------------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    spec = bench.GeneratorSpec(args.size, args.den / 100, args.n, args.seed)
    try:
        if args.kind == "warehouse":
            inst = bench.generate_warehouse(args.seed, args.n)
        elif args.kind == "well-formed":
            inst = bench.generate_well_formed(spec)
        elif args.kind == "example":
            inst = running_example()
        else:
            inst = bench.generate_random(spec)
    except InvalidInstance as exc:
        raise InputError(str(exc)) from exc
    save_instance(inst, args.out)
    print(f"{args.out}: {inst.num_agents} agents, {inst.num_shelves} shelves, "
          f"{sum(s.needs_relocation for s in inst.shelves)} to relocate")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    try:
        log = bench.solve_instance(inst, args.algo, k=args.k, w=args.subopt,
                                   timeout=args.timeout, seed=args.seed)
    except Failure as exc:
        print(f"failure ({exc.reason}): {exc.message}", file=sys.stderr)
        return EXIT_SOLVER
    report = validate(inst, log)
    data = log_to_dict(log)
    out = FsPath(args.out) if args.out else FsPath(args.instance).with_suffix(f".{args.algo}.log.json")
    data["instance"] = os.path.relpath(FsPath(args.instance).resolve(), out.resolve().parent)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(data) + "\n")
    line = {"algo": args.algo, "makespan": log.makespan, "flowtime": log.flowtime,
            "valid": report.ok, "log": str(out)}
    line.update({k: round(v, 4) for k, v in log.stats.items()
                 if k in ("total_time", "agent_time", "trajectory_time")})
    print(json.dumps(line))
    return EXIT_OK if report.ok else EXIT_VIOLATIONS


def _instance_for_log(args):
    if args.instance:
        return _load(args.instance)
    try:
        ref = json.loads(FsPath(args.log).read_text()).get("instance")
    except (OSError, json.JSONDecodeError, AttributeError) as exc:
        raise InputError(f"{args.log}: {exc}") from exc
    if not ref:
        raise InputError("log names no instance; pass --instance")
    return _load(FsPath(args.log).parent / ref)


def cmd_validate(args) -> int:
    inst = _instance_for_log(args)
    try:
        log, declared = load_log(args.log)
        report = validate(inst, log, declared)
    except OSError as exc:
        raise InputError(str(exc)) from exc
    except StructuralError as exc:
        print(f"unreadable log: {exc}")
        return EXIT_VIOLATIONS
    if report.ok:
        print(f"ok: makespan {report.makespan}, flowtime {report.flowtime}")
        return EXIT_OK
    print(f"{len(report.violations)} violation(s)")
    for v in report.violations:
        print(f"  {v}")
    return EXIT_VIOLATIONS


def cmd_bench(args) -> int:
    specs = [bench.GeneratorSpec(size, den / 100, n, args.seed, well_formed=args.well_formed)
             for size in args.sizes for den in args.den for n in args.n]
    try:
        rows = bench.run_suite(specs, args.algos, args.reps, k=args.k, w=args.subopt,
                               timeout=args.timeout, workers=args.workers, out_dir=args.artifacts)
    except InvalidInstance as exc:
        raise InputError(str(exc)) from exc
    text = bench.to_csv(bench.summarize(rows), bench.SUMMARY_FIELDS) if args.summary \
        else bench.to_csv(rows)
    if args.out:
        FsPath(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_render(args) -> int:
    inst = _instance_for_log(args)
    try:
        log, _ = load_log(args.log)
    except (OSError, StructuralError) as exc:
        raise InputError(str(exc)) from exc
    out = args.out or FsPath(args.log).with_suffix("").as_posix() + "_frames"
    files = write_frames(inst, log, out)
    print(f"{len(files)} frames in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ddmapd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp, algo=True):
        if algo:
            sp.add_argument("--algo", choices=bench.ALGOS, default="ivf")
        sp.add_argument("--k", type=_positive(float), default=8, help="look-ahead horizon for IVF")
        sp.add_argument("--subopt", type=_subopt, default=1.2, help="suboptimality factor")
        sp.add_argument("--seed", type=_positive(int), default=0)
        sp.add_argument("--timeout", type=_positive(float), default=60.0, help="seconds")

    g = sub.add_parser("generate", help="write a generated instance")
    g.add_argument("--kind", choices=("random", "well-formed", "warehouse", "example"), default="random")
    g.add_argument("--size", type=_positive(int), default=8)
    g.add_argument("--den", type=_positive(float), default=20, help="shelf density in percent")
    g.add_argument("--n", type=_positive(int), default=4, help="number of agents")
    g.add_argument("--seed", type=_positive(int), default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="plan and write an execution log")
    s.add_argument("instance")
    solver_flags(s)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", help="check a log")
    v.add_argument("log")
    v.add_argument("--instance")
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("bench", help="run a benchmark grid and print CSV")
    b.add_argument("--sizes", type=_positive(int), nargs="+", default=[8])
    b.add_argument("--den", type=_positive(float), nargs="+", default=[20], help="percent")
    b.add_argument("--n", type=_positive(int), nargs="+", default=[4])
    b.add_argument("--algos", choices=bench.ALGOS, nargs="*", default=["ivf"])
    b.add_argument("--reps", type=_positive(int), default=1)
    b.add_argument("--well-formed", action="store_true")
    b.add_argument("--workers", type=_positive(int), default=1)
    b.add_argument("--summary", action="store_true", help="one mean row per setting")
    b.add_argument("--artifacts", help="directory for instances and logs")
    solver_flags(b, algo=False)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("render", help="SVG frame per timestep")
    r.add_argument("log")
    r.add_argument("--instance")
    r.add_argument("--out")
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
