"""Command line entry point: ``adaptive-deploy run|sweep|snapshot|validate``."""
from __future__ import annotations

import argparse
import copy
import itertools
import sys
import traceback
from pathlib import Path

import yaml

from . import simcore
from .simcore import ValidationError

EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
MAX_GRID_KEYS = 2


def _overrides(items: list[str] | None) -> dict:
    out = {}
    for text in items or []:
        key, value = simcore.parse_override(text)
        out[key] = value
    return out


def _grid(items: list[str] | None) -> list[tuple[str, list]]:
    grid = []
    for text in items or []:
        if "=" not in text:
            raise ValidationError(text, "grid must look like key=v1,v2,...")
        key, _, values = text.partition("=")
        vals = [yaml.safe_load(v) for v in values.split(",") if v.strip()]
        if not vals:
            raise ValidationError(key, "grid needs at least one value")
        grid.append((key.strip(), vals))
    if len(grid) > MAX_GRID_KEYS:
        raise ValidationError("--grid", f"at most {MAX_GRID_KEYS} grid keys are supported")
    return grid


def _label(point: dict) -> str:
    return "_".join(f"{k}={v}" for k, v in point.items()).replace("/", "-")


def cmd_validate(args) -> int:
    raw = simcore.load_scenario(args.scenario)
    sc = simcore.validate(raw, _overrides(args.set), args.seed)
    print(f"ok: {sc['algorithm']} scenario, horizon {sc['horizon']}, seed {sc['seed']}")
    return 0


def cmd_run(args) -> int:
    raw = simcore.load_scenario(args.scenario)
    overrides = _overrides(args.set)
    simcore.validate(raw, overrides, args.seed)
    trace = simcore.run(raw, overrides, args.seed)
    for path in trace.write(args.out):
        print(path)
    for k, v in trace.summary.items():
        print(f"{k}: {simcore._fmt(v)}")
    return 0


def cmd_snapshot(args) -> int:
    raw = simcore.load_scenario(args.scenario)
    overrides = _overrides(args.set)
    simcore.validate(raw, overrides, args.seed)
    trace = simcore.run(raw, overrides, args.seed, snapshot_at=args.at)
    if not trace.snapshots:
        raise ValidationError("workspace", "snapshots need a planar workspace and a partitioning algorithm")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in simcore.write_snapshot(trace.snapshots[-1], out, trace.header_block()):
        print(path)
    return 0


def cmd_sweep(args) -> int:
    raw = simcore.load_scenario(args.scenario)
    base = _overrides(args.set)
    grid = _grid(args.grid)
    points = [dict(zip([k for k, _ in grid], combo)) for combo in itertools.product(*[v for _, v in grid])]
    # validate every grid point before running anything
    for p in points:
        simcore.validate(raw, {**base, **p}, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    lines = []
    keys: list[str] = []
    for p in points:
        try:
            trace = simcore.run(copy.deepcopy(raw), {**base, **p}, args.seed)
            trace.write(out / _label(p))
            row = {**p, "status": "ok", **trace.summary}
        except Exception as exc:  # a failing point is flagged, the sweep goes on
            failed += 1
            row = {**p, "status": f"failed: {type(exc).__name__}: {exc}".replace(",", ";")}
        lines.append(row)
        keys += [k for k in row if k not in keys]
    with open(out / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(keys) + "\n")
        for row in lines:
            fh.write(",".join(simcore._fmt(row.get(k)) for k in keys) + "\n")
    print(out / "sweep.csv")
    if failed:
        print(f"{failed} of {len(points)} grid points failed", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adaptive-deploy",
                                 description="Event-driven robot deployment and partitioning simulations.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("scenario", help="scenario file, or the name of a bundled scenario")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a scenario value by dotted key (repeatable)")
        if out:
            p.add_argument("--out", default="out", help="output directory (default: out)")

    p = sub.add_parser("run", help="run one scenario and write its trace and summary")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="run a scenario over a grid of at most two keys")
    common(p)
    p.add_argument("--grid", action="append", required=True, metavar="KEY=V1,V2",
                   help="grid axis (repeatable, at most two)")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("snapshot", help="write the ownership raster and positions after K events")
    common(p)
    p.add_argument("--at", type=int, required=True, metavar="K")
    p.set_defaults(func=cmd_snapshot)
    p = sub.add_parser("validate", help="check a scenario without running it")
    common(p, out=False)
    p.set_defaults(func=cmd_validate)
    sub.add_parser("list", help="list bundled scenarios").set_defaults(
        func=lambda a: print("\n".join(simcore.bundled_scenarios())) or 0)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FileNotFoundError, yaml.YAMLError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        traceback.print_exc(limit=3)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
