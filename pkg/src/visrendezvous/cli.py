"""Command-line entry points.

Commands: ``check`` validates a workspace file and reports its geometry
budget; ``run`` executes one configured experiment and writes its metrics
row and trace; ``batch`` sweeps initial conditions and repeats into one
aggregated CSV; ``render`` turns a trace into per-frame SVG snapshots.

Exit codes for ``run``: 0 when every component reached its termination
condition, 2 when the step limit was hit first, 3 when an invariant
violation aborted the run.  All commands exit 1 on bad input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import render as render_mod
from . import simulation as sim
from .geometry.contraction import ContractionError, contract
from .geometry.core import polygon_area
from .geometry.environment import InvalidEnvironment, validate_environment

RUN_EXIT = {"converged": 0, "max_steps": 2, "aborted": 3}


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# check


def max_admissible_clearance(env, iters: int = 48) -> float:
    """Largest clearance below which the contracted free space stays nonempty
    and connected, found by bracketing the first contraction failure."""
    lo = 0.0
    hi = env.diameter / 4
    step = env.diameter / 256
    eps = step
    while eps < hi:
        try:
            contract(env, eps)
            lo = eps
        except ContractionError:
            hi = eps
            break
        eps *= 2
    else:
        hi = hi * 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        try:
            contract(env, mid)
            lo = mid
        except ContractionError:
            hi = mid
    return lo


def cmd_check(args) -> int:
    try:
        with open(args.environment) as f:
            data = json.load(f)
        raw = np.array(data["vertices"], dtype=float)
    except (OSError, ValueError, KeyError, TypeError) as e:
        return _fail(f"cannot read {args.environment}: {e}")
    orientation = "counterclockwise" if polygon_area(raw) > 0 else "clockwise"
    try:
        env = validate_environment(raw)
    except InvalidEnvironment as e:
        print(f"{args.environment}: INVALID")
        for problem in e.errors:
            print(f"  - {problem}")
        return 1
    bound = max_admissible_clearance(env)
    print(f"{args.environment}: valid simple polygon")
    print(f"  vertices:             {env.n}")
    print(f"  orientation:          {orientation} (stored counterclockwise)")
    print(f"  reflex vertices:      {env.kappa}")
    print(f"  bounding diameter:    {env.diameter:.6g}")
    print(f"  admissible clearance: up to ~{bound:.6g}")
    return 0


# ---------------------------------------------------------------------------
# run


def _load_config(path, seed_override=None):
    config = sim.load_config(path)
    if seed_override is not None:
        config = dataclasses.replace(config, seed=seed_override)
    return config


def cmd_run(args) -> int:
    try:
        config = _load_config(args.config, args.seed)
    except sim.ConfigError as e:
        return _fail(str(e))
    stem = os.path.splitext(os.path.basename(args.config))[0]
    try:
        result = sim.run(config)
    except (sim.ConfigError, sim.SimulationError) as e:
        return _fail(str(e))
    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, f"{stem}.trace.jsonl")
    csv_path = os.path.join(args.out, f"{stem}.metrics.csv")
    env = sim.resolve_environment(config.environment)
    radius = config.robot_model.radius if config.robot_model.kind == "disk" else None
    sim.write_trace(result.frames, trace_path, environment=env,
                    robot_radius=radius)
    with open(csv_path, "w") as f:
        f.write(sim.METRICS_HEADER + "\n")
        f.write(sim.metrics_csv_row(stem, config.seed, config.mode,
                                    result.metrics) + "\n")
    m = result.metrics
    print(f"status:           {result.status}")
    print(f"final time:       {result.frames[-1].time:g}")
    print(f"mean steps:       {m.mean_steps:.4f}")
    print(f"components:       {m.components_initial} -> {m.components_final}")
    print(f"edges preserved:  {m.edges_preserved_fraction:.6f}")
    if m.cohesive_groups_final is not None:
        print(f"cohesive groups:  {m.cohesive_groups_final}")
    if result.violations:
        print(f"violations:       {len(result.violations)} (first: {result.violations[0]})")
    print(f"trace:            {trace_path}")
    print(f"metrics:          {csv_path}")
    return RUN_EXIT[result.status]


# ---------------------------------------------------------------------------
# batch


def _batch_cell(payload):
    config, ic, rep = payload
    result = sim.run_indexed(config, ic, rep)
    run_id = f"ic{ic:02d}_rep{rep:02d}"
    return sim.metrics_csv_row(run_id, config.seed, config.mode, result.metrics)


def cmd_batch(args) -> int:
    try:
        config = _load_config(args.config, args.seed)
    except sim.ConfigError as e:
        return _fail(str(e))
    cells = [(config, ic, rep)
             for ic in range(args.initial_conditions)
             for rep in range(args.repeats)]
    workers = args.workers or os.cpu_count() or 1
    if workers > 1 and len(cells) > 1:
        import multiprocessing
        with multiprocessing.Pool(workers) as pool:
            rows = pool.map(_batch_cell, cells)
    else:
        rows = [_batch_cell(c) for c in cells]

    cols = [r.split(",") for r in rows]
    means, stds = [], []
    for j in (3, 4, 5, 6, 7):
        vals = [float(c[j]) for c in cols if c[j] != ""]
        means.append(float(np.mean(vals)) if vals else None)
        stds.append(float(np.std(vals)) if vals else None)

    def _summary(name, vals):
        fmt = ["%.4f", "%.6f", "%.4f", "%.4f", "%.4f"]
        body = ",".join("" if v is None else f % v for f, v in zip(fmt, vals))
        return f"{name},{config.seed},{config.mode},{body}"

    out = args.out or (os.path.splitext(os.path.basename(args.config))[0] + "_batch.csv")
    out_dir = os.path.dirname(os.path.abspath(out))
    os.makedirs(out_dir, exist_ok=True)
    with open(out, "w") as f:
        f.write(sim.METRICS_HEADER + "\n")
        for row in rows:
            f.write(row + "\n")
        f.write(_summary("mean", means) + "\n")
        f.write(_summary("stddev", stds) + "\n")
    print(f"{len(rows)} runs -> {out}")
    print(_summary("mean", means))
    print(_summary("stddev", stds))
    return 0


# ---------------------------------------------------------------------------
# render


def cmd_render(args) -> int:
    try:
        trace = sim.read_trace(args.trace)
    except (OSError, ValueError) as e:
        return _fail(str(e))
    try:
        paths = render_mod.render_trace(trace, args.out, every=args.every)
    except (ValueError, InvalidEnvironment) as e:
        return _fail(str(e))
    print(f"{len(paths)} frames -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="visrendezvous",
        description="Visibility-constrained multi-robot gathering experiments.")
    subs = ap.add_subparsers(dest="command", required=True)

    p = subs.add_parser("check", help="validate a workspace polygon file")
    p.add_argument("environment", help="path to a workspace JSON file")
    p.set_defaults(func=cmd_check)

    p = subs.add_parser("run", help="execute one configured run")
    p.add_argument("config", help="path to a run configuration JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=".", help="directory for trace and metrics files")
    p.set_defaults(func=cmd_run)

    p = subs.add_parser("batch", help="sweep initial conditions x repeats")
    p.add_argument("config")
    p.add_argument("--initial-conditions", type=int, default=10, metavar="K")
    p.add_argument("--repeats", type=int, default=1, metavar="R")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel processes (default: CPU count)")
    p.set_defaults(func=cmd_batch)

    p = subs.add_parser("render", help="render a trace to SVG frames")
    p.add_argument("trace", help="path to a trace JSONL file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--every", type=int, default=1, metavar="N",
                   help="render every N-th frame")
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
