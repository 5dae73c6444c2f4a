#!/usr/bin/env python3
"""Run a grid of simulation cells (initial conditions x repeats) to a CSV.

Rows append incrementally and already-present cells are skipped, so an
interrupted suite resumes by rerunning the same command.  The output extends
the standard metrics columns with status and cost diagnostics.
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from visrendezvous import simulation as sim  # noqa: E402

EXT_HEADER = (sim.METRICS_HEADER +
              ",status,t_final,violations,events,wall_s")


def done_cells(path):
    if not os.path.exists(path):
        return set()
    seen = set()
    with open(path) as f:
        for line in f:
            cell = line.split(",", 1)[0]
            if cell and cell != "run_id":
                seen.add(cell)
    return seen


def run_cell(config, ic, rep):
    t0 = time.time()
    res = sim.run_indexed(config, ic, rep)
    wall = time.time() - t0
    run_id = f"ic{ic:02d}_rep{rep:02d}"
    row = sim.metrics_csv_row(run_id, config.seed, config.mode, res.metrics)
    extra = (f",{res.status},{res.frames[-1].time:g},"
             f"{len(res.violations)},{len(res.events)},{wall:.1f}")
    return run_id, row + extra


def run_grid(config_path, out_path, ics, repeats, rep_major=False, log=print):
    config = sim.load_config(config_path)
    seen = done_cells(out_path)
    fresh = not os.path.exists(out_path) or not seen
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    cells = [(ic, rep) for rep in range(repeats) for ic in range(ics)] \
        if rep_major else [(ic, rep) for ic in range(ics) for rep in range(repeats)]
    with open(out_path, "a") as f:
        if fresh:
            f.write(EXT_HEADER + "\n")
            f.flush()
        for ic, rep in cells:
            run_id = f"ic{ic:02d}_rep{rep:02d}"
            if run_id in seen:
                continue
            run_id, row = run_cell(config, ic, rep)
            f.write(row + "\n")
            f.flush()
            log(f"{os.path.basename(out_path)} {row}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("out_csv")
    ap.add_argument("--ics", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=1)
    ap.add_argument("--rep-major", action="store_true",
                    help="cover every initial condition once before repeating")
    args = ap.parse_args()
    run_grid(args.config, args.out_csv, args.ics, args.repeats,
             rep_major=args.rep_major)


if __name__ == "__main__":
    main()
