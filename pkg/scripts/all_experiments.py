#!/usr/bin/env python3
"""Reproduce the full experiment grid behind the bundled results/ files.

Priority order: the cheap noiseless suites first (synchronous, disk, and
asynchronous runs over the 10 shared initial conditions), then the two noise
suites, repeat-major so every initial condition accumulates repeats evenly.
Resumable: rerunning skips completed cells.
"""

import datetime
import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

from run_suite import run_grid  # noqa: E402

ROOT = os.path.join(os.path.dirname(__file__), os.pardir)
CFG = os.path.join(ROOT, "configs")
OUT = os.path.join(ROOT, "results")


def log(msg):
    print(f"[{datetime.datetime.now():%H:%M:%S}] {msg}", flush=True)


def main():
    point = [
        ("floorplan_sync.json", "point_sync.csv"),
        ("floorplan_disk.json", "point_disk.csv"),
        ("floorplan_async.json", "point_async.csv"),
    ]
    for cfg, out in point:
        log(f"suite {out}")
        run_grid(os.path.join(CFG, cfg), os.path.join(OUT, out),
                 ics=10, repeats=1, log=log)
    noise = [
        ("floorplan_noise_dist.json", "noise_dist.csv"),
        ("floorplan_noise_dir.json", "noise_dir.csv"),
    ]
    for rep in range(20):
        for cfg, out in noise:
            log(f"suite {out} repeat {rep}")
            run_grid(os.path.join(CFG, cfg), os.path.join(OUT, out),
                     ics=10, repeats=rep + 1, rep_major=True, log=log)
    log("all experiments complete")


if __name__ == "__main__":
    main()
