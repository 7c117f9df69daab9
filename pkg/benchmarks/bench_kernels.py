"""Compare the compiled kernels against the pure-python fallback.

Runs the same workload twice in subprocesses, once normally (numba) and once
with MPPDP_PURE_PYTHON=1, and prints a timing table.  The two paths execute
identical statements, so the solutions they produce are bit-equal; only the
wall time differs.

Usage: python benchmarks/bench_kernels.py [--requests N] [--iterations N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json
import time

import numpy as np

import mppdp
from mppdp import evaluate
from mppdp.alns import SearchConfig, run_alns
from mppdp.kernels import PURE_PYTHON, route_schedule_terms, route_loads, route_distance
from mppdp.scenarios import ScenarioConfig, build_scenario

n_req, iters = {n_req}, {iters}
cfg = ScenarioConfig(spatial="clustered", tw="tight", n_service_depots=3,
                     n_passenger=n_req // 2, n_freight=n_req - n_req // 2,
                     rng_seed=7)
inst = build_scenario(cfg)

# micro benchmark: evaluate one long route many times
lay = inst.layout
visits = [1]
for r in range(1, min(10, lay.h_r) + 1):
    visits.append(lay.pickup_node(r))
for r in range(1, min(10, lay.h_r) + 1):
    visits.append(lay.dropoff_node(r))
visits.append(lay.dest_of(1))
arr = np.asarray(visits, dtype=np.int64)
buf = np.empty(len(arr))
route_schedule_terms(arr, inst.t, inst.a, inst.b)  # compile before timing
route_loads(arr, inst.q, inst.cls, 16.0, 16.0, buf)
route_distance(arr, inst.w)
t0 = time.perf_counter()
reps = 20000
for _ in range(reps):
    route_schedule_terms(arr, inst.t, inst.a, inst.b)
    route_loads(arr, inst.q, inst.cls, 16.0, 16.0, buf)
    route_distance(arr, inst.w)
micro = (time.perf_counter() - t0) / reps * 1e6

# search benchmark
sc = SearchConfig(lam=iters, lambda_min=iters)
t0 = time.perf_counter()
best, trace = run_alns(inst, sc, rng=np.random.default_rng(3))
search = time.perf_counter() - t0
print(json.dumps({{
    "pure_python": PURE_PYTHON,
    "micro_us_per_route_eval": micro,
    "search_seconds": search,
    "ms_per_iteration": search / max(1, trace.iterations) * 1000.0,
    "objective": evaluate(inst, best).total,
}}))
"""


def run(pure: bool, n_req: int, iters: int) -> dict:
    env = dict(os.environ)
    env["MPPDP_PURE_PYTHON"] = "1" if pure else "0"
    code = WORKLOAD.format(n_req=n_req, iters=iters)
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--requests", type=int, default=40)
    ap.add_argument("--iterations", type=int, default=500)
    args = ap.parse_args()

    print(f"workload: {args.requests} requests, {args.iterations} search iterations")
    rows = []
    for pure in (False, True):
        label = "pure numpy/python" if pure else "numba kernels"
        print(f"running {label} ...", flush=True)
        rows.append((label, run(pure, args.requests, args.iterations)))

    print()
    print(f"{'path':<20} {'route eval us':>14} {'ms/iteration':>14} {'search s':>10} {'objective':>12}")
    for label, r in rows:
        print(f"{label:<20} {r['micro_us_per_route_eval']:>14.2f} "
              f"{r['ms_per_iteration']:>14.2f} {r['search_seconds']:>10.2f} "
              f"{r['objective']:>12.2f}")
    if rows[0][1]["objective"] != rows[1][1]["objective"]:
        print("WARNING: paths disagree on the objective (expected bit-equal)")
    else:
        print("paths agree bit-exactly on the final objective")
    speed = rows[1][1]["ms_per_iteration"] / rows[0][1]["ms_per_iteration"]
    print(f"speedup on the search loop: {speed:.1f}x")


if __name__ == "__main__":
    main()
