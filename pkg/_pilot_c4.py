"""Pilot of the directional scenario experiment (criterion 4 shape)."""
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

import mppdp as m
from mppdp.alns import run_alns, SearchConfig
from mppdp.scenarios import ScenarioConfig, build_scenario
from mppdp.solution import solution_from_dict, solution_to_dict

LAM = int(sys.argv[1]) if len(sys.argv) > 1 else 10000
LMIN = int(sys.argv[2]) if len(sys.argv) > 2 else 4000
BOX = float(sys.argv[3]) if len(sys.argv) > 3 else 20.0
ENS = int(sys.argv[4]) if len(sys.argv) > 4 else 10
NSEEDS = int(sys.argv[5]) if len(sys.argv) > 5 else 10
SEEDS = list(range(NSEEDS))


def run_one(args):
    seed, j, warm_doc = args
    multi = warm_doc is not None
    cfg = ScenarioConfig(spatial="clustered", tw="tight",
                         n_service_depots=3 if multi else 0,
                         n_passenger=20, n_freight=20, rng_seed=seed,
                         box_km=BOX, cluster_radius_km=BOX / 10.0)
    inst = build_scenario(cfg)
    init = solution_from_dict(inst, warm_doc) if multi else None
    best, tr = run_alns(inst, SearchConfig(lam=LAM, lambda_min=LMIN),
                        init=init, rng=np.random.default_rng(seed * 1000 + j))
    ob = m.evaluate(inst, best)
    return seed, j, multi, (ob.total, ob.b1, ob.b2, ob.b3, ob.b4, ob.b5, ob.b6), \
        solution_to_dict(inst, best)


t0 = time.time()
results = {}
with ProcessPoolExecutor(max_workers=2) as pool:
    conv_tasks = [(s, j, None) for s in SEEDS for j in range(ENS)]
    for seed, j, _m, row, doc in pool.map(run_one, conv_tasks):
        results.setdefault(seed, {"conv": {}, "multi": {}})["conv"][j] = (row, doc)
    print(f"conventional wave done at {time.time()-t0:.0f}s", flush=True)

    multi_tasks = []
    for s in SEEDS:
        best_j = min(results[s]["conv"], key=lambda j: results[s]["conv"][j][0][0])
        warm_doc = results[s]["conv"][best_j][1]
        multi_tasks += [(s, j, warm_doc) for j in range(ENS)]
    for seed, j, _m, row, doc in pool.map(run_one, multi_tasks):
        results[seed]["multi"][j] = (row, doc)
    print(f"multi wave done at {time.time()-t0:.0f}s", flush=True)

wins = 0
cm = {k: [] for k in ("conv", "multi")}
for s in SEEDS:
    conv_rows = np.array([results[s]["conv"][j][0] for j in range(ENS)])
    multi_rows = np.array([results[s]["multi"][j][0] for j in range(ENS)])
    cm["conv"].append(conv_rows.mean(axis=0))
    cm["multi"].append(multi_rows.mean(axis=0))
    win = multi_rows[:, 0].mean() < conv_rows[:, 0].mean()
    wins += win
    print(f"seed {s}: conv total={conv_rows[:,0].mean():.1f} b1={conv_rows[:,1].mean():.2f} "
          f"b3={conv_rows[:,3].mean():.0f} b4={conv_rows[:,4].mean():.0f} b6={conv_rows[:,6].mean():.2f} | "
          f"multi total={multi_rows[:,0].mean():.1f} b1={multi_rows[:,1].mean():.2f} "
          f"b3={multi_rows[:,3].mean():.0f} b4={multi_rows[:,4].mean():.0f} "
          f"b5={multi_rows[:,5].mean():.2f} b6={multi_rows[:,6].mean():.2f} win={win}", flush=True)

conv_mean = np.array(cm["conv"]).mean(axis=0)
multi_mean = np.array(cm["multi"]).mean(axis=0)
print(f"\nwins: {wins}/10")
print(f"pooled conv : total={conv_mean[0]:.1f} b1={conv_mean[1]:.3f} b3={conv_mean[3]:.0f} b4={conv_mean[4]:.0f} b6={conv_mean[6]:.3f}")
print(f"pooled multi: total={multi_mean[0]:.1f} b1={multi_mean[1]:.3f} b3={multi_mean[3]:.0f} b4={multi_mean[4]:.0f} b6={multi_mean[6]:.3f}")
print(f"b1 reduction: {conv_mean[1]-multi_mean[1]:.3f}  b3 delta: {multi_mean[3]-conv_mean[3]:.0f}  b4 delta: {multi_mean[4]-conv_mean[4]:.0f}")
print(f"total wall: {time.time()-t0:.0f}s")
