"""Shared fixtures and independent reference implementations used as oracles."""

import numpy as np
import pytest

from mppdp import (
    CostParams, DepotSpec, FleetParams, RequestSpec, ServiceDepotSpec,
    build_instance, poc_instance,
)


@pytest.fixture(scope="session")
def poc0():
    return poc_instance(0)


@pytest.fixture(scope="session")
def poc1():
    return poc_instance(1)


def tiny_instance(n_passenger=1, n_freight=1, kappa=2, vartheta=2, n_sd=1,
                  seed=0, tw="none", box=10.0, n_depots=1, mu=None,
                  service=60.0):
    """Small random Euclidean instance for unit and equivalence tests."""
    rng = np.random.default_rng(seed)

    def pt():
        return (float(rng.uniform(0, box)), float(rng.uniform(0, box)))

    def windows(kind):
        if tw == "none":
            return (1.0, 86400.0), (1.0, 86400.0)
        if tw == "peak":
            if kind == "passenger":
                lohi = (28800.0, 43200.0) if rng.random() < 0.5 else (50400.0, 64800.0)
                return lohi, lohi
            return (36000.0, 57600.0), (36000.0, 57600.0)
        # tight: full-day pickup, 20-minute dropoff bin
        start = float(rng.integers(30000, 60000))
        return (1.0, 86400.0), (start, start + 1200.0)

    requests = []
    for _ in range(n_passenger):
        twp, twd = windows("passenger")
        requests.append(RequestSpec(pt(), pt(), kind="passenger",
                                    service_duration_pickup=service,
                                    service_duration_dropoff=service,
                                    tw_pickup=twp, tw_dropoff=twd))
    for _ in range(n_freight):
        twp, twd = windows("freight")
        requests.append(RequestSpec(pt(), pt(), kind="freight",
                                    service_duration_pickup=service,
                                    service_duration_dropoff=service,
                                    tw_pickup=twp, tw_dropoff=twd))
    depots = [DepotSpec(location=pt()) for _ in range(n_depots)]
    sds = [ServiceDepotSpec(location=pt(), service_duration=300.0)
           for _ in range(n_sd)]
    mu = mu if mu is not None else kappa + vartheta * n_sd + 2
    fleet = FleetParams(kappa=kappa, mu_p=mu, mu_f=mu, vartheta=vartheta)
    return build_instance(requests, depots, sds, fleet, CostParams(),
                          name=f"tiny-{seed}")


# ---------------------------------------------------------------------------
# independent reference computations (plain walks over the raw visit lists)


def naive_route_terms(inst, visits):
    """Travel sum, anchor and slack terms of one route by direct iteration."""
    P = 0.0
    E = -1e100
    Lm = 1e100
    for k in range(1, len(visits)):
        P = P + inst.t[visits[k - 1], visits[k]]
        e = inst.a[visits[k]] - P
        if e > E:
            E = e
        l = inst.b[visits[k]] - P
        if l < Lm:
            Lm = l
    return P, E, Lm


def naive_route_duration(inst, visits):
    a0 = inst.a[visits[0]]
    b0 = inst.b[visits[0]]
    P, E, Lm = naive_route_terms(inst, visits)
    tstar = b0 if b0 < Lm else Lm
    if tstar < a0:
        tstar = a0
    d = E - tstar
    if d < 0.0:
        d = 0.0
    return P + d


def naive_evaluate(inst, sol):
    """Recompute every objective term from the raw visit lists."""
    lay = inst.layout
    b1 = len(sol.routes)
    b2 = 0
    b3 = 0.0
    b4 = 0.0
    b5 = 0
    served = 0
    for r in sol.routes:
        nsd = sum(1 for v in r.visits if v in lay.service_depots)
        b2 += 1 + nsd
        b5 += nsd
        d = 0.0
        for k in range(1, len(r.visits)):
            d = d + inst.w[r.visits[k - 1], r.visits[k]]
        b3 += d
        b4 += naive_route_duration(inst, r.visits)
        served += sum(1 for v in r.visits if v in lay.pickups)
    b6 = lay.h_r - served
    c = inst.cost
    total = (c.alpha_ps * b1 + c.alpha_ms * b2 + c.alpha_td * (b3 / 1000.0)
             + c.alpha_tt * (b4 / 3600.0) + c.alpha_mc * b5 + c.alpha_ud * b6)
    return b1, b2, b3, b4, b5, b6, total


def naive_delayed_schedule(inst, visits):
    """Duration by explicit delay simulation (independent of the closed form):
    try every critical departure candidate and keep the best feasible one."""
    a0 = inst.a[visits[0]]
    b0 = inst.b[visits[0]]

    def simulate(depart):
        s = depart
        arrivals = [s]
        for k in range(1, len(visits)):
            s = s + inst.t[visits[k - 1], visits[k]]
            if s > inst.b[visits[k]] + 1e-9:
                return None
            s = max(s, inst.a[visits[k]])
            arrivals.append(s)
        return arrivals

    base = simulate(a0)
    if base is None:
        return None
    # candidate departures: a0 plus every slack that turns a wait tight
    candidates = {a0, b0}
    s = a0
    for k in range(1, len(visits)):
        s = s + inst.t[visits[k - 1], visits[k]]
        candidates.add(a0 + (inst.a[visits[k]] - s))
        candidates.add(a0 + (inst.b[visits[k]] - s))
        s = max(s, inst.a[visits[k]])
    best = None
    for dep in sorted(candidates):
        if dep < a0 or dep > b0:
            continue
        arr = simulate(dep)
        if arr is None:
            continue
        dur = arr[-1] - arr[0]
        if best is None or dur < best - 1e-9:
            best = dur
    return best
