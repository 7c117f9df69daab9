"""Scenario generation: spatial demand patterns, time-window regimes, the
service-depot site ladder, and the built-in two-request reference instance.

Geometry is synthetic and fixed: a 20 km x 20 km service area, two depots on
the horizontal midline, and an ordered list of five service-depot sites near
the center.  Scenario n always uses the first n sites of that list, and in
any scenario with at least one service depot the two depot locations also
host service depots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .instance import (
    CostParams, DepotSpec, FleetParams, Instance, RequestSpec,
    ServiceDepotSpec, build_instance, PASSENGER, FREIGHT,
)

SPATIAL_MODES = ("central", "distributed", "clustered")
TW_REGIMES = ("none", "peak", "tight")

DAY_START = 1.0
DAY_END = 86400.0

PEAK_MORNING = (28800.0, 43200.0)
PEAK_AFTERNOON = (50400.0, 64800.0)
PEAK_FREIGHT = (36000.0, 57600.0)

# dropoff-window bins for the tight regime: (start, end, count per 50 requests)
TIGHT_PASSENGER_BINS = (
    (24600, 25800, 2), (25800, 27000, 3), (27000, 28200, 5), (28200, 29400, 6),
    (29400, 30600, 5), (30600, 31800, 3), (31800, 33000, 1), (33000, 34200, 1),
    (55800, 57000, 1), (57000, 58200, 2), (58200, 59400, 3), (59400, 60600, 5),
    (60600, 61800, 6), (61800, 63000, 5), (63000, 64200, 2),
)
TIGHT_FREIGHT_BINS = (
    (34200, 35400, 1), (35400, 36600, 1), (36600, 37800, 1), (37800, 39000, 1),
    (39000, 40200, 2), (40200, 41400, 4), (41400, 42600, 4), (42600, 43800, 5),
    (43800, 45000, 6), (45000, 46200, 6), (46200, 47400, 5), (47400, 48600, 4),
    (48600, 49800, 4), (49800, 51000, 2), (51000, 52200, 1), (52200, 53400, 1),
    (53400, 54600, 1), (54600, 55800, 1),
)


@dataclass(frozen=True)
class ScenarioConfig:
    spatial: str = "distributed"
    tw: str = "none"
    n_service_depots: int = 0
    n_passenger: int = 50
    n_freight: int = 50
    box_km: float = 20.0
    n_clusters: int = 4
    cluster_radius_km: float = 2.0
    rng_seed: int = 0
    kappa: int = 12

    def __post_init__(self):
        if self.spatial not in SPATIAL_MODES:
            raise ValueError(f"unknown spatial mode {self.spatial!r}")
        if self.tw not in TW_REGIMES:
            raise ValueError(f"unknown time-window regime {self.tw!r}")
        if not 0 <= self.n_service_depots <= 5:
            raise ValueError("n_service_depots must be in 0..5")
        if self.n_passenger < 0 or self.n_freight < 0:
            raise ValueError("request counts must be >= 0")

    @property
    def label(self) -> str:
        return f"{self.spatial}-{self.tw}-sd{self.n_service_depots}-seed{self.rng_seed}"


def depot_sites(box: float) -> list[tuple[float, float]]:
    return [(box * 0.25, box * 0.5), (box * 0.75, box * 0.5)]


def service_depot_site_order(box: float) -> list[tuple[float, float]]:
    return [
        (box * 0.50, box * 0.50),
        (box * 0.35, box * 0.35),
        (box * 0.65, box * 0.65),
        (box * 0.35, box * 0.65),
        (box * 0.65, box * 0.35),
    ]


def cluster_centers(box: float, n: int) -> list[tuple[float, float]]:
    quads = [(box * 0.25, box * 0.25), (box * 0.75, box * 0.25),
             (box * 0.25, box * 0.75), (box * 0.75, box * 0.75)]
    return [quads[i % 4] for i in range(n)]


def largest_remainder(weights, total: int) -> list[int]:
    """Integer allocation of ``total`` proportional to ``weights``."""
    wsum = float(sum(weights))
    if wsum == 0 or total == 0:
        return [0] * len(weights)
    exact = [wgt * total / wsum for wgt in weights]
    out = [int(math.floor(x)) for x in exact]
    rem = total - sum(out)
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - out[i]), i))
    for i in order[:rem]:
        out[i] += 1
    return out


def assign_time_windows(requests: list[RequestSpec], regime: str,
                        rng=None) -> list[RequestSpec]:
    """Rewrite request windows for a regime.

    ``none``: full-day windows everywhere.  ``peak``: passengers split half
    and half between the morning and afternoon peaks (pickup and dropoff in
    the same peak), freight mid-day.  ``tight``: pickups stay full-day,
    dropoffs draw 20-minute bins with per-bin counts scaled to the request
    count by largest-remainder rounding; bins are dealt to requests uniformly
    at random under the rng.
    """
    if regime not in TW_REGIMES:
        raise ValueError(f"unknown time-window regime {regime!r}")
    if rng is None:
        rng = np.random.default_rng(0)

    def with_windows(req: RequestSpec, twp, twd) -> RequestSpec:
        return RequestSpec(
            pickup_point=req.pickup_point, dropoff_point=req.dropoff_point,
            kind=req.kind, demand=req.demand,
            service_duration_pickup=req.service_duration_pickup,
            service_duration_dropoff=req.service_duration_dropoff,
            tw_pickup=tuple(map(float, twp)), tw_dropoff=tuple(map(float, twd)),
        )

    full = (DAY_START, DAY_END)
    if regime == "none":
        return [with_windows(r, full, full) for r in requests]

    p_idx = [i for i, r in enumerate(requests) if r.kind == PASSENGER]
    f_idx = [i for i, r in enumerate(requests) if r.kind == FREIGHT]
    out = list(requests)

    if regime == "peak":
        counts = largest_remainder([1, 1], len(p_idx))
        shuffled = [p_idx[i] for i in rng.permutation(len(p_idx))]
        for i in shuffled[:counts[0]]:
            out[i] = with_windows(requests[i], PEAK_MORNING, PEAK_MORNING)
        for i in shuffled[counts[0]:]:
            out[i] = with_windows(requests[i], PEAK_AFTERNOON, PEAK_AFTERNOON)
        for i in f_idx:
            out[i] = with_windows(requests[i], PEAK_FREIGHT, PEAK_FREIGHT)
        return out

    # tight: per-type dropoff bins, full-day pickups
    for idx, bins in ((p_idx, TIGHT_PASSENGER_BINS), (f_idx, TIGHT_FREIGHT_BINS)):
        counts = largest_remainder([c for _, _, c in bins], len(idx))
        windows = []
        for (lo, hi, _c), k in zip(bins, counts):
            windows.extend([(float(lo), float(hi))] * k)
        shuffled = [idx[i] for i in rng.permutation(len(idx))]
        for i, twd in zip(shuffled, windows):
            out[i] = with_windows(requests[i], full, twd)
    return out


def generate_scenario(cfg: ScenarioConfig):
    """Produce instance inputs (requests, depots, service depots).

    Deterministic under ``cfg.rng_seed``; the spatial draws do not depend on
    the time-window regime or the service-depot count, so paired scenarios
    share identical demand geometry.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    box = cfg.box_km
    third = box / 3.0

    def uniform_point():
        return (rng.uniform(0.0, box), rng.uniform(0.0, box))

    def central_point():
        return (rng.uniform(third, 2 * third), rng.uniform(third, 2 * third))

    centers = cluster_centers(box, cfg.n_clusters)

    def cluster_point():
        ci = int(rng.integers(0, len(centers)))
        r = cfg.cluster_radius_km * math.sqrt(rng.random())
        th = rng.random() * 2.0 * math.pi
        cx, cy = centers[ci]
        return (cx + r * math.cos(th), cy + r * math.sin(th))

    if cfg.spatial == "central":
        p_point, f_point = uniform_point, central_point
    elif cfg.spatial == "distributed":
        p_point, f_point = uniform_point, uniform_point
    else:
        p_point, f_point = cluster_point, cluster_point

    requests = []
    for _ in range(cfg.n_passenger):
        requests.append(RequestSpec(pickup_point=p_point(), dropoff_point=p_point(),
                                    kind=PASSENGER))
    for _ in range(cfg.n_freight):
        requests.append(RequestSpec(pickup_point=f_point(), dropoff_point=f_point(),
                                    kind=FREIGHT))
    requests = assign_time_windows(requests, cfg.tw, rng)

    depots = [DepotSpec(location=site) for site in depot_sites(box)]
    sd_sites = service_depot_site_order(box)[:cfg.n_service_depots]
    if cfg.n_service_depots >= 1:
        sd_sites = sd_sites + [d.location for d in depots]
    service_depots = [ServiceDepotSpec(location=s) for s in sd_sites]
    return requests, depots, service_depots


def build_scenario(cfg: ScenarioConfig, cost: CostParams | None = None) -> Instance:
    requests, depots, service_depots = generate_scenario(cfg)
    vt = 5
    mu = cfg.kappa + vt * len(service_depots)  # loose enough to never bind
    fleet = FleetParams(kappa=cfg.kappa, mu_p=mu, mu_f=mu, vartheta=vt)
    return build_instance(requests, depots, service_depots, fleet,
                          cost or CostParams(), name=cfg.label)


def scenario_grid(n_passenger: int = 50, n_freight: int = 50,
                  base_seed: int = 1) -> list[tuple[int, ScenarioConfig]]:
    """The 54-cell study grid: spatial x time-window regime x 0..5 depots."""
    out = []
    sid = 0
    for spatial in SPATIAL_MODES:
        for tw in TW_REGIMES:
            for n_sd in range(6):
                sid += 1
                out.append((sid, ScenarioConfig(
                    spatial=spatial, tw=tw, n_service_depots=n_sd,
                    n_passenger=n_passenger, n_freight=n_freight,
                    rng_seed=base_seed)))
    return out


# ---------------------------------------------------------------------------
# built-in reference instance (one passenger + one freight request)

# Pairwise travel minutes between the reference sites.  Metric (triangle
# inequality holds, several equalities via the service-depot shortcut).
# Site order: depot, passenger pickup/dropoff, freight pickup/dropoff,
# service depot.
_POC_MINUTES = (
    #        D    P+   P-   F+   F-   S
    (0.0, 30.0, 40.0, 30.0, 20.0, 40.0),   # D
    (30.0, 0.0, 40.0, 60.0, 50.0, 50.0),   # P+
    (40.0, 40.0, 0.0, 20.0, 50.0, 10.0),   # P-
    (30.0, 60.0, 20.0, 0.0, 30.0, 10.0),   # F+
    (20.0, 50.0, 50.0, 30.0, 0.0, 40.0),   # F-
    (40.0, 50.0, 10.0, 10.0, 40.0, 0.0),   # S
)

POC_SPEED_KMH = 20.0
POC_UNSERVED_COST = 500.0


def poc_instance(n_service_depots: int = 1) -> Instance:
    """Reference instance: conventional optimum uses two platforms and lasts
    190 minutes; with the service depot a single platform serves everything
    in 140 minutes with one module change.

    Service durations are zero so the trip durations equal the arc minutes.
    The unserved-request cost is raised to 500 EUR so that serving both
    requests is strictly optimal under the default fleet costs.
    """
    if n_service_depots not in (0, 1):
        raise ValueError("the reference instance has at most one service depot")

    full = (0.0, 86400.0)
    requests = [
        RequestSpec(pickup_point=(2.0, 6.0), dropoff_point=(11.0, 2.0),
                    kind=PASSENGER, demand=1.0,
                    service_duration_pickup=0.0, service_duration_dropoff=0.0,
                    tw_pickup=full, tw_dropoff=full),
        RequestSpec(pickup_point=(12.0, 4.0), dropoff_point=(5.0, 1.0),
                    kind=FREIGHT, demand=1.0,
                    service_duration_pickup=0.0, service_duration_dropoff=0.0,
                    tw_pickup=full, tw_dropoff=full),
    ]
    depots = [DepotSpec(location=(4.0, 0.0), service_duration=0.0, tw=full)]
    service_depots = []
    if n_service_depots == 1:
        service_depots = [ServiceDepotSpec(location=(11.5, 3.0),
                                           service_duration=0.0, tw=full)]

    # minutes -> meters at 20 km/h (divide after multiplying to keep the
    # 30/60-minute arcs exactly on integer meters)
    order = [0, 1, 3, 2, 4, 5]  # depot, pickups (P+, F+), dropoffs (P-, F-), sd
    keep = order if n_service_depots == 1 else order[:-1]
    m = [[_POC_MINUTES[i][j] * 1000.0 / 3.0 for j in keep] for i in keep]

    fleet = FleetParams(kappa=2, mu_p=2, mu_f=2, eta=100.0, vartheta=5,
                        gamma_p=16.0, gamma_f=16.0, v=POC_SPEED_KMH)
    cost = CostParams(alpha_ud=POC_UNSERVED_COST)
    return build_instance(requests, depots, service_depots, fleet, cost,
                          distance_matrix=m,
                          name=f"poc-sd{n_service_depots}")
