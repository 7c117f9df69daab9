"""Problem instance model: expanded-graph node indexing and derived data.

The expanded graph duplicates every physical depot pair ``kappa`` times and
every physical service depot ``vartheta`` times, so each duplicate node can
be visited at most once and the rest of the toolkit never needs visit
counters.  Node ids are 1-based and laid out as

    origin depots | request pickups | request dropoffs | destination depots | service depots
    1 .. h_d      | h_d+1 .. h_d+h_r | .. h_d+2h_r      | .. 2h_d+2h_r       | .. 2h_d+2h_r+vt*n_sd

with ``h_d = kappa * (number of physical depots)``.  Pickup ``i`` pairs with
dropoff ``i + h_r``; origin depot ``i`` pairs with destination
``i + h_d + 2*h_r``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .kernels import (
    CLS_DEPOT_ORIGIN, CLS_DEPOT_DEST, CLS_PICKUP_P, CLS_PICKUP_F,
    CLS_DROP_P, CLS_DROP_F, CLS_SD,
)

PASSENGER = "passenger"
FREIGHT = "freight"

NODE_CLASS_NAMES = {
    CLS_DEPOT_ORIGIN: "depot-origin",
    CLS_DEPOT_DEST: "depot-destination",
    CLS_PICKUP_P: "pickup-passenger",
    CLS_PICKUP_F: "pickup-freight",
    CLS_DROP_P: "dropoff-passenger",
    CLS_DROP_F: "dropoff-freight",
    CLS_SD: "service-depot",
}


@dataclass(frozen=True)
class CostParams:
    """Objective coefficients, EUR.  Time is priced per hour, distance per km."""
    alpha_tt: float = 6.9       # per hour of vehicle trip time
    alpha_ps: float = 313.67    # per platform
    alpha_ms: float = 156.84    # per module
    alpha_td: float = 0.1       # per km traveled
    alpha_mc: float = 8.8       # per module change
    alpha_ud: float = 470.52    # per unserved request

    def __post_init__(self):
        for name, val in asdict(self).items():
            if val < 0:
                raise ValueError(f"cost parameter {name} must be >= 0, got {val}")


@dataclass(frozen=True)
class FleetParams:
    """Fleet limits and physical platform characteristics."""
    kappa: int                  # max number of platforms
    mu_p: int | None = None     # max passenger modules (default: kappa)
    mu_f: int | None = None     # max freight modules (default: kappa)
    eta: float = 100.0          # max range per platform, km
    vartheta: int = 5           # max visits per physical service depot
    gamma_p: float = 16.0       # passenger module capacity
    gamma_f: float = 16.0       # freight module capacity
    v: float = 20.0             # travel speed, km/h

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.vartheta < 0:
            raise ValueError("vartheta must be >= 0")
        if self.gamma_p < 1 or self.gamma_f < 1:
            raise ValueError("module capacities must be >= 1")
        if self.eta <= 0 or self.v <= 0:
            raise ValueError("eta and v must be > 0")
        if self.mu_p is None:
            object.__setattr__(self, "mu_p", self.kappa)
        if self.mu_f is None:
            object.__setattr__(self, "mu_f", self.kappa)


@dataclass(frozen=True)
class RequestSpec:
    """One pickup/dropoff request of a single kind."""
    pickup_point: tuple[float, float]
    dropoff_point: tuple[float, float]
    kind: str = PASSENGER
    demand: float = 1.0
    service_duration_pickup: float = 60.0
    service_duration_dropoff: float = 60.0
    tw_pickup: tuple[float, float] = (1.0, 86400.0)
    tw_dropoff: tuple[float, float] = (1.0, 86400.0)

    def __post_init__(self):
        if self.kind not in (PASSENGER, FREIGHT):
            raise ValueError(f"unknown request kind {self.kind!r}")
        if self.demand <= 0:
            raise ValueError("demand must be > 0")
        for tw in (self.tw_pickup, self.tw_dropoff):
            if tw[0] > tw[1]:
                raise ValueError(f"time window {tw} has a < b violated")


@dataclass(frozen=True)
class DepotSpec:
    location: tuple[float, float]
    service_duration: float = 0.0
    tw: tuple[float, float] = (0.0, 86400.0)


@dataclass(frozen=True)
class ServiceDepotSpec:
    location: tuple[float, float]
    service_duration: float = 1800.0
    tw: tuple[float, float] = (0.0, 86400.0)


@dataclass(frozen=True)
class NodeIndexLayout:
    """Half-open 1-based index ranges of the expanded node set."""
    h_r: int
    h_d: int
    n_sd: int
    vartheta: int

    @property
    def n_nodes(self) -> int:
        return 2 * self.h_d + 2 * self.h_r + self.vartheta * self.n_sd

    @property
    def origin_depots(self) -> range:
        return range(1, self.h_d + 1)

    @property
    def pickups(self) -> range:
        return range(self.h_d + 1, self.h_d + self.h_r + 1)

    @property
    def dropoffs(self) -> range:
        return range(self.h_d + self.h_r + 1, self.h_d + 2 * self.h_r + 1)

    @property
    def dest_depots(self) -> range:
        return range(self.h_d + 2 * self.h_r + 1, 2 * self.h_d + 2 * self.h_r + 1)

    @property
    def service_depots(self) -> range:
        n = 2 * self.h_d + 2 * self.h_r
        return range(n + 1, n + self.vartheta * self.n_sd + 1)

    def pickup_node(self, request_id: int) -> int:
        """Pickup node of 1-based request id."""
        return self.h_d + request_id

    def dropoff_node(self, request_id: int) -> int:
        return self.h_d + self.h_r + request_id

    def request_of(self, node: int) -> int:
        """1-based request id of a request node, 0 otherwise."""
        if node in self.pickups:
            return node - self.h_d
        if node in self.dropoffs:
            return node - self.h_d - self.h_r
        return 0

    def dest_of(self, origin_node: int) -> int:
        return origin_node + self.h_d + 2 * self.h_r


@dataclass
class Instance:
    """Immutable expanded-graph instance.

    Arrays are 1-based (slot 0 is padding): ``coords`` km, ``q`` demand,
    ``o`` service seconds, ``a``/``b`` window seconds, ``cls`` node class
    codes, ``w`` distance meters, ``t`` travel seconds including the service
    duration of the from-node.
    """
    layout: NodeIndexLayout
    cost: CostParams
    fleet: FleetParams
    coords: np.ndarray
    q: np.ndarray
    o: np.ndarray
    a: np.ndarray
    b: np.ndarray
    cls: np.ndarray
    w: np.ndarray
    t: np.ndarray
    depot_groups: list[list[int]]       # origin-depot duplicates per physical depot
    sd_sites: list[list[int]]           # service-depot duplicates per physical site
    requests: list[RequestSpec] = field(default_factory=list)
    depots: list[DepotSpec] = field(default_factory=list)
    service_depots: list[ServiceDepotSpec] = field(default_factory=list)
    distance_matrix: np.ndarray | None = None   # site-level override, meters
    name: str = ""
    _metric: bool | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.layout.n_nodes

    def is_metric(self) -> bool:
        """Whether ``w`` satisfies the triangle inequality (cached)."""
        if self._metric is None:
            ww = self.w[1:, 1:]
            ok = True
            for k in range(ww.shape[0]):
                if np.any(ww[:, k:k + 1] + ww[k:k + 1, :] < ww - 1e-6):
                    ok = False
                    break
            self._metric = ok
        return self._metric

    @property
    def n_requests(self) -> int:
        return self.layout.h_r

    def request_kind(self, request_id: int) -> str:
        return self.requests[request_id - 1].kind

    def request_type(self, request_id: int) -> int:
        """0 for passenger, 1 for freight."""
        return 0 if self.requests[request_id - 1].kind == PASSENGER else 1

    def sd_site_of(self, node: int) -> int:
        """Physical site index of a service-depot node."""
        lay = self.layout
        off = node - (2 * lay.h_d + 2 * lay.h_r) - 1
        if off < 0 or lay.vartheta == 0:
            raise IndexError(f"node {node} is not a service depot")
        return off // lay.vartheta


def _site_count(requests, depots, service_depots):
    return len(depots) + 2 * len(requests) + len(service_depots)


def build_instance(requests: list[RequestSpec], depots: list[DepotSpec],
                   service_depots: list[ServiceDepotSpec],
                   fleet: FleetParams, cost: CostParams | None = None,
                   distance_matrix=None, name: str = "") -> Instance:
    """Assemble the expanded graph.

    ``distance_matrix`` optionally overrides Euclidean geometry; it is indexed
    over physical sites in the order depots, pickups, dropoffs, service
    depots, in meters.
    """
    if not depots:
        raise ValueError("at least one depot is required")
    cost = cost or CostParams()

    h_r = len(requests)
    kappa = fleet.kappa
    vt = fleet.vartheta
    n_phys_d = len(depots)
    n_sd = len(service_depots)
    h_d = kappa * n_phys_d
    layout = NodeIndexLayout(h_r=h_r, h_d=h_d, n_sd=n_sd, vartheta=vt)
    n = layout.n_nodes

    coords = np.zeros((n + 1, 2))
    q = np.zeros(n + 1)
    o = np.zeros(n + 1)
    a = np.zeros(n + 1)
    b = np.zeros(n + 1)
    cls = np.zeros(n + 1, dtype=np.int8)
    site_of = np.zeros(n + 1, dtype=np.int64)  # physical site per node

    depot_groups: list[list[int]] = []
    for p, dep in enumerate(depots):
        group = []
        for c in range(kappa):
            i = p * kappa + c + 1
            group.append(i)
            coords[i] = dep.location
            o[i] = dep.service_duration
            a[i], b[i] = dep.tw
            cls[i] = CLS_DEPOT_ORIGIN
            site_of[i] = p
            j = layout.dest_of(i)
            coords[j] = dep.location
            o[j] = dep.service_duration
            a[j], b[j] = dep.tw
            cls[j] = CLS_DEPOT_DEST
            site_of[j] = p
        depot_groups.append(group)

    for r, req in enumerate(requests):
        i = layout.pickup_node(r + 1)
        j = layout.dropoff_node(r + 1)
        coords[i] = req.pickup_point
        coords[j] = req.dropoff_point
        q[i] = req.demand
        q[j] = -req.demand
        o[i] = req.service_duration_pickup
        o[j] = req.service_duration_dropoff
        a[i], b[i] = req.tw_pickup
        a[j], b[j] = req.tw_dropoff
        if req.kind == PASSENGER:
            cls[i], cls[j] = CLS_PICKUP_P, CLS_DROP_P
        else:
            cls[i], cls[j] = CLS_PICKUP_F, CLS_DROP_F
        site_of[i] = n_phys_d + r
        site_of[j] = n_phys_d + h_r + r

    sd_sites: list[list[int]] = []
    base = 2 * h_d + 2 * h_r
    for s, sd in enumerate(service_depots):
        dups = []
        for c in range(vt):
            i = base + s * vt + c + 1
            dups.append(i)
            coords[i] = sd.location
            o[i] = sd.service_duration
            a[i], b[i] = sd.tw
            cls[i] = CLS_SD
            site_of[i] = n_phys_d + 2 * h_r + s
        sd_sites.append(dups)

    if distance_matrix is not None:
        dm = np.asarray(distance_matrix, dtype=float)
        expected = _site_count(requests, depots, service_depots)
        if dm.shape != (expected, expected):
            raise ValueError(
                f"distance matrix must be {expected}x{expected} "
                f"(depots, pickups, dropoffs, service depots), got {dm.shape}")
        w = np.zeros((n + 1, n + 1))
        w[1:, 1:] = dm[site_of[1:, None], site_of[None, 1:]]
    else:
        dm = None
        w = np.zeros((n + 1, n + 1))
        dx = coords[1:, 0:1] - coords[1:, 0:1].T
        dy = coords[1:, 1:2] - coords[1:, 1:2].T
        w[1:, 1:] = np.hypot(dx, dy) * 1000.0
    np.fill_diagonal(w, 0.0)

    # t[i, j] = distance/speed + service duration of the from-node
    t = np.zeros((n + 1, n + 1))
    t[1:, 1:] = w[1:, 1:] * 3.6 / fleet.v + o[1:, None]
    t[0, :] = 0.0
    t[:, 0] = 0.0

    return Instance(
        layout=layout, cost=cost, fleet=fleet,
        coords=coords, q=q, o=o, a=a, b=b, cls=cls, w=w, t=t,
        depot_groups=depot_groups, sd_sites=sd_sites,
        requests=list(requests), depots=list(depots),
        service_depots=list(service_depots),
        distance_matrix=dm, name=name,
    )


def travel_time(inst: Instance, i: int, j: int) -> float:
    """Travel duration from i to j including i's service time, seconds."""
    n = inst.n_nodes
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexError(f"node index out of range: ({i}, {j}), n={n}")
    return float(inst.t[i, j])


def big_m(inst: Instance) -> float:
    """Schedule-propagation constant: max over i, j of b_i + t_ij - a_j."""
    bb = inst.b[1:]
    aa = inst.a[1:]
    return float(np.max(bb[:, None] + inst.t[1:, 1:] - aa[None, :]))


def node_class(inst: Instance, i: int) -> str:
    if not 1 <= i <= inst.n_nodes:
        raise IndexError(f"node index out of range: {i}")
    return NODE_CLASS_NAMES[int(inst.cls[i])]


# ---------------------------------------------------------------------------
# JSON serialization.  Coordinates in km, times in seconds, distances in
# meters (the optional site-level matrix).


def instance_to_dict(inst: Instance) -> dict:
    doc = {
        "requests": [
            {
                "pickup": list(r.pickup_point),
                "dropoff": list(r.dropoff_point),
                "kind": r.kind,
                "demand": r.demand,
                "service": [r.service_duration_pickup, r.service_duration_dropoff],
                "tw_pickup": list(r.tw_pickup),
                "tw_dropoff": list(r.tw_dropoff),
            }
            for r in inst.requests
        ],
        "depots": [
            {"location": list(d.location), "service": d.service_duration,
             "tw": list(d.tw)}
            for d in inst.depots
        ],
        "service_depots": [
            {"location": list(s.location), "service": s.service_duration,
             "tw": list(s.tw)}
            for s in inst.service_depots
        ],
        "fleet": {
            "kappa": inst.fleet.kappa, "mu_p": inst.fleet.mu_p,
            "mu_f": inst.fleet.mu_f, "eta": inst.fleet.eta,
            "vartheta": inst.fleet.vartheta, "gamma_p": inst.fleet.gamma_p,
            "gamma_f": inst.fleet.gamma_f, "v": inst.fleet.v,
        },
        "cost": {
            "alpha_tt": inst.cost.alpha_tt, "alpha_ps": inst.cost.alpha_ps,
            "alpha_ms": inst.cost.alpha_ms, "alpha_td": inst.cost.alpha_td,
            "alpha_mc": inst.cost.alpha_mc, "alpha_ud": inst.cost.alpha_ud,
        },
    }
    if inst.name:
        doc["name"] = inst.name
    if inst.distance_matrix is not None:
        doc["distance_matrix"] = [list(row) for row in inst.distance_matrix]
    return doc


def instance_from_dict(doc: dict) -> Instance:
    requests = [
        RequestSpec(
            pickup_point=tuple(r["pickup"]), dropoff_point=tuple(r["dropoff"]),
            kind=r["kind"], demand=r.get("demand", 1.0),
            service_duration_pickup=r.get("service", [60.0, 60.0])[0],
            service_duration_dropoff=r.get("service", [60.0, 60.0])[1],
            tw_pickup=tuple(r.get("tw_pickup", (1.0, 86400.0))),
            tw_dropoff=tuple(r.get("tw_dropoff", (1.0, 86400.0))),
        )
        for r in doc["requests"]
    ]
    depots = [
        DepotSpec(location=tuple(d["location"]),
                  service_duration=d.get("service", 0.0),
                  tw=tuple(d.get("tw", (0.0, 86400.0))))
        for d in doc["depots"]
    ]
    service_depots = [
        ServiceDepotSpec(location=tuple(s["location"]),
                         service_duration=s.get("service", 1800.0),
                         tw=tuple(s.get("tw", (0.0, 86400.0))))
        for s in doc.get("service_depots", [])
    ]
    fleet = FleetParams(**doc["fleet"])
    cost = CostParams(**doc["cost"]) if "cost" in doc else CostParams()
    return build_instance(
        requests, depots, service_depots, fleet, cost,
        distance_matrix=doc.get("distance_matrix"),
        name=doc.get("name", ""),
    )


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
