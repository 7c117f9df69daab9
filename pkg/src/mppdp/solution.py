"""Candidate solutions: routes, schedules, loads, the six-term objective and
the full feasibility checker.

A route is an ordered visit list from an origin-depot node to its paired
destination node.  Module types are not tracked by id: a segment (maximal
run between depot/service-depot boundaries) carries exactly one module type,
derived from the requests it serves, and types alternate across every
service-depot visit.  Violations are reported with the id of the matching
model constraint (equation number) so checker output can be traced back to
the formulation.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .instance import Instance, PASSENGER, FREIGHT
from .kernels import (
    CLS_DEPOT_ORIGIN, CLS_DEPOT_DEST, CLS_SD,
    CLS_PICKUP_P, CLS_PICKUP_F, CLS_DROP_P, CLS_DROP_F,
)


class ScheduleInfeasible(ValueError):
    """A visit cannot be reached before its window closes."""

    def __init__(self, node: int, position: int):
        super().__init__(f"time window violated at node {node} (visit {position})")
        self.node = node
        self.position = position


class LoadInfeasible(ValueError):
    """Capacity, load-conservation or segment-typing violation."""

    def __init__(self, code: int, node: int, position: int):
        super().__init__(f"load violation code {code} at node {node} (visit {position})")
        self.code = code
        self.node = node
        self.position = position


@dataclass
class Route:
    """One platform trip: origin depot, served nodes, paired destination."""
    platform_id: int
    visits: list[int]
    uid: int = 0

    def visits_array(self) -> np.ndarray:
        return np.asarray(self.visits, dtype=np.int64)

    def copy(self) -> "Route":
        return Route(self.platform_id, list(self.visits), self.uid)


@dataclass
class Schedule:
    """Arrival times and post-service loads along one route."""
    nodes: list[int]
    arrival: np.ndarray
    load: np.ndarray | None
    departure: float
    duration: float

    def arrival_at(self, node: int) -> float:
        return float(self.arrival[self.nodes.index(node)])


@dataclass
class Solution:
    """A set of routes plus the unserved request ids (1-based)."""
    routes: list[Route] = field(default_factory=list)
    unserved: set[int] = field(default_factory=set)
    next_uid: int = 1

    def copy(self) -> "Solution":
        return Solution([r.copy() for r in self.routes], set(self.unserved),
                        self.next_uid)

    def new_uid(self) -> int:
        u = self.next_uid
        self.next_uid += 1
        return u

    def used_nodes(self) -> set[int]:
        return {v for r in self.routes for v in r.visits}

    def served_requests(self, inst: Instance) -> list[int]:
        lay = inst.layout
        out = []
        for r in self.routes:
            for v in r.visits:
                rid = lay.request_of(v)
                if rid and v in lay.pickups:
                    out.append(rid)
        return sorted(out)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """The six cost terms and their weighted total (EUR)."""
    b1: int       # platforms used
    b2: int       # modules used
    b3: float     # total distance, meters
    b4: float     # total trip duration, seconds
    b5: int       # module changes (service-depot visits)
    b6: int       # unserved requests
    total: float


@dataclass(frozen=True)
class Violation:
    constraint: str
    detail: str
    route: int | None = None
    node: int | None = None


def empty_solution(inst: Instance) -> Solution:
    return Solution(routes=[], unserved=set(range(1, inst.n_requests + 1)))


def route_segments(inst: Instance, route: Route) -> list[tuple[str | None, list[int]]]:
    """Split a route into (module_type, visits) segments at service depots."""
    segs: list[tuple[str | None, list[int]]] = []
    cur: list[int] = []
    for v in route.visits[1:-1]:
        if inst.cls[v] == CLS_SD:
            segs.append((_segment_kind(inst, cur), cur))
            cur = []
        else:
            cur.append(v)
    segs.append((_segment_kind(inst, cur), cur))
    return segs


def _segment_kind(inst: Instance, nodes: list[int]) -> str | None:
    for v in nodes:
        c = inst.cls[v]
        if c in (CLS_PICKUP_P, CLS_DROP_P):
            return PASSENGER
        if c in (CLS_PICKUP_F, CLS_DROP_F):
            return FREIGHT
    return None


def sd_visit_count(inst: Instance, route: Route) -> int:
    return sum(1 for v in route.visits if inst.cls[v] == CLS_SD)


def compute_schedule(inst: Instance, route: Route) -> Schedule:
    """Minimal-duration schedule for a route.

    The forward pass clamps arrivals to window openings; the departure is
    then delayed by the smallest slack that removes the accumulated waiting,
    which minimizes the trip duration without reordering visits.  Raises
    :class:`ScheduleInfeasible` at the first unreachable deadline.
    """
    visits = route.visits_array()
    viol, P, E, Lm = kernels.route_schedule_terms(visits, inst.t, inst.a, inst.b)
    if viol >= 0:
        raise ScheduleInfeasible(int(visits[viol]), int(viol))
    a0 = float(inst.a[visits[0]])
    b0 = float(inst.b[visits[0]])
    duration = kernels.duration_from_terms(P, E, Lm, a0, b0)
    tstar = min(b0, Lm)
    depart = max(a0, min(E, tstar))
    arrival = np.empty(len(visits))
    kernels.route_arrivals(visits, inst.t, inst.a, depart, arrival)
    load = np.empty(len(visits))
    code, _pos = kernels.route_loads(visits, inst.q, inst.cls,
                                     inst.fleet.gamma_p, inst.fleet.gamma_f, load)
    return Schedule(nodes=list(route.visits), arrival=arrival,
                    load=load if code == kernels.LOAD_OK else None,
                    departure=float(depart), duration=float(duration))


def compute_loads(inst: Instance, route: Route) -> np.ndarray:
    """Running load profile; raises :class:`LoadInfeasible` on violation."""
    visits = route.visits_array()
    load = np.empty(len(visits))
    code, pos = kernels.route_loads(visits, inst.q, inst.cls,
                                    inst.fleet.gamma_p, inst.fleet.gamma_f, load)
    if code != kernels.LOAD_OK:
        raise LoadInfeasible(int(code), int(visits[pos]), int(pos))
    return load


def route_duration(inst: Instance, route: Route) -> float:
    """Minimal trip duration in seconds; total even for window-infeasible routes."""
    visits = route.visits_array()
    _viol, P, E, Lm = kernels.route_schedule_terms(visits, inst.t, inst.a, inst.b)
    return float(kernels.duration_from_terms(
        P, E, Lm, float(inst.a[visits[0]]), float(inst.b[visits[0]]))
    )


def route_distance_m(inst: Instance, route: Route) -> float:
    return float(kernels.route_distance(route.visits_array(), inst.w))


def route_cost(inst: Instance, route: Route) -> float:
    """Stand-alone cost of one route (fixed platform/module terms plus travel)."""
    c = inst.cost
    visits = route.visits_array()
    _viol, P, E, Lm, dist, n_sd, _n_pick = kernels.route_eval_terms(
        visits, inst.t, inst.a, inst.b, inst.w, inst.cls)
    dur = kernels.duration_from_terms(
        P, E, Lm, float(inst.a[visits[0]]), float(inst.b[visits[0]]))
    return (c.alpha_ps + c.alpha_ms * (1 + n_sd) + c.alpha_mc * n_sd
            + c.alpha_td * (dist / 1000.0) + c.alpha_tt * (dur / 3600.0))


def evaluate(inst: Instance, sol: Solution) -> ObjectiveBreakdown:
    """Total objective evaluation; defined for window/capacity-infeasible
    solutions as well (the checker reports violations separately)."""
    lay = inst.layout
    b1 = len(sol.routes)
    b2 = 0
    b3 = 0.0
    b4 = 0.0
    b5 = 0
    served = 0
    for r in sol.routes:
        visits = r.visits_array()
        _viol, P, E, Lm, dist, n_sd, n_pick = kernels.route_eval_terms(
            visits, inst.t, inst.a, inst.b, inst.w, inst.cls)
        b2 += 1 + n_sd
        b5 += n_sd
        b3 += dist
        b4 += kernels.duration_from_terms(
            P, E, Lm, float(inst.a[visits[0]]), float(inst.b[visits[0]]))
        served += n_pick
    b6 = lay.h_r - served
    c = inst.cost
    total = (c.alpha_ps * b1 + c.alpha_ms * b2 + c.alpha_td * (b3 / 1000.0)
             + c.alpha_tt * (b4 / 3600.0) + c.alpha_mc * b5 + c.alpha_ud * b6)
    return ObjectiveBreakdown(b1=b1, b2=b2, b3=b3, b4=b4, b5=b5, b6=b6, total=total)


def objective(inst: Instance, sol: Solution) -> float:
    return evaluate(inst, sol).total


# ---------------------------------------------------------------------------
# feasibility checker


_ARC_BAN_IDS = {
    ("pickup", "sd"): "36",
    ("pickup", "dest"): "36",
    ("sd", "drop"): "38",
    ("origin", "drop"): "38",
    ("sd", "sd"): "40",
    ("origin", "sd"): "42",
    ("sd", "dest"): "43",
}


def _arc_kind(inst: Instance, v: int) -> str:
    c = inst.cls[v]
    if c == CLS_DEPOT_ORIGIN:
        return "origin"
    if c == CLS_DEPOT_DEST:
        return "dest"
    if c == CLS_SD:
        return "sd"
    if c in (CLS_PICKUP_P, CLS_PICKUP_F):
        return "pickup"
    return "drop"


def check_feasibility(inst: Instance, sol: Solution) -> list[Violation]:
    """Verify a solution against the full constraint set.

    An empty report means the solution satisfies every model constraint:
    visit uniqueness (8), request/module type match (10, 11), pickup and
    dropoff on one platform (12) with precedence (22), depot-bounded routes
    (19, 20), time windows (24), platform range (25), module capacities
    (26-28), module-type alternation at service depots (17, 18), forbidden
    arcs (36-43), one departure per platform per physical depot (31), and the
    fleet bounds on platforms and modules.
    """
    lay = inst.layout
    out: list[Violation] = []
    kappa = inst.fleet.kappa

    if len(sol.routes) > kappa:
        out.append(Violation("kappa", f"{len(sol.routes)} routes exceed kappa={kappa}"))
    seen_platforms: dict[int, int] = {}
    for ri, r in enumerate(sol.routes):
        if not 1 <= r.platform_id <= kappa:
            out.append(Violation("structure", f"platform id {r.platform_id} outside 1..{kappa}", route=ri))
        if r.platform_id in seen_platforms:
            out.append(Violation("31", f"platform {r.platform_id} departs twice", route=ri))
        seen_platforms[r.platform_id] = ri

    seen_nodes: set[int] = set()
    pickup_route: dict[int, tuple[int, int]] = {}
    drop_route: dict[int, tuple[int, int]] = {}
    n_seg_p = 0
    n_seg_f = 0

    for ri, r in enumerate(sol.routes):
        vs = r.visits
        if len(vs) < 2:
            out.append(Violation("structure", "route has no depot pair", route=ri))
            continue
        for v in vs:
            if not 1 <= v <= lay.n_nodes:
                out.append(Violation("structure", f"unknown node id {v}", route=ri, node=v))
        if any(not 1 <= v <= lay.n_nodes for v in vs):
            continue
        if vs[0] not in lay.origin_depots:
            out.append(Violation("19", f"route starts at node {vs[0]}", route=ri, node=vs[0]))
            continue
        if vs[-1] != lay.dest_of(vs[0]):
            out.append(Violation("20", f"route ends at {vs[-1]}, expected {lay.dest_of(vs[0])}",
                                 route=ri, node=vs[-1]))
            continue
        if len(vs) == 2:
            out.append(Violation("structure", "route serves no request", route=ri))
            continue
        for v in vs[1:-1]:
            c = inst.cls[v]
            if c == CLS_DEPOT_ORIGIN:
                out.append(Violation("structure", f"origin depot {v} mid-route", route=ri, node=v))
            elif c == CLS_DEPOT_DEST:
                out.append(Violation("34", f"departure from destination depot {v}", route=ri, node=v))

        for v in vs:
            if v in seen_nodes:
                out.append(Violation("8", f"node {v} visited more than once", node=v))
            seen_nodes.add(v)

        # forbidden arc patterns
        for u, v in itertools.pairwise(vs):
            ban = _ARC_BAN_IDS.get((_arc_kind(inst, u), _arc_kind(inst, v)))
            if ban:
                out.append(Violation(ban, f"arc {u}->{v} not allowed", route=ri, node=v))

        # request pairing and precedence
        for pos, v in enumerate(vs):
            rid = lay.request_of(v)
            if not rid:
                continue
            if v in lay.pickups:
                pickup_route[rid] = (ri, pos)
            else:
                drop_route[rid] = (ri, pos)

        # loads, segment typing, alternation
        visits = r.visits_array()
        buf = np.empty(len(visits))
        code, pos = kernels.route_loads(visits, inst.q, inst.cls,
                                        inst.fleet.gamma_p, inst.fleet.gamma_f, buf)
        if code != kernels.LOAD_OK:
            node = int(visits[pos])
            if code in (kernels.LOAD_NEGATIVE, kernels.LOAD_STRANDED):
                out.append(Violation("28", f"load conservation broken at node {node}", route=ri, node=node))
            elif code == kernels.LOAD_OVER_P:
                out.append(Violation("26", f"passenger capacity exceeded at node {node}", route=ri, node=node))
            elif code == kernels.LOAD_OVER_F:
                out.append(Violation("27", f"freight capacity exceeded at node {node}", route=ri, node=node))
            elif code == kernels.LOAD_MIXED_SEGMENT:
                cid = "10" if inst.cls[node] in (CLS_PICKUP_P, CLS_DROP_P) else "11"
                out.append(Violation(cid, f"request type does not match module type at node {node}",
                                     route=ri, node=node))
            elif code == kernels.LOAD_NO_ALTERNATION:
                segs = route_segments(inst, r)
                kinds = [k for k, _ in segs]
                cid = "17" if PASSENGER in kinds else "18"
                for si in range(1, len(kinds)):
                    if kinds[si] == kinds[si - 1] and kinds[si] is not None:
                        cid = "17" if kinds[si] == PASSENGER else "18"
                        break
                out.append(Violation(cid, f"module type does not alternate at node {node}",
                                     route=ri, node=node))
            elif code == kernels.LOAD_EMPTY_SEGMENT:
                out.append(Violation("structure", f"empty segment at node {node}", route=ri, node=node))
            else:
                out.append(Violation("structure", f"malformed visit at node {node}", route=ri, node=node))
        else:
            for kind, _nodes in route_segments(inst, r):
                if kind == PASSENGER:
                    n_seg_p += 1
                elif kind == FREIGHT:
                    n_seg_f += 1

        # time windows
        viol, _P, _E, _Lm = kernels.route_schedule_terms(visits, inst.t, inst.a, inst.b)
        if viol >= 0:
            node = int(visits[viol])
            out.append(Violation("24", f"deadline missed at node {node}", route=ri, node=node))

        # range
        dist = route_distance_m(inst, r)
        if dist > inst.fleet.eta * 1000.0 + 1e-6:
            out.append(Violation("25", f"route distance {dist:.1f} m exceeds range", route=ri))

    for rid in range(1, lay.h_r + 1):
        has_p = rid in pickup_route
        has_d = rid in drop_route
        in_unserved = rid in sol.unserved
        if has_p != has_d:
            out.append(Violation("12", f"request {rid} has only one node on a route"))
        elif has_p and has_d:
            if pickup_route[rid][0] != drop_route[rid][0]:
                out.append(Violation("12", f"request {rid} split across platforms"))
            elif pickup_route[rid][1] > drop_route[rid][1]:
                out.append(Violation("22", f"request {rid} dropped off before pickup"))
            if in_unserved:
                out.append(Violation("structure", f"request {rid} both served and unserved"))
        elif not in_unserved:
            out.append(Violation("structure", f"request {rid} neither served nor unserved"))

    if n_seg_p > inst.fleet.mu_p:
        out.append(Violation("mu_p", f"{n_seg_p} passenger modules exceed mu_p={inst.fleet.mu_p}"))
    if n_seg_f > inst.fleet.mu_f:
        out.append(Violation("mu_f", f"{n_seg_f} freight modules exceed mu_f={inst.fleet.mu_f}"))
    return out


def is_feasible(inst: Instance, sol: Solution) -> bool:
    return not check_feasibility(inst, sol)


# ---------------------------------------------------------------------------
# JSON serialization


def solution_to_dict(inst: Instance, sol: Solution) -> dict:
    return {
        "routes": [
            {
                "platform": r.platform_id,
                "visits": list(map(int, r.visits)),
                "segments": [
                    {"module_type": kind or "", "visits": list(map(int, nodes))}
                    for kind, nodes in route_segments(inst, r)
                ],
            }
            for r in sol.routes
        ],
        "unserved": sorted(int(u) for u in sol.unserved),
    }


def solution_from_dict(inst: Instance, doc: dict) -> Solution:
    sol = Solution()
    n = inst.n_nodes
    for rd in doc.get("routes", []):
        visits = [int(v) for v in rd["visits"]]
        for v in visits:
            if not 1 <= v <= n:
                raise ValueError(f"unknown node id {v}")
        sol.routes.append(Route(platform_id=int(rd["platform"]), visits=visits,
                                uid=sol.new_uid()))
    sol.unserved = {int(u) for u in doc.get("unserved", [])}
    for u in sol.unserved:
        if not 1 <= u <= inst.n_requests:
            raise ValueError(f"unknown request id {u}")
    return sol


def save_solution(inst: Instance, sol: Solution, path) -> None:
    with open(path, "w") as fh:
        json.dump(solution_to_dict(inst, sol), fh, indent=1)
        fh.write("\n")


def load_solution(inst: Instance, path) -> Solution:
    with open(path) as fh:
        return solution_from_dict(inst, json.load(fh))
