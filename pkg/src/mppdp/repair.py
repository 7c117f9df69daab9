"""Repair heuristics: first-fit, inter-route and best insertion, plus the
service-depot insertion principles and redundancy pruning.

All three operators only ever construct feasible routes, so a repaired
solution always passes the checker.  Requests are inserted as pickup/dropoff
pairs within one segment; ``best_insert`` additionally couples a request
with a single service-depot insertion, which is what introduces module
changes into the search.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .instance import Instance, PASSENGER, FREIGHT
from .kernels import CLS_SD, CLS_PICKUP_P, CLS_PICKUP_F, CLS_DROP_P, CLS_DROP_F
from .solution import (
    Route, Solution, route_cost, route_distance_m, route_segments,
)

_TYPE_CODE = {PASSENGER: 0, FREIGHT: 1, None: -1}


@dataclass(frozen=True)
class InsertionCandidate:
    """One feasible placement of a request, priced by objective delta (EUR).

    ``route_index`` is None for a fresh route from an unused depot duplicate.
    Gap indices refer to the route *after* an accompanying service-depot
    insertion, when one is present.
    """
    delta: float
    route_index: int | None
    pickup_gap: int
    dropoff_gap: int
    service_depot: tuple[int, int] | None = None   # (gap, sd node)
    origin_node: int | None = None                 # new routes only
    platform_id: int | None = None


def route_gap_arrays(inst: Instance, route: Route):
    """Segment id and admissible request type per insertion gap.

    Gap types: -2 blocked, -1 untyped (free), 0 passenger, 1 freight.  When
    the route carries exactly one empty segment (a transient state while a
    service-depot insertion is being evaluated) every other gap is blocked
    and the empty segment demands the module type the alternation rule
    forces there.
    """
    vs = route.visits
    L = len(vs)
    segs = route_segments(inst, route)
    kinds = [_TYPE_CODE[k] for k, _ in segs]
    empties = [i for i, k in enumerate(kinds) if k == -1]

    if not empties:
        allowed = kinds
    elif len(kinds) == 1:
        allowed = [-1]                      # bare depot pair: both types fit
    elif len(empties) == 1:
        ei = empties[0]
        nb = kinds[ei - 1] if ei > 0 else kinds[ei + 1]
        req_type = 1 - nb if nb in (0, 1) else -1
        allowed = [-2] * len(kinds)
        allowed[ei] = req_type
    else:
        allowed = [-2] * len(kinds)

    gap_seg = np.zeros(L, dtype=np.int64)
    gap_type = np.full(L, -2, dtype=np.int8)
    cnt = 0
    for g in range(1, L):
        if g >= 2 and inst.cls[vs[g - 1]] == CLS_SD:
            cnt += 1
        gap_seg[g] = cnt
        gap_type[g] = allowed[cnt]
    return gap_seg, gap_type


def scan_route_insertion(inst: Instance, route: Route, rid: int,
                         first_fit: bool = False):
    """Cheapest (or first) feasible placement of request ``rid`` in a route.

    Returns ``(gp, gd, delta)`` with gp == -1 if none exists.
    """
    lay = inst.layout
    p = lay.pickup_node(rid)
    d = lay.dropoff_node(rid)
    rtype = inst.request_type(rid)
    gamma = inst.fleet.gamma_p if rtype == 0 else inst.fleet.gamma_f
    gap_seg, gap_type = route_gap_arrays(inst, route)
    gp, gd, delta, _dd, _ddur = kernels.scan_pair_insertion(
        route.visits_array(), gap_seg, gap_type,
        p, d, rtype, float(inst.q[p]),
        inst.t, inst.a, inst.b, inst.q, inst.cls, inst.w,
        gamma, inst.fleet.eta * 1000.0,
        inst.cost.alpha_td / 1000.0, inst.cost.alpha_tt / 3600.0,
        first_fit,
    )
    return int(gp), int(gd), float(delta)


def insert_pair(route: Route, gp: int, gd: int, p: int, d: int) -> None:
    """Apply a kernel-reported placement in place."""
    route.visits.insert(gp, p)
    route.visits.insert(gd + 1, d)


def feasible_service_depot_positions(route: Route, inst: Instance,
                                     used_nodes: set[int] | None = None
                                     ) -> list[tuple[int, int]]:
    """Gap/node pairs where a service-depot visit can be added.

    A service depot fits (1) directly after the origin depot, (2) directly
    before the destination depot, or (3) between a dropoff and a pickup of
    different request types.  Candidates are filtered by schedule and range
    feasibility and by duplicate-node availability (at most ``vartheta``
    visits per physical site overall, one visit per duplicate node).
    """
    vs = route.visits
    L = len(vs)
    used = set(used_nodes or ()) | set(vs)
    gaps = []
    for g in range(1, L):
        if g == 1 or g == L - 1:
            gaps.append(g)
            continue
        cu, cv = inst.cls[vs[g - 1]], inst.cls[vs[g]]
        drop_p, drop_f = cu == CLS_DROP_P, cu == CLS_DROP_F
        pick_p, pick_f = cv == CLS_PICKUP_P, cv == CLS_PICKUP_F
        if (drop_p and pick_f) or (drop_f and pick_p):
            gaps.append(g)

    eta_m = inst.fleet.eta * 1000.0
    out = []
    for g in gaps:
        for dups in inst.sd_sites:
            node = next((n for n in dups if n not in used), None)
            if node is None:
                continue
            trial = np.asarray(vs[:g] + [node] + vs[g:], dtype=np.int64)
            viol, _P, _E, _Lm = kernels.route_schedule_terms(trial, inst.t, inst.a, inst.b)
            if viol >= 0:
                continue
            if kernels.route_distance(trial, inst.w) > eta_m + 1e-6:
                continue
            out.append((g, node))
    return out


def prune_redundant_service_depots(route: Route, inst: Instance) -> Route:
    """Drop service-depot visits at the route start, the route end, and one
    of every consecutive pair, repeatedly until none remain."""
    vs = list(route.visits)
    changed = True
    while changed:
        changed = False
        for i in range(1, len(vs) - 1):
            if inst.cls[vs[i]] != CLS_SD:
                continue
            if i == 1 or i == len(vs) - 2 or inst.cls[vs[i + 1]] == CLS_SD:
                del vs[i]
                changed = True
                break
    return Route(route.platform_id, vs, route.uid)


def _prune_solution(sol: Solution, inst: Instance) -> Solution:
    sol.routes = [prune_redundant_service_depots(r, inst) for r in sol.routes]
    return sol


def _shuffled_unserved(sol: Solution, rng) -> list[int]:
    order = sorted(sol.unserved)
    return [order[i] for i in rng.permutation(len(order))]


def _new_route_options(sol: Solution, inst: Instance):
    """(depot site, origin node, platform id) choices for opening a route."""
    if len(sol.routes) >= inst.fleet.kappa:
        return []
    used_nodes = sol.used_nodes()
    used_platforms = {r.platform_id for r in sol.routes}
    platform = next(k for k in range(1, inst.fleet.kappa + 1)
                    if k not in used_platforms)
    out = []
    for site, group in enumerate(inst.depot_groups):
        origin = next((n for n in group if n not in used_nodes), None)
        if origin is not None:
            out.append((site, origin, platform))
    return out


def _try_new_route(inst: Instance, origin: int, rid: int):
    """Feasible single-request route from ``origin``, or None."""
    lay = inst.layout
    p = lay.pickup_node(rid)
    d = lay.dropoff_node(rid)
    vs = np.asarray([origin, p, d, lay.dest_of(origin)], dtype=np.int64)
    viol, _P, _E, _Lm = kernels.route_schedule_terms(vs, inst.t, inst.a, inst.b)
    if viol >= 0:
        return None
    if kernels.route_distance(vs, inst.w) > inst.fleet.eta * 1000.0 + 1e-6:
        return None
    gamma = inst.fleet.gamma_p if inst.request_type(rid) == 0 else inst.fleet.gamma_f
    if inst.q[p] > gamma + 1e-9:
        return None
    return [origin, p, d, int(lay.dest_of(origin))]


def first_fit_insert(partial: Solution, inst: Instance, rng) -> Solution:
    """Insert every unserved request at the first feasible position over
    shuffled routes; open new routes from unused depot duplicates while the
    platform budget allows."""
    sol = partial.copy()
    scan_order = list(rng.permutation(len(sol.routes)))
    for rid in _shuffled_unserved(sol, rng):
        placed = False
        for ri in scan_order:
            gp, gd, _delta = scan_route_insertion(inst, sol.routes[ri], rid,
                                                  first_fit=True)
            if gp >= 0:
                lay = inst.layout
                insert_pair(sol.routes[ri], gp, gd,
                            lay.pickup_node(rid), lay.dropoff_node(rid))
                placed = True
                break
        if not placed:
            options = _new_route_options(sol, inst)
            option_order = [options[i] for i in rng.permutation(len(options))]
            for _site, origin, platform in option_order:
                vs = _try_new_route(inst, origin, rid)
                if vs is not None:
                    sol.routes.append(Route(platform, vs, sol.new_uid()))
                    scan_order.append(len(sol.routes) - 1)
                    placed = True
                    break
        if placed:
            sol.unserved.discard(rid)
    return _prune_solution(sol, inst)


def inter_route_insert(partial: Solution, inst: Instance,
                       memory: dict[int, int] | None, rng) -> Solution:
    """Insert each request at its cheapest feasible position within the route
    it was last removed from (a random route when it has none)."""
    sol = partial.copy()
    memory = memory or {}
    for rid in _shuffled_unserved(sol, rng):
        if not sol.routes:
            continue
        by_uid = {r.uid: i for i, r in enumerate(sol.routes)}
        ri = by_uid.get(memory.get(rid))
        if ri is None:
            ri = int(rng.integers(len(sol.routes)))
        gp, gd, _delta = scan_route_insertion(inst, sol.routes[ri], rid)
        if gp >= 0:
            lay = inst.layout
            insert_pair(sol.routes[ri], gp, gd,
                        lay.pickup_node(rid), lay.dropoff_node(rid))
            sol.unserved.discard(rid)
    return _prune_solution(sol, inst)


def best_insert(partial: Solution, inst: Instance, rng) -> Solution:
    """Insert each request at the global minimum-delta feasible position over
    all routes, new routes, and positions enabled by one accompanying
    service-depot insertion."""
    sol = partial.copy()
    lay = inst.layout
    # with metric distances a request insertion never reduces travel cost,
    # so coupled candidates whose fixed part already loses can be skipped
    metric = inst.is_metric()
    for rid in _shuffled_unserved(sol, rng):
        p = lay.pickup_node(rid)
        d = lay.dropoff_node(rid)
        used_sd = {v for r in sol.routes for v in r.visits
                   if inst.cls[v] == CLS_SD}
        best: InsertionCandidate | None = None

        for ri, route in enumerate(sol.routes):
            gp, gd, delta = scan_route_insertion(inst, route, rid)
            if gp >= 0 and (best is None or delta < best.delta):
                best = InsertionCandidate(delta, ri, gp, gd)
            # coupled request + service-depot insertion
            if inst.sd_sites:
                base_cost = route_cost(inst, route)
                for g, node in feasible_service_depot_positions(route, inst, used_sd):
                    trial = Route(route.platform_id,
                                  route.visits[:g] + [node] + route.visits[g:],
                                  route.uid)
                    extra = route_cost(inst, trial) - base_cost
                    if metric and best is not None and extra >= best.delta:
                        continue
                    gp2, gd2, d2 = scan_route_insertion(inst, trial, rid)
                    if gp2 < 0:
                        continue
                    delta2 = extra + d2
                    if best is None or delta2 < best.delta:
                        best = InsertionCandidate(delta2, ri, gp2, gd2,
                                                  service_depot=(g, node))

        for _site, origin, platform in _new_route_options(sol, inst):
            vs = _try_new_route(inst, origin, rid)
            if vs is None:
                continue
            delta = route_cost(inst, Route(platform, vs, 0))
            if best is None or delta < best.delta:
                best = InsertionCandidate(delta, None, 2, 3,
                                          origin_node=origin, platform_id=platform)

        if best is None:
            continue
        if best.route_index is None:
            vs = _try_new_route(inst, best.origin_node, rid)
            sol.routes.append(Route(best.platform_id, vs, sol.new_uid()))
        else:
            route = sol.routes[best.route_index]
            if best.service_depot is not None:
                g, node = best.service_depot
                route.visits.insert(g, node)
            insert_pair(route, best.pickup_gap, best.dropoff_gap, p, d)
        sol.unserved.discard(rid)
    return _prune_solution(sol, inst)


REPAIR_OPERATORS = ("first_fit", "inter_route", "best")


def apply_repair(name: str, partial: Solution, inst: Instance,
                 memory: dict[int, int] | None, rng) -> Solution:
    if name == "first_fit":
        return first_fit_insert(partial, inst, rng)
    if name == "inter_route":
        return inter_route_insert(partial, inst, memory, rng)
    if name == "best":
        return best_insert(partial, inst, rng)
    raise ValueError(f"unknown repair operator {name!r}")
