"""Destroy heuristics: random, module, platform, service-depot, Shaw and
worst removal.

Removal always takes a request's pickup and dropoff together.  Service-depot
visits are kept in place unless dropping the requests left them dangling
(an empty or same-type-adjacent segment), in which case the cleanup removes
them so every destroy output stays feasible.  Each operator returns the
partial solution together with a removal memory mapping request ids to the
uid of the route they were removed from, which inter-route insertion uses.
"""

from __future__ import annotations

from dataclasses import dataclass

from .instance import Instance
from .kernels import CLS_SD
from .solution import Route, Solution, route_cost, route_segments
from . import kernels


@dataclass(frozen=True)
class RemovalParams:
    """Removal-count bounds, relatedness weights and determinism exponents."""
    iota: int = 1          # min removals
    xi: float = 0.32       # max removal fraction of the request count
    phi: float = 9.0       # relatedness weight, distance
    chi: float = 3.0       # relatedness weight, arrival time
    psi: float = 2.0       # relatedness weight, load
    rho: float = 6.0       # rank-selection exponent, Shaw removal
    rho_worst: float = 3.0  # rank-selection exponent, worst removal

    def __post_init__(self):
        if self.iota < 1:
            raise ValueError("iota must be >= 1")
        if not 0 < self.xi <= 1:
            raise ValueError("xi must be in (0, 1]")
        if self.rho < 1 or self.rho_worst < 1:
            raise ValueError("determinism exponents must be >= 1")


def removal_count(n_served: int, n_r: int, params: RemovalParams, rng) -> int:
    """Uniform draw from {iota, ..., max(iota, floor(min(n_served, n_r*xi)))}."""
    if n_served <= 0:
        return 0
    hi = max(params.iota, int(min(n_served, n_r * params.xi)))
    return int(rng.integers(params.iota, hi + 1))


def cleanup_route(route: Route, inst: Instance) -> Route | None:
    """Remove service-depot visits left dangling after request removal.

    Drops visits matching the redundancy patterns (route start, route end,
    consecutive pair) and visits separating two same-type segments, until
    stable.  Returns None when no request is left (the route dissolves).
    """
    vs = list(route.visits)
    lay = inst.layout
    while True:
        if not any(lay.request_of(v) for v in vs[1:-1]):
            return None
        changed = False
        for i in range(1, len(vs) - 1):
            if inst.cls[vs[i]] != CLS_SD:
                continue
            if i == 1 or i == len(vs) - 2 or inst.cls[vs[i + 1]] == CLS_SD:
                del vs[i]
                changed = True
                break
        if changed:
            continue
        tmp = Route(route.platform_id, vs, route.uid)
        segs = route_segments(inst, tmp)
        sd_positions = [i for i, v in enumerate(vs) if inst.cls[v] == CLS_SD]
        for j, i in enumerate(sd_positions):
            k1 = segs[j][0]
            k2 = segs[j + 1][0]
            if k1 is not None and k1 == k2:
                del vs[i]
                changed = True
                break
        if not changed:
            break
    return Route(route.platform_id, vs, route.uid)


def remove_requests(sol: Solution, inst: Instance, rids) -> dict[int, int]:
    """Strip the given requests from their routes in place; returns the
    removal memory (request id -> route uid)."""
    lay = inst.layout
    rids = set(rids)
    nodes = set()
    for rid in rids:
        nodes.add(lay.pickup_node(rid))
        nodes.add(lay.dropoff_node(rid))
    memory: dict[int, int] = {}
    new_routes = []
    for r in sol.routes:
        hit = [lay.request_of(v) for v in r.visits if v in nodes]
        if not hit:
            new_routes.append(r)
            continue
        for rid in set(hit):
            if rid in rids:
                memory[rid] = r.uid
        r2 = Route(r.platform_id, [v for v in r.visits if v not in nodes], r.uid)
        r2 = cleanup_route(r2, inst)
        if r2 is not None:
            new_routes.append(r2)
    sol.routes = new_routes
    sol.unserved |= rids
    return memory


def random_removal(sol: Solution, inst: Instance, k: int, rng):
    """Remove k uniformly chosen served requests."""
    out = sol.copy()
    served = out.served_requests(inst)
    k = min(k, len(served))
    if k <= 0:
        return out, {}
    idx = rng.choice(len(served), size=k, replace=False)
    memory = remove_requests(out, inst, [served[i] for i in sorted(idx)])
    return out, memory


def module_removal(sol: Solution, inst: Instance, k: int, rng):
    """Remove all requests of k uniformly chosen modules (route segments),
    together with the service-depot visits that bounded them."""
    out = sol.copy()
    lay = inst.layout
    segs = []
    for ri, r in enumerate(out.routes):
        for kind, nodes in route_segments(inst, r):
            rids = sorted({lay.request_of(v) for v in nodes if lay.request_of(v)})
            segs.append(rids)
    k = min(k, len(segs))
    if k <= 0:
        return out, {}
    idx = rng.choice(len(segs), size=k, replace=False)
    chosen: set[int] = set()
    for i in sorted(idx):
        chosen.update(segs[i])
    memory = remove_requests(out, inst, chosen)
    return out, memory


def platform_removal(sol: Solution, inst: Instance, rng):
    """Dissolve one uniformly chosen route entirely."""
    out = sol.copy()
    if not out.routes:
        return out, {}
    ri = int(rng.integers(len(out.routes)))
    lay = inst.layout
    rids = {lay.request_of(v) for v in out.routes[ri].visits if lay.request_of(v)}
    memory = remove_requests(out, inst, rids)
    return out, memory


def _removable_sd_positions(sol: Solution, inst: Instance):
    """Service-depot visits whose removal keeps the route feasible: start of
    route, end of route, or one of a consecutive pair."""
    cand = []
    eta_m = inst.fleet.eta * 1000.0
    for ri, r in enumerate(sol.routes):
        vs = r.visits
        for i in range(1, len(vs) - 1):
            if inst.cls[vs[i]] != CLS_SD:
                continue
            if not (i == 1 or i == len(vs) - 2
                    or inst.cls[vs[i + 1]] == CLS_SD or inst.cls[vs[i - 1]] == CLS_SD):
                continue
            trial = Route(r.platform_id, vs[:i] + vs[i + 1:], r.uid)
            varr = trial.visits_array()
            viol, _p, _e, _lm = kernels.route_schedule_terms(varr, inst.t, inst.a, inst.b)
            if viol >= 0:
                continue
            buf = varr.astype(float)
            code, _pos = kernels.route_loads(varr, inst.q, inst.cls,
                                             inst.fleet.gamma_p, inst.fleet.gamma_f, buf)
            if code != kernels.LOAD_OK:
                continue
            if kernels.route_distance(varr, inst.w) > eta_m + 1e-6:
                continue
            cand.append((ri, i))
    return cand


def service_depot_removal(sol: Solution, inst: Instance, k: int, rng):
    """Remove up to k redundant service-depot visits (feasibility-guarded)."""
    out = sol.copy()
    for _ in range(max(0, k)):
        cand = _removable_sd_positions(out, inst)
        if not cand:
            break
        ri, i = cand[int(rng.integers(len(cand)))]
        del out.routes[ri].visits[i]
    return out, {}


def _arrival_map(sol: Solution, inst: Instance) -> dict[int, float]:
    from .solution import compute_schedule
    arr: dict[int, float] = {}
    for r in sol.routes:
        sched = compute_schedule(inst, r)
        for node, s in zip(sched.nodes, sched.arrival):
            arr[node] = float(s)
    return arr


def relatedness(inst: Instance, sol: Solution, i: int, j: int,
                params: RemovalParams | None = None,
                arrivals: dict[int, float] | None = None) -> float:
    """Shaw similarity of two served requests: weighted distance, arrival-time
    and load terms."""
    params = params or RemovalParams()
    lay = inst.layout
    if arrivals is None:
        arrivals = _arrival_map(sol, inst)
    ai, bi = lay.pickup_node(i), lay.dropoff_node(i)
    aj, bj = lay.pickup_node(j), lay.dropoff_node(j)
    for node in (ai, bi, aj, bj):
        if node not in arrivals:
            raise ValueError(f"request node {node} is not served (no arrival time)")
    return (params.phi * (inst.w[ai, aj] + inst.w[bi, bj])
            + params.chi * (abs(arrivals[ai] - arrivals[aj])
                            + abs(arrivals[bi] - arrivals[bj]))
            + params.psi * abs(inst.q[ai] - inst.q[aj]))


def shaw_removal(sol: Solution, inst: Instance, k: int,
                 params: RemovalParams, rng):
    """Remove related requests: a random seed, then repeatedly the request at
    power-law rank ``floor(u^rho * n)`` in relatedness order to a random
    already-removed request."""
    out = sol.copy()
    served = out.served_requests(inst)
    k = min(k, len(served))
    if k <= 0:
        return out, {}
    arrivals = _arrival_map(out, inst)
    seed = served[int(rng.integers(len(served)))]
    removed = [seed]
    remaining = [r for r in served if r != seed]
    while len(removed) < k and remaining:
        ref = removed[int(rng.integers(len(removed)))]
        remaining.sort(key=lambda rj: (relatedness(inst, out, ref, rj, params, arrivals), rj))
        idx = int((rng.random() ** params.rho) * len(remaining))
        removed.append(remaining.pop(idx))
    memory = remove_requests(out, inst, removed)
    return out, memory


def _removal_delta(inst: Instance, route: Route, rid: int) -> float:
    """Route-cost saving from removing one request (the unserved penalty is
    common to every request, so it is left out of the ranking)."""
    lay = inst.layout
    nodes = {lay.pickup_node(rid), lay.dropoff_node(rid)}
    after = cleanup_route(
        Route(route.platform_id, [v for v in route.visits if v not in nodes],
              route.uid), inst)
    before_cost = route_cost(inst, route)
    return before_cost - (route_cost(inst, after) if after is not None else 0.0)


def worst_removal(sol: Solution, inst: Instance, k: int,
                  params: RemovalParams, rng):
    """Remove high-cost requests: rank by route-cost saving, recomputed after
    every removal, and pick rank ``floor(u^rho_worst * n)`` each time."""
    out = sol.copy()
    lay = inst.layout
    memory: dict[int, int] = {}
    for _ in range(max(0, k)):
        entries = []
        for r in out.routes:
            for v in r.visits:
                rid = lay.request_of(v)
                if rid and v in lay.pickups:
                    entries.append((-_removal_delta(inst, r, rid), rid))
        if not entries:
            break
        entries.sort()
        idx = int((rng.random() ** params.rho_worst) * len(entries))
        rid = entries[idx][1]
        memory.update(remove_requests(out, inst, [rid]))
    return out, memory


DESTROY_OPERATORS = ("random", "module", "platform", "service_depot", "shaw", "worst")


def apply_destroy(name: str, sol: Solution, inst: Instance, n_r: int,
                  params: RemovalParams, rng):
    """Dispatch one destroy operator, drawing its removal count."""
    if name == "random":
        k = removal_count(len(sol.served_requests(inst)), n_r, params, rng)
        return random_removal(sol, inst, k, rng)
    if name == "module":
        n_modules = sum(1 + sum(1 for v in r.visits if inst.cls[v] == CLS_SD)
                        for r in sol.routes)
        k = removal_count(n_modules, n_r, params, rng)
        return module_removal(sol, inst, k, rng)
    if name == "platform":
        return platform_removal(sol, inst, rng)
    if name == "service_depot":
        n_sd = sum(sum(1 for v in r.visits if inst.cls[v] == CLS_SD)
                   for r in sol.routes)
        k = removal_count(n_sd, n_r, params, rng)
        return service_depot_removal(sol, inst, k, rng)
    if name == "shaw":
        k = removal_count(len(sol.served_requests(inst)), n_r, params, rng)
        return shaw_removal(sol, inst, k, params, rng)
    if name == "worst":
        k = removal_count(len(sol.served_requests(inst)), n_r, params, rng)
        return worst_removal(sol, inst, k, params, rng)
    raise ValueError(f"unknown destroy operator {name!r}")
