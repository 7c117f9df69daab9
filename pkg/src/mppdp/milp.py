"""Exact-model tooling: emit the full mixed-integer program in LP text
format, parse solver output back into a solution, verify a solution against
the model rows directly, and solve tiny instances exactly by enumeration.

Constraint rows are named ``c<eq>_<indices>`` after the equation numbers of
the formulation (8-44).  Two conventions to note:

* the module-usage link (30) is emitted summed over successor nodes; the
  per-successor quantifier as printed pins every successor count to the same
  value and admits no solution,
* the load propagation (28) is emitted together with its reverse-direction
  companion (rows ``c28b``), which pins the load variables to the actual
  running loads.  Without the companion, a formulation-feasible assignment
  could leave a picked-up item behind at a module swap; the checker (and
  physics) reject that, and the equivalence between the checker and this
  model is part of the contract.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import kernels
from .instance import Instance, big_m, PASSENGER
from .kernels import CLS_SD
from .solution import (
    Route, Solution, compute_schedule, empty_solution, evaluate,
    check_feasibility, route_segments,
)

DEFAULT_NODE_CAP = 60


@dataclass
class MilpModel:
    """Objective, rows and variable registry of the exact model."""
    minimize: dict[str, float]            # var -> objective coefficient
    constant: float                       # objective constant term
    rows: list[tuple[str, list[tuple[float, str]], str, float]]
    binaries: list[str]
    continuous: list[str]

    def variable_count(self) -> int:
        return len(self.binaries) + len(self.continuous)


def _x(i, j, k):
    return f"x_{i}_{j}_{k}"


def _y(i, j, m):
    return f"y_{i}_{j}_{m}"


def _e(k, u):
    return f"e_{k}_{u}"


def _s(i, k):
    return f"s_{i}_{k}"


def _c(i):
    return f"c_{i}"


def build_milp(inst: Instance, max_nodes: int = DEFAULT_NODE_CAP) -> MilpModel:
    """Assemble the exact model for an instance (guarded by ``max_nodes``)."""
    lay = inst.layout
    n = lay.n_nodes
    if n > max_nodes:
        raise ValueError(f"instance has {n} nodes, over the export cap {max_nodes}")
    kappa = inst.fleet.kappa
    mu_p = inst.fleet.mu_p
    mu_f = inst.fleet.mu_f
    K = range(1, kappa + 1)
    M_p = range(1, mu_p + 1)
    M_f = range(mu_p + 1, mu_p + mu_f + 1)
    M = range(1, mu_p + mu_f + 1)
    N = range(1, n + 1)
    Npd = lay.origin_depots
    Nnd = lay.dest_depots
    Npr = lay.pickups
    Nnr = lay.dropoffs
    Nsd = lay.service_depots
    Nr = list(Npr) + list(Nnr)
    Nrp = [i for i in Nr if inst.cls[i] in (kernels.CLS_PICKUP_P, kernels.CLS_DROP_P)]
    Nrf = [i for i in Nr if inst.cls[i] in (kernels.CLS_PICKUP_F, kernels.CLS_DROP_F)]
    zeta = big_m(inst)
    t = inst.t
    w = inst.w
    a = inst.a
    b = inst.b
    q = inst.q
    c = inst.cost

    obj: dict[str, float] = {}

    def add_obj(var, coef):
        if coef != 0.0:
            obj[var] = obj.get(var, 0.0) + coef

    # platforms: arcs from origin depots into request nodes
    for i in Npd:
        for j in Nr:
            for k in K:
                add_obj(_x(i, j, k), c.alpha_ps)
    # modules: usage-count variables weighted by the count index
    for k in K:
        for u in N:
            add_obj(_e(k, u), c.alpha_ms * u)
    # distance (w meters, priced per km)
    for i in N:
        for j in N:
            wij = w[i, j]
            if wij != 0.0:
                for k in K:
                    add_obj(_x(i, j, k), c.alpha_td * wij / 1000.0)
    # trip durations: destination arrival minus origin departure, per hour
    for i in Npd:
        for k in K:
            add_obj(_s(lay.dest_of(i), k), c.alpha_tt / 3600.0)
            add_obj(_s(i, k), -c.alpha_tt / 3600.0)
    # module changes: arcs into service depots
    for i in N:
        for j in Nsd:
            for k in K:
                add_obj(_x(i, j, k), c.alpha_mc)
    # unserved requests: constant minus served pickups
    constant = c.alpha_ud * lay.h_r
    for i in Npr:
        for j in N:
            for k in K:
                add_obj(_x(i, j, k), -c.alpha_ud)

    rows: list[tuple[str, list[tuple[float, str]], str, float]] = []

    def row(name, items, sense, rhs):
        # combine repeated variables (flow rows touch self-loop arcs twice)
        acc: dict[str, float] = {}
        for coef, var in items:
            acc[var] = acc.get(var, 0.0) + coef
        combined = [(coef, var) for var, coef in acc.items() if coef != 0.0]
        if not combined:
            combined = [(0.0, items[0][1])]
        rows.append((name, combined, sense, rhs))

    # (8) each node departed at most once
    for i in N:
        row(f"c8_{i}", [(1.0, _x(i, j, k)) for j in N for k in K], "<=", 1.0)
    # (9) platform and module assignments coincide on every arc
    for i in N:
        for j in N:
            items = [(1.0, _x(i, j, k)) for k in K]
            items += [(-1.0, _y(i, j, m)) for m in M]
            row(f"c9_{i}_{j}", items, "=", 0.0)
    # (10)/(11) request type matches module type
    for i in Nrp:
        for j in N:
            items = [(1.0, _x(i, j, k)) for k in K]
            items += [(-1.0, _y(i, j, m)) for m in M_p]
            row(f"c10_{i}_{j}", items, "=", 0.0)
    for i in Nrf:
        for j in N:
            items = [(1.0, _x(i, j, k)) for k in K]
            items += [(-1.0, _y(i, j, m)) for m in M_f]
            row(f"c11_{i}_{j}", items, "=", 0.0)
    # (12)/(13) pickup and dropoff on the same platform / module
    for i in Npr:
        dp = i + lay.h_r
        for k in K:
            items = [(1.0, _x(i, j, k)) for j in N]
            items += [(-1.0, _x(dp, j, k)) for j in N]
            row(f"c12_{i}_{k}", items, "=", 0.0)
        for m in M:
            items = [(1.0, _y(i, j, m)) for j in N]
            items += [(-1.0, _y(dp, j, m)) for j in N]
            row(f"c13_{i}_{m}", items, "=", 0.0)
    # (14)/(15) flow conservation at request nodes
    for i in Nr:
        for k in K:
            items = [(1.0, _x(j, i, k)) for j in N]
            items += [(-1.0, _x(i, j, k)) for j in N]
            row(f"c14_{i}_{k}", items, "=", 0.0)
        for m in M:
            items = [(1.0, _y(j, i, m)) for j in N]
            items += [(-1.0, _y(i, j, m)) for j in N]
            row(f"c15_{i}_{m}", items, "=", 0.0)
    # (16) platform flow conservation at service depots
    for i in Nsd:
        for k in K:
            items = [(1.0, _x(j, i, k)) for j in N]
            items += [(-1.0, _x(i, j, k)) for j in N]
            row(f"c16_{i}_{k}", items, "=", 0.0)
    # (17)/(18) module type flips at service depots
    for i in Nsd:
        items = [(1.0, _y(j, i, m)) for j in N for m in M_p]
        items += [(-1.0, _y(i, j, m)) for j in N for m in M_f]
        row(f"c17_{i}", items, "=", 0.0)
        items = [(1.0, _y(j, i, m)) for j in N for m in M_f]
        items += [(-1.0, _y(i, j, m)) for j in N for m in M_p]
        row(f"c18_{i}", items, "=", 0.0)
    # (19) at most one departure per origin-depot node
    for i in Npd:
        row(f"c19_{i}", [(1.0, _x(i, j, k)) for j in N for k in K], "<=", 1.0)
    # (20) a departing platform arrives at the paired destination
    for i in Npd:
        de = lay.dest_of(i)
        for k in K:
            items = [(1.0, _x(i, j, k)) for j in N]
            items += [(-1.0, _x(j, de, k)) for j in N]
            row(f"c20_{i}_{k}", items, "=", 0.0)
    # (21) arrival-time propagation along used arcs
    for i in N:
        for j in N:
            tij = t[i, j]
            for k in K:
                items = [(1.0, _s(i, k)), (-1.0, _s(j, k)), (zeta, _x(i, j, k))]
                row(f"c21_{i}_{j}_{k}", items, "<=", zeta - tij)
    # (22) pickup served before its dropoff
    for i in Npr:
        dp = i + lay.h_r
        tij = t[i, dp]
        for k in K:
            items = [(1.0, _s(i, k)), (-1.0, _s(dp, k))]
            items += [(zeta, _x(i, j, k)) for j in N]
            row(f"c22_{i}_{k}", items, "<=", zeta - tij)
    # (23)/(24) window bounds on every arrival variable
    for i in N:
        for k in K:
            row(f"c23_{i}_{k}", [(1.0, _s(i, k))], ">=", float(a[i]))
            row(f"c24_{i}_{k}", [(1.0, _s(i, k))], "<=", float(b[i]))
    # (25) platform range (eta km against distances in meters)
    for k in K:
        items = [(w[i, j], _x(i, j, k)) for i in N for j in N if w[i, j] != 0.0]
        row(f"c25_{k}", items, "<=", inst.fleet.eta * 1000.0)
    # (26)/(27) module capacities
    for i in Nrp:
        row(f"c26_{i}", [(1.0, _c(i))], "<=", inst.fleet.gamma_p)
    for i in Nrf:
        row(f"c27_{i}", [(1.0, _c(i))], "<=", inst.fleet.gamma_f)
    # (28) load propagation along used module arcs, plus the reverse
    # direction (c28b) that pins loads to the running sums
    for i in N:
        for j in Nr:
            qj = q[j]
            for m in M:
                row(f"c28_{i}_{j}_{m}",
                    [(1.0, _c(j)), (-1.0, _c(i)), (-zeta, _y(i, j, m))],
                    ">=", qj - zeta)
                row(f"c28b_{i}_{j}_{m}",
                    [(1.0, _c(j)), (-1.0, _c(i)), (zeta, _y(i, j, m))],
                    "<=", qj + zeta)
    # (29) loads reset at origin depots and service depots
    for i in list(Npd) + list(Nsd):
        row(f"c29_{i}", [(1.0, _c(i))], "=", 0.0)
    # (30) modules used equal origin/service-depot departures (summed over
    # successors; the printed per-successor form admits no solution)
    for k in K:
        items = [(float(u), _e(k, u)) for u in N]
        items += [(-1.0, _x(i, j, k)) for i in list(Npd) + list(Nsd) for j in N]
        row(f"c30_{k}", items, "=", 0.0)
    # (31) one departure per platform per physical depot
    for gi, group in enumerate(inst.depot_groups):
        for k in K:
            items = [(1.0, _x(i, j, k)) for i in group for j in N]
            row(f"c31_{gi + 1}_{k}", items, "<=", 1.0)
    # (32)/(33) no self loops
    for i in N:
        for k in K:
            row(f"c32_{i}_{k}", [(1.0, _x(i, i, k))], "=", 0.0)
        for m in M:
            row(f"c33_{i}_{m}", [(1.0, _y(i, i, m))], "=", 0.0)
    # (34)/(35) no departures from destination depots
    for i in Nnd:
        row(f"c34_{i}", [(1.0, _x(i, j, k)) for j in N for k in K], "=", 0.0)
        row(f"c35_{i}", [(1.0, _y(i, j, m)) for j in N for m in M], "=", 0.0)
    # (36)/(37) no service depot or destination directly after a pickup
    after_pickup = list(Nsd) + list(Nnd)
    for i in Npr:
        for j in after_pickup:
            for k in K:
                row(f"c36_{i}_{j}_{k}", [(1.0, _x(i, j, k))], "=", 0.0)
            for m in M:
                row(f"c37_{i}_{j}_{m}", [(1.0, _y(i, j, m))], "=", 0.0)
    # (38)/(39) no dropoff directly after a service depot or origin depot
    before_drop = list(Nsd) + list(Npd)
    for i in before_drop:
        for j in Nnr:
            for k in K:
                row(f"c38_{i}_{j}_{k}", [(1.0, _x(i, j, k))], "=", 0.0)
            for m in M:
                row(f"c39_{i}_{j}_{m}", [(1.0, _y(i, j, m))], "=", 0.0)
    # (40)/(41) no service depot to service depot
    for i in Nsd:
        for j in Nsd:
            for k in K:
                row(f"c40_{i}_{j}_{k}", [(1.0, _x(i, j, k))], "=", 0.0)
            for m in M:
                row(f"c41_{i}_{j}_{m}", [(1.0, _y(i, j, m))], "=", 0.0)
    # (42) no service depot directly after an origin depot
    for i in Npd:
        for j in Nsd:
            for k in K:
                row(f"c42_{i}_{j}_{k}", [(1.0, _x(i, j, k))], "=", 0.0)
    # (43) no destination depot directly after a service depot
    for i in Nsd:
        for j in Nnd:
            for m in M:
                row(f"c43_{i}_{j}_{m}", [(1.0, _y(i, j, m))], "=", 0.0)
    # (44) unused destination arrivals pinned to the origin deadline so the
    # duration term vanishes for unused depot pairs
    for i in Nnd:
        borig = float(b[i - lay.h_d - 2 * lay.h_r])
        for k in K:
            items = [(1.0, _s(i, k))]
            items += [(zeta, _x(j, i, k)) for j in N]
            row(f"c44_{i}_{k}", items, ">=", borig)

    binaries = [_x(i, j, k) for i in N for j in N for k in K]
    binaries += [_y(i, j, m) for i in N for j in N for m in M]
    binaries += [_e(k, u) for k in K for u in N]
    continuous = [_s(i, k) for i in N for k in K] + [_c(i) for i in N]
    return MilpModel(minimize=obj, constant=constant, rows=rows,
                     binaries=binaries, continuous=continuous)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def export_lp(inst: Instance, max_nodes: int = DEFAULT_NODE_CAP) -> str:
    """Serialize the exact model in LP text format (CPLEX LP grammar)."""
    model = build_milp(inst, max_nodes=max_nodes)
    out = ["\\ MP-PDP exact model export", "Minimize"]
    terms = []
    for var in sorted(model.minimize):
        coef = model.minimize[var]
        if coef == 0.0:
            continue
        sign = "+" if coef >= 0 else "-"
        terms.append(f"{sign} {_fmt(abs(coef))} {var}")
    if model.constant:
        terms.append(f"+ {_fmt(model.constant)}")
    out.append(" obj: " + _join_terms(terms))
    out.append("Subject To")
    for name, items, sense, rhs in model.rows:
        terms = []
        for coef, var in items:
            if coef == 0.0:
                continue
            sign = "+" if coef >= 0 else "-"
            terms.append(f"{sign} {_fmt(abs(coef))} {var}")
        if not terms:
            terms = ["+ 0 " + items[0][1]] if items else ["+ 0 x_1_1_1"]
        op = {"<=": "<=", ">=": ">=", "=": "="}[sense]
        out.append(f" {name}: " + _join_terms(terms) + f" {op} {_fmt(rhs)}")
    out.append("Binary")
    line: list[str] = []
    for vname in model.binaries:
        line.append(vname)
        if len(line) == 8:
            out.append(" " + " ".join(line))
            line = []
    if line:
        out.append(" " + " ".join(line))
    out.append("End")
    return "\n".join(out) + "\n"


def _join_terms(terms: list[str]) -> str:
    text = " ".join(terms)
    if text.startswith("+ "):
        text = text[2:]
    return text


_VAR_VALUE = re.compile(r"^\s*([xyesc]_[0-9_]+)\s+(-?[0-9.eE+-]+)\s*$")


def import_solution(inst: Instance, lp_solution_text: str,
                    tol: float = 1e-5) -> Solution:
    """Rebuild a solution from solver output given as ``name value`` lines.

    Lines that do not look like a variable assignment (solver banners,
    objective reports, section headers) are ignored.  Arc variables must be
    integral within ``tol``; used arcs are followed from each departing
    origin depot to its paired destination.  Routes that serve no request
    (a bare depot pair) are dropped.
    """
    lay = inst.layout
    arcs: dict[int, dict[int, int]] = {}
    used = set()
    for line in lp_solution_text.splitlines():
        mm = _VAR_VALUE.match(line)
        if not mm:
            continue
        name, sval = mm.group(1), mm.group(2)
        if not name.startswith("x_"):
            continue
        val = float(sval)
        if abs(val) <= tol:
            continue
        if abs(val - 1.0) > tol:
            raise ValueError(f"fractional arc variable {name} = {val}")
        _, i, j, k = name.split("_")
        i, j, k = int(i), int(j), int(k)
        succ = arcs.setdefault(k, {})
        if i in succ:
            raise ValueError(f"platform {k} departs node {i} twice")
        succ[i] = j
        used.add((i, j, k))

    routes = []
    consumed = set()
    for k in sorted(arcs):
        succ = arcs[k]
        starts = [i for i in succ if i in lay.origin_depots]
        for o in sorted(starts):
            visits = [o]
            cur = o
            dest = lay.dest_of(o)
            while cur != dest:
                if cur not in succ:
                    raise ValueError(f"platform {k} route from node {o} dead-ends at {cur}")
                nxt = succ[cur]
                consumed.add((cur, nxt, k))
                visits.append(nxt)
                cur = nxt
                if len(visits) > lay.n_nodes + 1:
                    raise ValueError(f"platform {k} route from node {o} does not terminate")
            if len(visits) > 2:
                routes.append((k, visits))

    leftovers = used - consumed
    if leftovers:
        raise ValueError(f"disconnected arcs not on any depot-anchored route: "
                         f"{sorted(leftovers)[:5]}")

    sol = Solution()
    for k, visits in routes:
        sol.routes.append(Route(platform_id=k, visits=visits, uid=sol.new_uid()))
    served = {lay.request_of(v) for r in sol.routes for v in r.visits
              if lay.request_of(v)}
    sol.unserved = set(range(1, lay.h_r + 1)) - served
    return sol


# ---------------------------------------------------------------------------
# direct verification of a solution against the model rows


def _embed_assignment(inst: Instance, sol: Solution) -> dict[str, float]:
    """Canonical variable assignment representing a candidate solution.

    Used arcs get their platform and a per-type module id (1 for passenger
    segments, mu_p+1 for freight; the same id may appear on several
    segments, which the formulation permits).  Arrival variables carry the
    minimal-duration schedule where defined, window openings elsewhere, and
    pinned deadlines at unused destinations; load variables carry the exact
    running loads.  If any feasible assignment represents the solution, this
    one does.
    """
    lay = inst.layout
    vals: dict[str, float] = {}
    # arrival defaults: depot pairs sit at the origin deadline when unused so
    # their duration term vanishes; all other nodes at the window opening
    for i in range(1, lay.n_nodes + 1):
        default = float(inst.a[i])
        if i in lay.dest_depots:
            default = max(default, float(inst.b[i - lay.h_d - 2 * lay.h_r]))
        elif i in lay.origin_depots:
            default = float(inst.b[i])
        for k in range(1, inst.fleet.kappa + 1):
            vals[_s(i, k)] = default

    m_pass = 1
    m_frt = inst.fleet.mu_p + 1
    for r in sol.routes:
        k = r.platform_id
        segs = route_segments(inst, r)
        kinds = [kind for kind, _ in segs]
        # resolve untyped segments by alternation from the nearest typed one
        for si in range(len(kinds)):
            if kinds[si] is None:
                prev_t = next((kinds[sj] for sj in range(si - 1, -1, -1)
                               if kinds[sj] is not None), None)
                if prev_t is not None:
                    flip = (si - next(sj for sj in range(si - 1, -1, -1)
                                      if kinds[sj] is not None)) % 2
                    kinds[si] = prev_t if flip == 0 else _other(prev_t)
                else:
                    nxt_t = next((kinds[sj] for sj in range(si + 1, len(kinds))
                                  if kinds[sj] is not None), PASSENGER)
                    off = next((sj for sj in range(si + 1, len(kinds))
                                if kinds[sj] is not None), si)
                    kinds[si] = nxt_t if (off - si) % 2 == 0 else _other(nxt_t)
        seg = 0
        vs = r.visits
        for pos in range(1, len(vs)):
            u, v = vs[pos - 1], vs[pos]
            m = m_pass if kinds[min(seg, len(kinds) - 1)] == PASSENGER else m_frt
            vals[_x(u, v, k)] = 1.0
            vals[_y(u, v, m)] = vals.get(_y(u, v, m), 0.0) + 1.0
            if inst.cls[v] == CLS_SD:
                seg += 1
        # arrivals from the minimal-duration schedule; fall back to the
        # earliest schedule when the route misses a deadline
        visits = r.visits_array()
        viol, P, E, Lm = kernels.route_schedule_terms(visits, inst.t, inst.a, inst.b)
        a0 = float(inst.a[visits[0]])
        b0 = float(inst.b[visits[0]])
        depart = a0 if viol >= 0 else max(a0, min(E, min(b0, Lm)))
        arr = np.empty(len(visits))
        kernels.route_arrivals(visits, inst.t, inst.a, depart, arr)
        for pos, v in enumerate(vs):
            vals[_s(v, k)] = float(arr[pos])
        # exact running loads
        load = 0.0
        for v in vs:
            if inst.cls[v] in (kernels.CLS_DEPOT_ORIGIN, kernels.CLS_DEPOT_DEST, CLS_SD):
                load = 0.0
            else:
                load += float(inst.q[v])
                vals[_c(v)] = load
        # module count
        n_mod = 1 + sum(1 for v in vs if inst.cls[v] == CLS_SD)
        vals[_e(k, n_mod)] = 1.0
    return vals


def _other(kind):
    from .instance import FREIGHT
    return FREIGHT if kind == PASSENGER else PASSENGER


def verify_assignment(inst: Instance, sol: Solution,
                      model: MilpModel | None = None,
                      tol: float = 1e-6) -> list[str]:
    """Names of model rows violated by the canonical embedding of ``sol``.

    An empty list means the solution satisfies the exact formulation; this
    is the checker's dual route for equivalence testing.
    """
    model = model or build_milp(inst)
    vals = _embed_assignment(inst, sol)
    bad = []
    # variable domains (45-49): binaries in {0, 1}, loads and arrivals >= 0
    for var, v in vals.items():
        if var[0] in "xye":
            if abs(v) > tol and abs(v - 1.0) > tol:
                bad.append(f"dom_{var}")
        elif v < -tol:
            bad.append(f"dom_{var}")
    for name, items, sense, rhs in model.rows:
        lhs = 0.0
        for coef, var in items:
            v = vals.get(var, 0.0)
            if v != 0.0:
                lhs += coef * v
        if sense == "<=" and lhs > rhs + tol:
            bad.append(name)
        elif sense == ">=" and lhs < rhs - tol:
            bad.append(name)
        elif sense == "=" and abs(lhs - rhs) > tol:
            bad.append(name)
    return bad


def model_objective(inst: Instance, sol: Solution,
                    model: MilpModel | None = None) -> float:
    """Objective value of the canonical embedding under the model row."""
    model = model or build_milp(inst)
    vals = _embed_assignment(inst, sol)
    return model.constant + sum(coef * vals.get(var, 0.0)
                                for var, coef in model.minimize.items())


# ---------------------------------------------------------------------------
# exact solver for tiny instances


def brute_force_solve(inst: Instance, max_requests: int = 8,
                      max_platforms: int = 3) -> tuple[Solution, float]:
    """Global optimum by exhaustive enumeration.

    Enumerates, per request subset and depot site, every precedence-valid
    visit order with every admissible module-change placement (pruned by
    window, capacity and range prefix bounds), then assembles the optimal
    partition of served requests into at most ``kappa`` routes by dynamic
    programming over subsets.  Per-site service-depot budgets are verified
    on the winner and enforced exactly via a budget-threaded search when the
    relaxed winner overdraws a site.
    """
    lay = inst.layout
    h = lay.h_r
    if h > max_requests:
        raise ValueError(f"{h} requests exceed the enumeration guard {max_requests}")
    if inst.fleet.kappa > max_platforms:
        raise ValueError(f"kappa {inst.fleet.kappa} exceeds the enumeration guard {max_platforms}")
    if h == 0:
        sol = empty_solution(inst)
        return sol, evaluate(inst, sol).total

    pick = np.array([lay.pickup_node(r) for r in range(1, h + 1)], dtype=np.int64)
    drop = np.array([lay.dropoff_node(r) for r in range(1, h + 1)], dtype=np.int64)
    rtypes = np.array([inst.request_type(r) for r in range(1, h + 1)], dtype=np.int64)
    sd_reps = np.array([dups[0] for dups in inst.sd_sites], dtype=np.int64)
    sd_caps = np.array([len(dups) for dups in inst.sd_sites], dtype=np.int64)
    S = len(sd_reps)
    n_slots = 1
    for cap in sd_caps:
        n_slots *= int(cap) + 1
    strides = []
    st = 1
    for cap in sd_caps:
        strides.append(st)
        st *= int(cap) + 1

    c = inst.cost
    base_cost = c.alpha_ps + c.alpha_ms
    change_cost = c.alpha_ms + c.alpha_mc
    td_per_m = c.alpha_td / 1000.0
    tt_per_s = c.alpha_tt / 3600.0
    eta_m = inst.fleet.eta * 1000.0
    maxlen = 2 * h + (h - 1 if h > 1 else 0) + 1

    # route_options[mask] = {slot: (cost, depot_site, action_seq)}
    route_options: list[dict[int, tuple[float, int, tuple[int, ...]]]] = [dict() for _ in range(1 << h)]
    out_cost = np.empty(n_slots)
    out_len = np.empty(n_slots, dtype=np.int64)
    out_seq = np.empty((n_slots, maxlen), dtype=np.int64)
    for mask in range(1, 1 << h):
        reqs = [r for r in range(h) if mask >> r & 1]
        sub_pick = pick[reqs]
        sub_drop = drop[reqs]
        sub_types = rtypes[reqs]
        opts = route_options[mask]
        for site, group in enumerate(inst.depot_groups):
            origin = group[0]
            dest = lay.dest_of(origin)
            out_cost.fill(np.inf)
            kernels.enumerate_route_dfs(
                sub_pick, sub_drop, sub_types, origin, dest,
                sd_reps, sd_caps, inst.t, inst.a, inst.b, inst.q, inst.w,
                inst.fleet.gamma_p, inst.fleet.gamma_f, eta_m,
                base_cost, change_cost, td_per_m, tt_per_s,
                out_cost, out_len, out_seq)
            for slot in range(n_slots):
                if np.isfinite(out_cost[slot]):
                    prev = opts.get(slot)
                    if prev is None or out_cost[slot] < prev[0]:
                        seq = tuple(int(x) for x in out_seq[slot, :out_len[slot]])
                        opts[slot] = (float(out_cost[slot]), site, seq)

    best_route = [min((v[0] for v in opts.values()), default=np.inf)
                  for opts in route_options]

    # subset-partition DP, budgets relaxed
    kappa = inst.fleet.kappa
    INF = float("inf")
    dp = [[INF] * (kappa + 1) for _ in range(1 << h)]
    choice: dict[tuple[int, int], int] = {}
    dp[0][0] = 0.0
    for mask in range(1, 1 << h):
        low = mask & -mask
        sub = mask
        while sub:
            if sub & low and best_route[sub] < INF:
                rest = mask ^ sub
                for parts in range(kappa):
                    cand = dp[rest][parts] + best_route[sub]
                    if cand < dp[mask][parts + 1] - 1e-12:
                        dp[mask][parts + 1] = cand
                        choice[(mask, parts + 1)] = sub
            sub = (sub - 1) & mask
    best_total = INF
    best_key = (0, 0)
    for mask in range(1 << h):
        penalty = c.alpha_ud * (h - bin(mask).count("1"))
        for parts in range(kappa + 1):
            tot = dp[mask][parts] + penalty
            if tot < best_total - 1e-12:
                best_total = tot
                best_key = (mask, parts)

    def reconstruct(mask, parts):
        blocks = []
        while mask:
            sub = choice[(mask, parts)]
            blocks.append(sub)
            mask ^= sub
            parts -= 1
        return blocks

    blocks = reconstruct(*best_key)
    picked = []
    for sub in blocks:
        opts = route_options[sub]
        slot = min(opts, key=lambda sl: (opts[sl][0], sl))
        picked.append((sub, slot) + opts[slot])

    usage_total = [0] * S
    for _sub, slot, _cost, _site, _seq in picked:
        for si in range(S):
            usage_total[si] += (slot // strides[si]) % (int(sd_caps[si]) + 1)
    if any(usage_total[si] > int(sd_caps[si]) for si in range(S)):
        picked = _solve_with_budgets(route_options, h, kappa, c.alpha_ud,
                                     [int(x) for x in sd_caps], strides)

    sol = _assemble(inst, picked)
    report = check_feasibility(inst, sol)
    if report:
        raise AssertionError(f"enumerated optimum failed verification: {report[:3]}")
    return sol, evaluate(inst, sol).total


def _solve_with_budgets(route_options, h, kappa, alpha_ud, caps, strides):
    """Exact partition search threading per-site budgets through the blocks."""
    from functools import lru_cache
    S = len(caps)

    def decode(slot):
        return tuple((slot // strides[si]) % (caps[si] + 1) for si in range(S))

    full = (1 << h) - 1

    @lru_cache(maxsize=None)
    def rec(remaining, parts_left, caps_left):
        if remaining == 0:
            return 0.0, ()
        low_bit = remaining & -remaining
        best_cost, best_blocks = rec(remaining ^ low_bit, parts_left, caps_left)
        best_cost += alpha_ud
        if parts_left > 0:
            sub = remaining
            while sub:
                if sub & low_bit:
                    for slot, (cost, site, seq) in sorted(route_options[sub].items()):
                        use = decode(slot)
                        if all(use[si] <= caps_left[si] for si in range(S)):
                            rest = tuple(caps_left[si] - use[si] for si in range(S))
                            rc, rb = rec(remaining ^ sub, parts_left - 1, rest)
                            tot = cost + rc
                            if tot < best_cost - 1e-12:
                                best_cost = tot
                                best_blocks = ((sub, slot, cost, site, seq),) + rb
                sub = (sub - 1) & remaining
        return best_cost, best_blocks

    _cost, blocks = rec(full, kappa, tuple(caps))
    return list(blocks)


def _assemble(inst: Instance, picked) -> Solution:
    """Turn enumerated (mask, slot, cost, site, action sequence) blocks into
    a concrete solution with distinct depot and service-depot duplicates."""
    lay = inst.layout
    sol = Solution()
    used_origin: set[int] = set()
    sd_next = [0] * len(inst.sd_sites)
    platform = 0
    served: set[int] = set()
    for sub, _slot, _cost, site, seq in sorted(picked, key=lambda blk: blk[0] & -blk[0]):
        platform += 1
        reqs = [r for r in range(lay.h_r) if sub >> r & 1]
        origin = next(nd for nd in inst.depot_groups[site] if nd not in used_origin)
        used_origin.add(origin)
        visits = [origin]
        g = len(reqs)
        for act in seq:
            if act < g:
                rid = reqs[act] + 1
                visits.append(lay.pickup_node(rid))
                served.add(rid)
            elif act < 2 * g:
                visits.append(lay.dropoff_node(reqs[act - g] + 1))
            else:
                si = act - 2 * g
                visits.append(inst.sd_sites[si][sd_next[si]])
                sd_next[si] += 1
        visits.append(lay.dest_of(origin))
        sol.routes.append(Route(platform_id=platform, visits=visits,
                                uid=sol.new_uid()))
    sol.unserved = set(range(1, lay.h_r + 1)) - served
    return sol
