"""Hot numeric kernels shared by the evaluator, the checker, the repair scans
and the exact route enumerator.

Every kernel is compiled with numba's ``@njit`` unless the environment
variable ``MPPDP_PURE_PYTHON=1`` is set, in which case the same functions run
as plain Python/numpy.  Both paths execute the identical statements in the
identical order, so results are bit-equal across the two modes.

Conventions used throughout:

* node ids are 1-based; array slot 0 is padding,
* ``visits`` is an ``int64`` array of node ids, starting at an origin depot
  and ending at the paired destination depot,
* ``t[i, j]`` is travel time in seconds from i to j *including* the service
  duration of node i; ``w[i, j]`` is distance in meters,
* a "gap" ``g`` (1 <= g <= L-1) is the insertion slot between ``visits[g-1]``
  and ``visits[g]``.

Route duration uses the closed form of the latest-feasible-departure
schedule: with cumulative travel ``P_k`` to the k-th visit, anchor
``E = max_k(a_k - P_k)`` and slack ``Lm = min_k(b_k - P_k)``, the minimal
duration is ``P_total + max(0, E - T*)`` where ``T* = min(b_origin, Lm)``.
"""

import os

import numpy as np

PURE_PYTHON = os.environ.get("MPPDP_PURE_PYTHON", "0") == "1"

if PURE_PYTHON:
    def njit(*args, **kwargs):  # decorator shim for the pure-python path
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap
else:
    from numba import njit


# node class codes (see instance.Instance.cls)
CLS_DEPOT_ORIGIN = 0
CLS_DEPOT_DEST = 1
CLS_PICKUP_P = 2
CLS_PICKUP_F = 3
CLS_DROP_P = 4
CLS_DROP_F = 5
CLS_SD = 6

# violation codes returned by route_loads
LOAD_OK = 0
LOAD_NEGATIVE = 1
LOAD_OVER_P = 2
LOAD_OVER_F = 3
LOAD_MIXED_SEGMENT = 4
LOAD_STRANDED = 5
LOAD_EMPTY_SEGMENT = 6
LOAD_NO_ALTERNATION = 7
LOAD_BAD_NODE = 8

_EPS = 1e-9
_INF = 1e100


@njit(cache=True)
def route_schedule_terms(visits, t, a, b):
    """Forward pass over a route.

    Returns ``(viol_pos, P, E, Lm)`` where ``viol_pos`` is the index into
    ``visits`` of the first node whose deadline is missed by the earliest
    schedule (-1 if none).  P/E/Lm accumulate over the whole route even past
    a violation so callers can still price infeasible routes.
    """
    L = visits.shape[0]
    viol = -1
    s = a[visits[0]]
    P = 0.0
    E = -_INF
    Lm = _INF
    for k in range(1, L):
        u = visits[k - 1]
        v = visits[k]
        tt = t[u, v]
        P = P + tt
        s = s + tt
        av = a[v]
        bv = b[v]
        if s > bv and viol < 0:
            viol = k
        if s < av:
            s = av
        e = av - P
        if e > E:
            E = e
        l = bv - P
        if l < Lm:
            Lm = l
    return viol, P, E, Lm


@njit(cache=True)
def duration_from_terms(P, E, Lm, a0, b0):
    """Minimal route duration for the delayed-departure schedule."""
    tstar = b0 if b0 < Lm else Lm
    if tstar < a0:
        tstar = a0
    d = E - tstar
    if d < 0.0:
        d = 0.0
    return P + d


@njit(cache=True)
def route_arrivals(visits, t, a, depart, out):
    """Forward arrival times given an origin departure; fills ``out``."""
    L = visits.shape[0]
    s = depart
    out[0] = s
    for k in range(1, L):
        s = s + t[visits[k - 1], visits[k]]
        av = a[visits[k]]
        if s < av:
            s = av
        out[k] = s
    return out


@njit(cache=True)
def route_loads(visits, q, cls, gamma_p, gamma_f, out_load):
    """Running loads with resets at depots and service depots.

    Fills ``out_load`` (load after service at each visit) and returns
    ``(code, pos)`` with the first violation (LOAD_OK, -1 when clean).
    Also enforces segment typing: one request type per segment, alternating
    across service-depot visits, no empty segments.
    """
    L = visits.shape[0]
    load = 0.0
    seg_type = -1
    prev_seg_type = -1
    seg_has_req = False
    out_load[0] = 0.0
    for k in range(1, L):
        v = visits[k]
        c = cls[v]
        if c == CLS_SD:
            out_load[k] = 0.0
            if load > _EPS:
                return LOAD_STRANDED, k
            if not seg_has_req:
                return LOAD_EMPTY_SEGMENT, k
            if prev_seg_type >= 0 and seg_type == prev_seg_type:
                return LOAD_NO_ALTERNATION, k
            prev_seg_type = seg_type
            seg_type = -1
            seg_has_req = False
            load = 0.0
        elif c == CLS_DEPOT_DEST:
            out_load[k] = 0.0
            if load > _EPS or load < -_EPS:
                return LOAD_STRANDED, k
            if not seg_has_req:
                return LOAD_EMPTY_SEGMENT, k
            if prev_seg_type >= 0 and seg_type == prev_seg_type:
                return LOAD_NO_ALTERNATION, k
        elif c == CLS_PICKUP_P or c == CLS_PICKUP_F or c == CLS_DROP_P or c == CLS_DROP_F:
            ty = 1 if (c == CLS_PICKUP_F or c == CLS_DROP_F) else 0
            if seg_type == -1:
                seg_type = ty
            elif seg_type != ty:
                return LOAD_MIXED_SEGMENT, k
            seg_has_req = True
            load = load + q[v]
            out_load[k] = load
            if load < -_EPS:
                return LOAD_NEGATIVE, k
            if seg_type == 0 and load > gamma_p + _EPS:
                return LOAD_OVER_P, k
            if seg_type == 1 and load > gamma_f + _EPS:
                return LOAD_OVER_F, k
        else:
            return LOAD_BAD_NODE, k
    return LOAD_OK, -1


@njit(cache=True)
def route_distance(visits, w):
    """Total route distance in meters."""
    d = 0.0
    for k in range(1, visits.shape[0]):
        d = d + w[visits[k - 1], visits[k]]
    return d


@njit(cache=True)
def route_eval_terms(visits, t, a, b, w, cls):
    """Fused pass for the evaluator: schedule terms, distance and stop
    counts in one sweep.

    Returns ``(viol_pos, P, E, Lm, dist_m, n_sd, n_pickups)``.
    """
    L = visits.shape[0]
    viol = -1
    s = a[visits[0]]
    P = 0.0
    E = -_INF
    Lm = _INF
    dist = 0.0
    n_sd = 0
    n_pick = 0
    for k in range(1, L):
        u = visits[k - 1]
        v = visits[k]
        tt = t[u, v]
        P = P + tt
        dist = dist + w[u, v]
        s = s + tt
        av = a[v]
        bv = b[v]
        if s > bv and viol < 0:
            viol = k
        if s < av:
            s = av
        e = av - P
        if e > E:
            E = e
        l = bv - P
        if l < Lm:
            Lm = l
        c = cls[v]
        if c == CLS_SD:
            n_sd += 1
        elif c == CLS_PICKUP_P or c == CLS_PICKUP_F:
            n_pick += 1
    return viol, P, E, Lm, dist, n_sd, n_pick


@njit(cache=True)
def scan_pair_insertion(visits, gap_seg, gap_type, p, d, rtype, qval,
                        t, a, b, q, cls, w, gamma, eta_m,
                        td_per_m, tt_per_s, first_fit):
    """Scan all joint insertions of pickup ``p`` / dropoff ``d`` into a route.

    ``gap_seg[g]`` / ``gap_type[g]`` describe the segment each gap belongs to
    (type -2 = forbidden, -1 = untyped, 0 = passenger, 1 = freight).  An
    insertion puts p at gap ``gp`` and d at gap ``gd`` (gd == gp means d
    immediately after p); both gaps must lie in the same segment, so the pair
    travels within a single module.

    Returns ``(gp, gd, delta, ddist_m, ddur_s)`` for the cheapest feasible
    candidate, with ``delta = td_per_m*ddist + tt_per_s*ddur``; gp == -1 when
    no feasible position exists.  With ``first_fit`` the first feasible
    candidate in (gp, gd) scan order is returned instead.
    """
    L = visits.shape[0]

    # forward pass: cumulative travel, earliest arrivals, anchors, loads
    cumT = np.empty(L)
    s_earl = np.empty(L)
    prefA = np.empty(L)
    prefB = np.empty(L)
    load_after = np.empty(L)
    cumT[0] = 0.0
    s_earl[0] = a[visits[0]]
    prefA[0] = -_INF
    prefB[0] = _INF
    load_after[0] = 0.0
    load = 0.0
    dist_orig = 0.0
    for k in range(1, L):
        u = visits[k - 1]
        v = visits[k]
        cumT[k] = cumT[k - 1] + t[u, v]
        dist_orig = dist_orig + w[u, v]
        s = s_earl[k - 1] + t[u, v]
        if s < a[v]:
            s = a[v]
        s_earl[k] = s
        e = a[v] - cumT[k]
        prefA[k] = e if e > prefA[k - 1] else prefA[k - 1]
        l = b[v] - cumT[k]
        prefB[k] = l if l < prefB[k - 1] else prefB[k - 1]
        c = cls[v]
        if c == CLS_DEPOT_ORIGIN or c == CLS_DEPOT_DEST or c == CLS_SD:
            load = 0.0
        else:
            load = load + q[v]
        load_after[k] = load

    # suffix anchors relative to cumulative travel
    suffA = np.empty(L)
    suffB = np.empty(L)
    suffA[L - 1] = a[visits[L - 1]] - cumT[L - 1]
    suffB[L - 1] = b[visits[L - 1]] - cumT[L - 1]
    for k in range(L - 2, -1, -1):
        e = a[visits[k]] - cumT[k]
        suffA[k] = e if e > suffA[k + 1] else suffA[k + 1]
        l = b[visits[k]] - cumT[k]
        suffB[k] = l if l < suffB[k + 1] else suffB[k + 1]

    b0 = b[visits[0]]
    a0 = a[visits[0]]
    D_orig = duration_from_terms(cumT[L - 1], prefA[L - 1], prefB[L - 1], a0, b0)

    best_gp = -1
    best_gd = -1
    best_delta = _INF
    best_dd = 0.0
    best_ddur = 0.0

    for gp in range(1, L):
        gt = gap_type[gp]
        if gt != -1 and gt != rtype:
            continue
        prev = visits[gp - 1]
        arr_p = s_earl[gp - 1] + t[prev, p]
        if arr_p > b[p]:
            continue
        s_p = arr_p if arr_p > a[p] else a[p]
        P_p = cumT[gp - 1] + t[prev, p]
        E_p = prefA[gp - 1]
        e = a[p] - P_p
        if e > E_p:
            E_p = e
        Lm_p = prefB[gp - 1]
        l = b[p] - P_p
        if l < Lm_p:
            Lm_p = l
        base_load = load_after[gp - 1] + qval
        if base_load > gamma + _EPS:
            continue
        loadmax = base_load

        mid_s = s_p
        mid_P = P_p
        mid_E = E_p
        mid_Lm = Lm_p
        last = p
        for gd in range(gp, L):
            if gd > gp:
                # extend the middle with the original node before gap gd
                nxt = visits[gd - 1]
                arr = mid_s + t[last, nxt]
                if arr > b[nxt]:
                    break
                mid_s = arr if arr > a[nxt] else a[nxt]
                mid_P = mid_P + t[last, nxt]
                e = a[nxt] - mid_P
                if e > mid_E:
                    mid_E = e
                l = b[nxt] - mid_P
                if l < mid_Lm:
                    mid_Lm = l
                ld = load_after[gd - 1] + qval
                if ld > loadmax:
                    loadmax = ld
                last = nxt
                if gap_seg[gd] != gap_seg[gp]:
                    break
            if loadmax > gamma + _EPS:
                break
            # candidate: d between `last` and visits[gd]
            arr_d = mid_s + t[last, d]
            if arr_d > b[d]:
                continue
            s_d = arr_d if arr_d > a[d] else a[d]
            P_d = mid_P + t[last, d]
            E_d = mid_E
            e = a[d] - P_d
            if e > E_d:
                E_d = e
            Lm_d = mid_Lm
            l = b[d] - P_d
            if l < Lm_d:
                Lm_d = l
            nxt2 = visits[gd]
            arr_tail = s_d + t[d, nxt2]
            if arr_tail > suffB[gd] + cumT[gd]:
                continue
            delta_t = (P_d + t[d, nxt2]) - cumT[gd]
            E_tot = E_d
            e = suffA[gd] - delta_t
            if e > E_tot:
                E_tot = e
            Lm_tot = Lm_d
            l = suffB[gd] - delta_t
            if l < Lm_tot:
                Lm_tot = l
            P_tot = cumT[L - 1] + delta_t
            dur = duration_from_terms(P_tot, E_tot, Lm_tot, a0, b0)
            if gd == gp:
                dd = (w[prev, p] + w[p, d] + w[d, nxt2]) - w[prev, nxt2]
            else:
                dd = (w[prev, p] + w[p, visits[gp]] - w[prev, visits[gp]]) \
                    + (w[last, d] + w[d, nxt2] - w[last, nxt2])
            if dist_orig + dd > eta_m + 1e-6:
                continue
            ddur = dur - D_orig
            delta = td_per_m * dd + tt_per_s * ddur
            if first_fit:
                return gp, gd, delta, dd, ddur
            if delta < best_delta:
                best_gp = gp
                best_gd = gd
                best_delta = delta
                best_dd = dd
                best_ddur = ddur
    return best_gp, best_gd, best_delta, best_dd, best_ddur


@njit(cache=True)
def enumerate_route_dfs(pick_nodes, drop_nodes, rtypes, origin, dest,
                        sd_nodes, sd_caps, t, a, b, q, w,
                        gamma_p, gamma_f, eta_m,
                        base_cost, change_cost, td_per_m, tt_per_s,
                        out_cost, out_len, out_seq):
    """Exhaustive enumeration of feasible single-route orderings.

    Serves every request in ``pick_nodes``/``drop_nodes`` on one route from
    ``origin`` to ``dest``.  Module changes are branch points over the sites
    in ``sd_nodes`` (each capped by ``sd_caps``); a change is only allowed
    after a dropoff with nothing on board, and segment types alternate.
    Prefix pruning: missed deadlines, capacity, and range including the
    return leg.

    For every per-site usage signature (mixed-radix slot over ``sd_caps``)
    the cheapest action sequence is recorded in ``out_cost``/``out_seq``
    (actions: r = pickup r, g + r = dropoff r, 2g + s = change at site s).
    """
    g = pick_nodes.shape[0]
    S = sd_nodes.shape[0]
    n_actions = 2 * g + S
    full = (1 << g) - 1
    maxdepth = 2 * g + (g - 1 if g > 1 else 0) + 1

    # mixed-radix strides for usage slots
    strides = np.empty(S, dtype=np.int64)
    st = 1
    for s_i in range(S):
        strides[s_i] = st
        st = st * (sd_caps[s_i] + 1)

    # per-depth state stacks
    st_s = np.empty(maxdepth + 1)
    st_P = np.empty(maxdepth + 1)
    st_E = np.empty(maxdepth + 1)
    st_Lm = np.empty(maxdepth + 1)
    st_dist = np.empty(maxdepth + 1)
    st_load = np.empty(maxdepth + 1)
    st_seg = np.empty(maxdepth + 1, dtype=np.int64)
    st_picked = np.empty(maxdepth + 1, dtype=np.int64)
    st_dropped = np.empty(maxdepth + 1, dtype=np.int64)
    st_onboard = np.empty(maxdepth + 1, dtype=np.int64)
    st_last = np.empty(maxdepth + 1, dtype=np.int64)
    st_changes = np.empty(maxdepth + 1, dtype=np.int64)
    st_slot = np.empty(maxdepth + 1, dtype=np.int64)
    st_caps = np.empty((maxdepth + 1, S if S > 0 else 1), dtype=np.int64)
    act_iter = np.empty(maxdepth + 1, dtype=np.int64)
    seq = np.empty(maxdepth + 1, dtype=np.int64)

    depth = 0
    st_s[0] = a[origin]
    st_P[0] = 0.0
    st_E[0] = -_INF
    st_Lm[0] = _INF
    st_dist[0] = 0.0
    st_load[0] = 0.0
    st_seg[0] = -1
    st_picked[0] = 0
    st_dropped[0] = 0
    st_onboard[0] = 0
    st_last[0] = origin
    st_changes[0] = 0
    st_slot[0] = 0
    for s_i in range(S):
        st_caps[0, s_i] = sd_caps[s_i]
    act_iter[0] = 0

    a0 = a[origin]
    b0 = b[origin]

    while depth >= 0:
        if st_picked[depth] == full and st_dropped[depth] == full:
            # close the route
            last = st_last[depth]
            arr = st_s[depth] + t[last, dest]
            dist2 = st_dist[depth] + w[last, dest]
            if arr <= b[dest] and dist2 <= eta_m + 1e-6:
                P2 = st_P[depth] + t[last, dest]
                E2 = st_E[depth]
                e = a[dest] - P2
                if e > E2:
                    E2 = e
                Lm2 = st_Lm[depth]
                l = b[dest] - P2
                if l < Lm2:
                    Lm2 = l
                dur = duration_from_terms(P2, E2, Lm2, a0, b0)
                cost = base_cost + st_changes[depth] * change_cost \
                    + td_per_m * dist2 + tt_per_s * dur
                slot = st_slot[depth]
                if cost < out_cost[slot]:
                    out_cost[slot] = cost
                    out_len[slot] = depth
                    for kk in range(depth):
                        out_seq[slot, kk] = seq[kk]
            depth -= 1
            continue

        advanced = False
        ai = act_iter[depth]
        while ai < n_actions:
            act = ai
            ai += 1
            ok = False
            node = np.int64(-1)
            if act < g:
                r = act
                bit = 1 << r
                if st_picked[depth] & bit:
                    continue
                sty = st_seg[depth]
                if sty != -1 and sty != rtypes[r]:
                    continue
                node = pick_nodes[r]
                gam = gamma_p if rtypes[r] == 0 else gamma_f
                if st_load[depth] + q[node] > gam + _EPS:
                    continue
                ok = True
            elif act < 2 * g:
                r = act - g
                bit = 1 << r
                if not (st_onboard[depth] & bit):
                    continue
                node = drop_nodes[r]
                ok = True
            else:
                s_i = act - 2 * g
                if st_caps[depth, s_i] <= 0:
                    continue
                if st_onboard[depth] != 0:
                    continue
                if st_picked[depth] == full:
                    continue  # a pickup must follow a module change
                if depth == 0:
                    continue  # cannot change before serving anything
                prev_act = seq[depth - 1]
                if not (g <= prev_act < 2 * g):
                    continue  # change only directly after a dropoff
                node = sd_nodes[s_i]
                ok = True
            if not ok:
                continue

            last = st_last[depth]
            arr = st_s[depth] + t[last, node]
            if arr > b[node]:
                continue
            ndist = st_dist[depth] + w[last, node]
            if ndist + w[node, dest] > eta_m + 1e-6:
                continue

            # commit the action
            nd = depth + 1
            st_s[nd] = arr if arr > a[node] else a[node]
            st_P[nd] = st_P[depth] + t[last, node]
            e = a[node] - st_P[nd]
            st_E[nd] = e if e > st_E[depth] else st_E[depth]
            l = b[node] - st_P[nd]
            st_Lm[nd] = l if l < st_Lm[depth] else st_Lm[depth]
            st_dist[nd] = ndist
            st_last[nd] = node
            for t_i in range(S):
                st_caps[nd, t_i] = st_caps[depth, t_i]
            if act < g:
                bit = 1 << act
                st_load[nd] = st_load[depth] + q[node]
                st_seg[nd] = rtypes[act] if st_seg[depth] == -1 else st_seg[depth]
                st_picked[nd] = st_picked[depth] | bit
                st_dropped[nd] = st_dropped[depth]
                st_onboard[nd] = st_onboard[depth] | bit
                st_changes[nd] = st_changes[depth]
                st_slot[nd] = st_slot[depth]
            elif act < 2 * g:
                r = act - g
                bit = 1 << r
                st_load[nd] = st_load[depth] + q[node]
                st_seg[nd] = st_seg[depth]
                st_picked[nd] = st_picked[depth]
                st_dropped[nd] = st_dropped[depth] | bit
                st_onboard[nd] = st_onboard[depth] & ~bit
                st_changes[nd] = st_changes[depth]
                st_slot[nd] = st_slot[depth]
            else:
                s_i = act - 2 * g
                st_load[nd] = 0.0
                st_seg[nd] = 1 - st_seg[depth]  # types alternate at a change
                st_picked[nd] = st_picked[depth]
                st_dropped[nd] = st_dropped[depth]
                st_onboard[nd] = 0
                st_changes[nd] = st_changes[depth] + 1
                st_caps[nd, s_i] = st_caps[depth, s_i] - 1
                st_slot[nd] = st_slot[depth] + strides[s_i]
            seq[depth] = act
            act_iter[depth] = ai
            act_iter[nd] = 0
            depth = nd
            advanced = True
            break
        if not advanced:
            depth -= 1
    return 0
