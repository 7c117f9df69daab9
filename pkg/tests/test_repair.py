"""Repair operators: service-depot insertion principles, pruning, the three
insertion heuristics and their contracts."""

import numpy as np
import pytest

from mppdp import (
    Route, Solution, check_feasibility, empty_solution, evaluate, objective,
)
from mppdp.alns import initial_solution
from mppdp.destroy import RemovalParams, random_removal
from mppdp.repair import (
    best_insert, feasible_service_depot_positions, first_fit_insert,
    inter_route_insert, prune_redundant_service_depots, scan_route_insertion,
    insert_pair,
)

from conftest import tiny_instance


class TestServiceDepotPositions:
    def test_single_passenger_route_start_and_end_only(self, poc1):
        lay = poc1.layout
        r = Route(1, [1, lay.pickup_node(1), lay.dropoff_node(1), lay.dest_of(1)], 1)
        positions = feasible_service_depot_positions(r, poc1)
        gaps = {g for g, _node in positions}
        assert gaps == {1, 3}

    def test_type_change_gap_is_valid(self, poc1):
        lay = poc1.layout
        # freight dropoff directly followed by a passenger pickup
        r = Route(1, [1, lay.pickup_node(2), lay.dropoff_node(2),
                      lay.pickup_node(1), lay.dropoff_node(1), lay.dest_of(1)], 1)
        positions = feasible_service_depot_positions(r, poc1)
        assert 3 in {g for g, _ in positions}

    def test_same_type_gap_is_not(self):
        inst = tiny_instance(n_passenger=2, n_freight=0, n_sd=1, seed=40)
        lay = inst.layout
        r = Route(1, [1, lay.pickup_node(1), lay.dropoff_node(1),
                      lay.pickup_node(2), lay.dropoff_node(2), lay.dest_of(1)], 1)
        gaps = {g for g, _ in feasible_service_depot_positions(r, inst)}
        assert 3 not in gaps
        assert gaps <= {1, 5}

    def test_respects_duplicate_budget(self, poc1):
        lay = poc1.layout
        r = Route(1, [1, lay.pickup_node(1), lay.dropoff_node(1), lay.dest_of(1)], 1)
        used = set(lay.service_depots)   # every duplicate consumed
        assert feasible_service_depot_positions(r, poc1, used) == []


class TestPrune:
    def test_leading_pair_removed(self, poc1):
        lay = poc1.layout
        sds = list(lay.service_depots)
        r = Route(1, [1, sds[0], sds[1], lay.pickup_node(2),
                      lay.dropoff_node(2), lay.dest_of(1)], 1)
        pruned = prune_redundant_service_depots(r, poc1)
        assert pruned.visits == [1, lay.pickup_node(2), lay.dropoff_node(2),
                                 lay.dest_of(1)]

    def test_load_bearing_sd_kept(self, poc1):
        lay = poc1.layout
        sd = list(lay.service_depots)[0]
        r = Route(1, [1, lay.pickup_node(1), lay.dropoff_node(1), sd,
                      lay.pickup_node(2), lay.dropoff_node(2), lay.dest_of(1)], 1)
        assert prune_redundant_service_depots(r, poc1).visits == r.visits

    def test_idempotent(self, poc1):
        lay = poc1.layout
        sds = list(lay.service_depots)
        r = Route(1, [1, sds[0], lay.pickup_node(1), lay.dropoff_node(1),
                      sds[1], lay.dest_of(1)], 1)
        once = prune_redundant_service_depots(r, poc1)
        twice = prune_redundant_service_depots(once, poc1)
        assert once.visits == twice.visits

    def test_never_increases_objective(self):
        inst = tiny_instance(n_passenger=1, n_freight=1, n_sd=1, seed=41)
        lay = inst.layout
        sd = list(lay.service_depots)[0]
        r = Route(1, [1, sd, lay.pickup_node(1), lay.dropoff_node(1), lay.dest_of(1)], 1)
        before = evaluate(inst, Solution(routes=[Route(1, list(r.visits), 1)],
                                         unserved={2})).total
        pruned = prune_redundant_service_depots(r, inst)
        after = evaluate(inst, Solution(routes=[pruned], unserved={2})).total
        assert after <= before + 1e-9


class TestFirstFit:
    def test_single_request_opens_route(self):
        inst = tiny_instance(n_passenger=1, n_freight=0, seed=42)
        sol = first_fit_insert(empty_solution(inst), inst, np.random.default_rng(0))
        assert len(sol.routes) == 1
        assert sol.unserved == set()
        assert check_feasibility(inst, sol) == []

    def test_platform_budget_blocks(self):
        # one platform, capacity one: the second request stays unserved
        inst = tiny_instance(n_passenger=2, n_freight=0, kappa=1, seed=43,
                             tw="tight")
        sol = first_fit_insert(empty_solution(inst), inst, np.random.default_rng(1))
        assert check_feasibility(inst, sol) == []
        assert len(sol.routes) <= 1

    def test_output_always_feasible(self):
        inst = tiny_instance(n_passenger=3, n_freight=3, n_sd=1, seed=44, tw="peak")
        for s in range(5):
            sol = first_fit_insert(empty_solution(inst), inst,
                                   np.random.default_rng(s))
            assert check_feasibility(inst, sol) == []


class TestInterRoute:
    def test_memory_target_used(self):
        inst = tiny_instance(n_passenger=3, n_freight=3, kappa=3, seed=45)
        full = initial_solution(inst, np.random.default_rng(2))
        partial, memory = random_removal(full, inst, 2, np.random.default_rng(3))
        repaired = inter_route_insert(partial, inst, memory, np.random.default_rng(4))
        assert check_feasibility(inst, repaired) == []
        by_uid = {r.uid: r for r in repaired.routes}
        for rid, uid in memory.items():
            if rid not in repaired.unserved and uid in by_uid:
                nodes = set(by_uid[uid].visits)
                assert inst.layout.pickup_node(rid) in nodes

    def test_dissolved_route_falls_back_to_random(self):
        inst = tiny_instance(n_passenger=2, n_freight=0, kappa=2, seed=46)
        full = initial_solution(inst, np.random.default_rng(5))
        partial, memory = random_removal(full, inst, 2, np.random.default_rng(6))
        memory = {rid: 9999 for rid in memory}   # stale uids
        repaired = inter_route_insert(partial, inst, memory, np.random.default_rng(7))
        assert check_feasibility(inst, repaired) == []

    def test_no_routes_leaves_unserved(self):
        inst = tiny_instance(n_passenger=1, n_freight=0, seed=47)
        out = inter_route_insert(empty_solution(inst), inst, {},
                                 np.random.default_rng(0))
        assert out.unserved == {1}

    def test_applied_delta_matches_reevaluation(self):
        inst = tiny_instance(n_passenger=3, n_freight=0, kappa=1, seed=48)
        full = initial_solution(inst, np.random.default_rng(8))
        partial, memory = random_removal(full, inst, 1, np.random.default_rng(9))
        rid = next(iter(partial.unserved))
        route = partial.routes[0]
        gp, gd, delta = scan_route_insertion(inst, route, rid)
        assert gp >= 0
        before = objective(inst, partial)
        applied = partial.copy()
        insert_pair(applied.routes[0], gp, gd, inst.layout.pickup_node(rid),
                    inst.layout.dropoff_node(rid))
        applied.unserved.discard(rid)
        after = objective(inst, applied)
        assert after - before == pytest.approx(delta - inst.cost.alpha_ud, abs=1e-9)


class TestBestInsert:
    def test_prefers_existing_route_on_smaller_delta(self):
        inst = tiny_instance(n_passenger=2, n_freight=0, kappa=2, seed=49)
        rng = np.random.default_rng(0)
        sol = best_insert(empty_solution(inst), inst, rng)
        # second request shares the single route when that is cheaper than
        # a fresh platform plus module
        ob = evaluate(inst, sol)
        assert ob.b6 == 0
        assert ob.b1 == 1

    def test_module_change_coupled_insertion(self, poc1):
        sol = best_insert(empty_solution(poc1), poc1, np.random.default_rng(1))
        ob = evaluate(poc1, sol)
        assert ob.b6 == 0
        assert ob.b1 == 1
        assert ob.b5 == 1   # the mixed pair fits one platform via one change
        assert check_feasibility(poc1, sol) == []

    def test_unservable_requests_stay_unserved(self):
        from mppdp import DepotSpec, FleetParams, RequestSpec, build_instance
        inst = build_instance(
            [RequestSpec((0.0, 0.0), (19.0, 0.0), tw_dropoff=(1.0, 10.0))],
            [DepotSpec((10.0, 10.0))], [], FleetParams(kappa=2))
        sol = best_insert(empty_solution(inst), inst, np.random.default_rng(2))
        assert sol.unserved == {1}
        assert sol.routes == []

    def test_never_increases_unserved(self):
        inst = tiny_instance(n_passenger=4, n_freight=4, n_sd=2, seed=50, tw="peak")
        full = initial_solution(inst, np.random.default_rng(3))
        partial, _m = random_removal(full, inst, 4, np.random.default_rng(4))
        out = best_insert(partial, inst, np.random.default_rng(5))
        assert len(out.unserved) <= len(partial.unserved)
        assert check_feasibility(inst, out) == []

    def test_dominates_inter_route(self):
        # over the same request and state, best-insert's chosen delta is never
        # worse than inter-route's (its candidate set is a superset)
        inst = tiny_instance(n_passenger=4, n_freight=2, kappa=2, seed=51)
        full = initial_solution(inst, np.random.default_rng(6))
        partial, memory = random_removal(full, inst, 2, np.random.default_rng(7))
        for rid in sorted(partial.unserved):
            best_delta = None
            for route in partial.routes:
                gp, _gd, delta = scan_route_insertion(inst, route, rid)
                if gp >= 0 and (best_delta is None or delta < best_delta):
                    best_delta = delta
            uid = memory.get(rid)
            target = next((r for r in partial.routes if r.uid == uid), None)
            if target is None:
                continue
            gp, _gd, inter_delta = scan_route_insertion(inst, target, rid)
            if gp >= 0 and best_delta is not None:
                assert best_delta <= inter_delta + 1e-9


class TestRepairFeasibilityProperty:
    def test_destroy_repair_cycles_stay_feasible(self):
        inst = tiny_instance(n_passenger=5, n_freight=5, n_sd=2, kappa=3,
                             seed=52, tw="peak")
        rng = np.random.default_rng(11)
        sol = initial_solution(inst, rng)
        from mppdp.destroy import apply_destroy
        from mppdp.repair import apply_repair
        ops_d = ("random", "module", "platform", "service_depot", "shaw", "worst")
        ops_r = ("first_fit", "inter_route", "best")
        params = RemovalParams()
        for i in range(24):
            dname = ops_d[i % len(ops_d)]
            rname = ops_r[i % len(ops_r)]
            partial, memory = apply_destroy(dname, sol, inst, inst.n_requests,
                                            params, rng)
            assert check_feasibility(inst, partial) == [], dname
            sol = apply_repair(rname, partial, inst, memory, rng)
            assert check_feasibility(inst, sol) == [], rname
