"""Search mechanics: roulette selection, weight updates, acceptance,
termination, scoring branches, reproducibility."""

import math

import numpy as np
import pytest
from scipy import stats

from mppdp import evaluate, poc_instance, empty_solution
from mppdp.alns import (
    OperatorBank, OperatorEntry, SearchConfig, SearchTrace, config_from_dict,
    initial_solution, run_alns, sa_accept, score_and_accept, select_operator,
    should_terminate, update_weights,
)


class TestSearchConfig:
    def test_defaults(self):
        cfg = SearchConfig()
        assert (cfg.sigma1, cfg.sigma2, cfg.sigma3, cfg.sigma4) == (7, 2, 9, 1)
        assert cfg.delta == 0.1
        assert (cfg.lam, cfg.lambda_min, cfg.omega) == (10000, 2000, 1000)
        assert cfg.epsilon == 0.01
        assert (cfg.t_start, cfg.t_end, cfg.nu) == (100.0, 0.0001, 0.9999)

    def test_validation(self):
        with pytest.raises(ValueError):
            SearchConfig(delta=1.5)
        with pytest.raises(ValueError):
            SearchConfig(lambda_min=10, lam=5)
        with pytest.raises(ValueError):
            SearchConfig(t_start=1.0, t_end=2.0)
        with pytest.raises(ValueError):
            SearchConfig(nu=1.0)

    def test_config_from_dict_lambda_alias(self):
        cfg, rp = config_from_dict({"lambda": 100, "lambda_min": 10,
                                    "omega": 5, "xi": 0.5})
        assert cfg.lam == 100
        assert rp.xi == 0.5
        with pytest.raises(ValueError):
            config_from_dict({"not_a_param": 1})


class TestSelectOperator:
    def test_probabilities(self):
        bank = OperatorBank(destroy=[OperatorEntry("a", 1.0),
                                     OperatorEntry("b", 1.0),
                                     OperatorEntry("c", 2.0)],
                            repair=[OperatorEntry("r", 1.0)])
        assert np.allclose(bank.probabilities("destroy"), [0.25, 0.25, 0.5])

    def test_single_operator_always_chosen(self):
        bank = OperatorBank(destroy=[OperatorEntry("only")],
                            repair=[OperatorEntry("r")])
        rng = np.random.default_rng(0)
        assert all(select_operator(bank, "destroy", rng) == 0 for _ in range(20))

    def test_uniform_selection_chi_square(self):
        bank = OperatorBank.default()
        rng = np.random.default_rng(42)
        n = 100_000
        k = len(bank.destroy)
        counts = np.zeros(k)
        p = bank.probabilities("destroy")
        draws = rng.choice(k, size=n, p=p)
        for d in draws:
            counts[d] += 1
        chi2 = ((counts - n / k) ** 2 / (n / k)).sum()
        # k-1 degrees of freedom at alpha = 0.01
        assert chi2 < stats.chi2.ppf(0.99, k - 1)


class TestUpdateWeights:
    def _bank(self):
        return OperatorBank(destroy=[OperatorEntry("d0"), OperatorEntry("d1")],
                            repair=[OperatorEntry("r0"), OperatorEntry("r1")])

    def test_blend_arithmetic(self):
        bank = self._bank()
        update_weights(bank, (0, 1), (7.0, 7.0), 0.1)
        assert bank.destroy[0].weight == pytest.approx(0.1 * 1 + 0.9 * 7)
        assert bank.repair[1].weight == pytest.approx(6.4)

    def test_delta_one_keeps_weight(self):
        bank = self._bank()
        update_weights(bank, (0, 0), (9.0, 9.0), 1.0)
        assert bank.destroy[0].weight == 1.0

    def test_delta_zero_equals_score(self):
        bank = self._bank()
        update_weights(bank, (0, 0), (9.0, 2.0), 0.0)
        assert bank.destroy[0].weight == 9.0
        assert bank.repair[0].weight == 2.0

    def test_only_chosen_updated(self):
        bank = self._bank()
        update_weights(bank, (0, 1), (7.0, 7.0), 0.1)
        assert bank.destroy[1].weight == 1.0
        assert bank.repair[0].weight == 1.0


class TestSaAccept:
    def test_zero_delta_always_accepts(self):
        rng = np.random.default_rng(0)
        assert all(sa_accept(10.0, 10.0, 0.5, rng) for _ in range(100))

    def test_vanishing_temperature_rejects(self):
        rng = np.random.default_rng(0)
        acc = sum(sa_accept(0.0, 100.0, 1e-6, rng) for _ in range(1000))
        assert acc == 0

    def test_delta_equal_temperature_monte_carlo(self):
        rng = np.random.default_rng(123)
        n = 100_000
        acc = sum(sa_accept(0.0, 50.0, 50.0, rng) for _ in range(n))
        assert acc / n == pytest.approx(math.exp(-1.0), abs=0.01)

    def test_temperature_positive_required(self):
        with pytest.raises(ValueError):
            sa_accept(0.0, 1.0, 0.0, np.random.default_rng(0))


class _FixedRng:
    def __init__(self, value):
        self.value = value

    def random(self):
        return self.value


class TestScoreBranches:
    def test_all_four_branches(self):
        cfg = SearchConfig()
        # new global best
        assert score_and_accept(cfg, 5.0, 10.0, 8.0, 1.0, _FixedRng(0.99)) == \
            (cfg.sigma1, True, True)
        # accepted and improving the current solution
        assert score_and_accept(cfg, 9.0, 10.0, 8.0, 1.0, _FixedRng(0.99)) == \
            (cfg.sigma2, True, False)
        # accepted without improvement (worse but lucky draw)
        assert score_and_accept(cfg, 10.5, 10.0, 8.0, 100.0, _FixedRng(0.0)) == \
            (cfg.sigma3, True, False)
        # rejected
        assert score_and_accept(cfg, 50.0, 10.0, 8.0, 0.001, _FixedRng(0.99)) == \
            (cfg.sigma4, False, False)

    def test_tie_with_best_is_not_new_best(self):
        cfg = SearchConfig()
        score, accepted, new_best = score_and_accept(
            cfg, 8.0, 10.0, 8.0, 1.0, _FixedRng(0.99))
        assert not new_best
        assert accepted and score == cfg.sigma2


class TestTermination:
    def _trace(self, zs):
        tr = SearchTrace()
        tr.z = list(zs)
        return tr

    def test_constant_sequence_terminates_at_lambda_min(self):
        cfg = SearchConfig(lam=100, lambda_min=20, omega=10)
        tr = self._trace([5.0] * 101)
        assert not should_terminate(tr, cfg, 19)
        assert should_terminate(tr, cfg, 20)

    def test_improving_sequence_keeps_running(self):
        cfg = SearchConfig(lam=1000, lambda_min=20, omega=10, epsilon=0.01)
        zs = [1000.0 / (1 + 0.1 * i) for i in range(200)]
        tr = self._trace(zs)
        assert not should_terminate(tr, cfg, 40)

    def test_budget_is_unconditional(self):
        cfg = SearchConfig(lam=50, lambda_min=20, omega=10)
        zs = [1000.0 - i for i in range(60)]
        assert should_terminate(self._trace(zs), cfg, 50)

    def test_window_needs_history(self):
        cfg = SearchConfig(lam=100, lambda_min=5, omega=10)
        tr = self._trace([5.0] * 101)
        assert not should_terminate(tr, cfg, 15)   # i < 2*omega
        assert should_terminate(tr, cfg, 20)


class TestRunAlns:
    def test_zero_budget_returns_init(self, poc1):
        rng = np.random.default_rng(0)
        init = initial_solution(poc1, rng)
        cfg = SearchConfig(lam=0, lambda_min=0, omega=1)
        best, trace = run_alns(poc1, cfg, init=init, rng=rng)
        assert trace.iterations == 0
        assert evaluate(poc1, best).total == evaluate(poc1, init).total

    def test_converges_to_reference_optimum(self, poc1):
        cfg = SearchConfig(lam=400, lambda_min=300, omega=100, rng_seed=2)
        best, _ = run_alns(poc1, cfg, rng=np.random.default_rng(2))
        ob = evaluate(poc1, best)
        assert (ob.b1, ob.b2, ob.b5) == (1, 2, 1)
        assert round(ob.b4 / 60.0) == 140

    def test_infeasible_init_rejected(self, poc1):
        from mppdp import Route, Solution
        lay = poc1.layout
        bad = Solution(routes=[Route(1, [1, lay.dropoff_node(1),
                                         lay.pickup_node(1), lay.dest_of(1)], 1)],
                       unserved={2})
        with pytest.raises(ValueError, match="infeasible"):
            run_alns(poc1, SearchConfig(lam=5, lambda_min=0, omega=1),
                     init=bad, rng=np.random.default_rng(0))

    def test_best_monotone_and_temperature_schedule(self, poc1):
        cfg = SearchConfig(lam=150, lambda_min=150, omega=50, rng_seed=4)
        _best, trace = run_alns(poc1, cfg, rng=np.random.default_rng(4))
        assert all(trace.best[i + 1] <= trace.best[i] + 1e-12
                   for i in range(len(trace.best) - 1))
        for i in range(2, len(trace.temperature)):
            expect = max(trace.temperature[i - 1] * cfg.nu, cfg.t_end)
            assert trace.temperature[i] == pytest.approx(expect, rel=1e-12)

    def test_bit_reproducible(self, poc1):
        cfg = SearchConfig(lam=120, lambda_min=120, omega=40)
        b1, t1 = run_alns(poc1, cfg, rng=np.random.default_rng(9))
        b2, t2 = run_alns(poc1, cfg, rng=np.random.default_rng(9))
        assert t1.z == t2.z
        assert t1.destroy == t2.destroy
        assert t1.repair == t2.repair
        assert evaluate(poc1, b1).total == evaluate(poc1, b2).total


class TestInitialSolution:
    def test_reference_instance_fully_served(self, poc1):
        sol = initial_solution(poc1, np.random.default_rng(1))
        assert evaluate(poc1, sol).b6 == 0

    def test_unreachable_windows_all_unserved(self):
        from mppdp import (DepotSpec, FleetParams, RequestSpec,
                           build_instance, check_feasibility)
        inst = build_instance(
            [RequestSpec((0.0, 0.0), (19.0, 0.0), tw_pickup=(1.0, 86400.0),
                         tw_dropoff=(1.0, 10.0))],
            [DepotSpec((10.0, 10.0))], [], FleetParams(kappa=1))
        sol = initial_solution(inst, np.random.default_rng(0))
        ob = evaluate(inst, sol)
        assert ob.b6 == 1
        assert ob.total == pytest.approx(inst.cost.alpha_ud)
        assert check_feasibility(inst, sol) == []

    def test_seeded_determinism(self, poc1):
        from mppdp import solution_to_dict
        s1 = initial_solution(poc1, np.random.default_rng(5))
        s2 = initial_solution(poc1, np.random.default_rng(5))
        assert solution_to_dict(poc1, s1) == solution_to_dict(poc1, s2)
