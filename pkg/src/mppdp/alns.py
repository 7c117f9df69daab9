"""Adaptive large neighborhood search: roulette-wheel operator selection,
simulated-annealing acceptance, score-driven weight adaptation, and the
objective-variation termination rule.

One search is strictly sequential; ensemble runs share the immutable
instance and use independent seeded generators.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .destroy import DESTROY_OPERATORS, RemovalParams, apply_destroy
from .instance import Instance
from .repair import REPAIR_OPERATORS, apply_repair, best_insert
from .solution import Solution, check_feasibility, empty_solution, objective


@dataclass(frozen=True)
class SearchConfig:
    """Search parameters; the defaults are the tuned values."""
    sigma1: float = 7.0        # score: new global best
    sigma2: float = 2.0        # score: accepted and improving
    sigma3: float = 9.0        # score: accepted, not improving
    sigma4: float = 1.0        # score: rejected
    delta: float = 0.1         # weight decay
    lam: int = 10000           # max iterations
    lambda_min: int = 2000     # min iterations before variation check
    omega: int = 1000          # look-back span
    epsilon: float = 0.01      # objective variation threshold
    t_start: float = 100.0
    t_end: float = 0.0001
    nu: float = 0.9999         # geometric cooling factor
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must be in [0, 1]")
        if self.lambda_min > self.lam:
            raise ValueError("lambda_min must be <= lambda")
        if self.omega < 1:
            raise ValueError("omega must be >= 1")
        if not self.t_start > self.t_end > 0:
            raise ValueError("temperatures must satisfy t_start > t_end > 0")
        if not 0 < self.nu < 1:
            raise ValueError("nu must be in (0, 1)")


def config_from_dict(doc: dict) -> tuple[SearchConfig, RemovalParams]:
    """Build search and removal parameters from a JSON document.

    Keys use the parameter names (``lambda`` is accepted for the iteration
    budget).  Unknown keys raise.
    """
    doc = dict(doc)
    if "lambda" in doc:
        doc["lam"] = doc.pop("lambda")
    search_keys = {f.name for f in SearchConfig.__dataclass_fields__.values()}
    removal_keys = {f.name for f in RemovalParams.__dataclass_fields__.values()}
    skw = {k: v for k, v in doc.items() if k in search_keys}
    rkw = {k: v for k, v in doc.items() if k in removal_keys}
    unknown = set(doc) - search_keys - removal_keys
    if unknown:
        raise ValueError(f"unknown parameter names: {sorted(unknown)}")
    return SearchConfig(**skw), RemovalParams(**rkw)


@dataclass
class OperatorEntry:
    name: str
    weight: float = 1.0
    last_score: float = 0.0


@dataclass
class OperatorBank:
    """Independent destroy and repair operator lists with adaptive weights."""
    destroy: list[OperatorEntry] = field(default_factory=list)
    repair: list[OperatorEntry] = field(default_factory=list)

    @classmethod
    def default(cls) -> "OperatorBank":
        return cls(destroy=[OperatorEntry(n) for n in DESTROY_OPERATORS],
                   repair=[OperatorEntry(n) for n in REPAIR_OPERATORS])

    def entries(self, which: str) -> list[OperatorEntry]:
        if which == "destroy":
            return self.destroy
        if which == "repair":
            return self.repair
        raise ValueError(f"unknown operator list {which!r}")

    def probabilities(self, which: str) -> np.ndarray:
        w = np.array([e.weight for e in self.entries(which)])
        return w / w.sum()


def select_operator(bank: OperatorBank, which: str, rng) -> int:
    """Roulette-wheel selection: operator i drawn with probability w_i / sum w."""
    p = bank.probabilities(which)
    return int(rng.choice(len(p), p=p))


def update_weights(bank: OperatorBank, chosen: tuple[int, int],
                   scores: tuple[float, float], delta: float) -> OperatorBank:
    """Decay-blend the chosen operators' weights with their new scores;
    all other operators are untouched."""
    for which, idx, score in (("destroy", chosen[0], scores[0]),
                              ("repair", chosen[1], scores[1])):
        e = bank.entries(which)[idx]
        e.weight = e.weight * delta + (1.0 - delta) * score
        e.last_score = score
    return bank


def sa_accept(current_obj: float, candidate_obj: float, temperature: float,
              rng) -> bool:
    """Metropolis criterion: always accept non-worsening candidates, accept a
    worsening one with probability exp(-delta/T)."""
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    d = candidate_obj - current_obj
    if d <= 0:
        return True
    return rng.random() < math.exp(-d / temperature)


def score_and_accept(cfg: SearchConfig, cand_obj: float, cur_obj: float,
                     best_obj: float, temperature: float, rng
                     ) -> tuple[float, bool, bool]:
    """The four scoring branches: (score, accepted, new_global_best).

    A strict global improvement scores sigma1 and is always accepted; an
    accepted candidate scores sigma2 when it improves the current solution
    and sigma3 otherwise; a rejected candidate scores sigma4.
    """
    if cand_obj < best_obj:
        return cfg.sigma1, True, True
    if sa_accept(cur_obj, cand_obj, temperature, rng):
        return (cfg.sigma2 if cand_obj < cur_obj else cfg.sigma3), True, False
    return cfg.sigma4, False, False


@dataclass
class SearchTrace:
    """Per-iteration log; ``z[0]`` is the initial objective."""
    z: list[float] = field(default_factory=list)
    best: list[float] = field(default_factory=list)
    temperature: list[float] = field(default_factory=list)
    destroy: list[str] = field(default_factory=list)
    repair: list[str] = field(default_factory=list)
    accepted: list[bool] = field(default_factory=list)
    best_iteration: int = 0

    @property
    def iterations(self) -> int:
        return len(self.z) - 1

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["iteration", "z", "best", "temperature",
                          "destroy", "repair", "accepted"])
            for i in range(len(self.z)):
                if i == 0:
                    out.writerow([0, repr(self.z[0]), repr(self.best[0]),
                                  repr(self.temperature[0]), "", "", ""])
                else:
                    out.writerow([i, repr(self.z[i]), repr(self.best[i]),
                                  repr(self.temperature[i]),
                                  self.destroy[i - 1], self.repair[i - 1],
                                  int(self.accepted[i - 1])])


def should_terminate(trace: SearchTrace, cfg: SearchConfig, i: int) -> bool:
    """True at the iteration budget, or once the look-back window ratio
    (sum of z over [i-2w, i-w]) / (sum over [i-w, i]) has dropped within
    1 + epsilon after the minimum iteration count."""
    if i >= cfg.lam:
        return True
    if i < cfg.lambda_min or i < 2 * cfg.omega:
        return False
    z = trace.z
    old = sum(z[i - 2 * cfg.omega: i - cfg.omega + 1])
    new = sum(z[i - cfg.omega: i + 1])
    if new == 0.0:
        return True
    return old / new - 1.0 <= cfg.epsilon


def initial_solution(inst: Instance, rng) -> Solution:
    """Feasible starting point: best-insertion repair of the all-unserved
    solution (which is itself feasible when nothing can be placed)."""
    return best_insert(empty_solution(inst), inst, rng)


def run_alns(inst: Instance, cfg: SearchConfig | None = None,
             init: Solution | None = None, banks: OperatorBank | None = None,
             rng=None, removal: RemovalParams | None = None,
             on_iteration=None) -> tuple[Solution, SearchTrace]:
    """Run the destroy/repair search and return the best solution found.

    ``init`` must pass the feasibility checker.  ``on_iteration`` is called
    as ``on_iteration(i, current, candidate, accepted)`` after every
    iteration (used by verification harnesses).
    """
    cfg = cfg or SearchConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
    removal = removal or RemovalParams()
    bank = banks or OperatorBank.default()

    if init is None:
        init = initial_solution(inst, rng)
    report = check_feasibility(inst, init)
    if report:
        raise ValueError(f"initial solution infeasible: {report[:3]}")

    current = init.copy()
    best = init.copy()
    cur_obj = objective(inst, init)
    best_obj = cur_obj
    n_r = inst.n_requests

    trace = SearchTrace()
    trace.z.append(cur_obj)
    trace.best.append(best_obj)
    trace.temperature.append(cfg.t_start)

    temp = cfg.t_start
    i = 0
    while not should_terminate(trace, cfg, i):
        i += 1
        di = select_operator(bank, "destroy", rng)
        ri = select_operator(bank, "repair", rng)
        dname = bank.destroy[di].name
        rname = bank.repair[ri].name

        partial, memory = apply_destroy(dname, current, inst, n_r, removal, rng)
        candidate = apply_repair(rname, partial, inst, memory, rng)
        cand_obj = objective(inst, candidate)

        score, accepted, new_best = score_and_accept(cfg, cand_obj, cur_obj,
                                                     best_obj, temp, rng)
        if new_best:
            best = candidate.copy()
            best_obj = cand_obj
            trace.best_iteration = i
        if accepted:
            current = candidate
            cur_obj = cand_obj
        update_weights(bank, (di, ri), (score, score), cfg.delta)

        trace.z.append(cur_obj)
        trace.best.append(best_obj)
        trace.temperature.append(temp)
        trace.destroy.append(dname)
        trace.repair.append(rname)
        trace.accepted.append(accepted)
        if on_iteration is not None:
            on_iteration(i, current, candidate, accepted)
        temp = max(temp * cfg.nu, cfg.t_end)
    return best, trace
