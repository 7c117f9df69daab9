"""Solver toolkit for pickup-and-delivery with exchangeable vehicle modules."""

from .instance import (
    CostParams, DepotSpec, FleetParams, Instance, NodeIndexLayout,
    RequestSpec, ServiceDepotSpec, big_m, build_instance, instance_from_dict,
    instance_to_dict, load_instance, node_class, save_instance, travel_time,
    PASSENGER, FREIGHT,
)
from .solution import (
    ObjectiveBreakdown, Route, Schedule, Solution, Violation,
    check_feasibility, compute_loads, compute_schedule, empty_solution,
    evaluate, is_feasible, load_solution, objective, save_solution,
    solution_from_dict, solution_to_dict, LoadInfeasible, ScheduleInfeasible,
)
from .scenarios import (
    ScenarioConfig, assign_time_windows, build_scenario, generate_scenario,
    poc_instance, scenario_grid,
)

__version__ = "0.1.0"
