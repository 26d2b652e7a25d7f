"""Allocation rules: exact branch and bound, greedy, and a brute-force oracle."""

from .brute import brute_force
from .exact import ExactSolution, SolverConfig, solve_exact
from .greedy import greedy_order, solve_greedy
from .problem import AllocationProblem, build_problem, check_feasible, dump_problem, load_problem

__all__ = [
    "AllocationProblem",
    "ExactSolution",
    "SolverConfig",
    "brute_force",
    "build_problem",
    "check_feasible",
    "dump_problem",
    "greedy_order",
    "load_problem",
    "solve_exact",
    "solve_greedy",
]
