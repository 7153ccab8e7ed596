"""Random 3-SAT laboratory.

Generate random 3-CNF instances, run a degree-guided greedy heuristic on
them (optionally with one-step backtracking, or as the branching rule of a
complete DPLL search), evolve the matching mean-field degree-spectrum
system, and locate by bisection the largest clause density the evolution
survives per selection rule.
"""

from .formula import (
    DegreeTable,
    Formula,
    ParseError,
    ReductionReport,
    build_degree_table,
    emit_dimacs,
    generate_random,
    parse_dimacs,
    set_variable,
    undo_to,
    verify_assignment,
)
from .greedy import (
    RunOutcome,
    SolveResult,
    SolverConfig,
    brute_force_solve,
    dpll_solve,
    run_algorithm_a,
    select_cell,
    unit_propagate,
)
from .ode import (
    OdeConfig,
    SpectrumState,
    Trajectory,
    advance_round,
    forced_move_delta,
    forced_move_delta_naive,
    free_move_delta,
    init_spectrum,
    malthus_rho,
    run_trajectory,
)
from .rules import PolarityRule, SelectionRule, choose_polarity
from .threshold import ThresholdResult, bisect_threshold, compare_rules, trajectory_succeeds

__version__ = "0.1.0"
