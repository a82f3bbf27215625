"""Obstacle-constrained heat states and their distributed optimal control.

P1 finite elements on the unit square; two state families (Robin heat
exchange on part of the boundary, and its large-coefficient Dirichlet
limit); projected-SOR and active-set solvers for the obstacle problem;
quadratic-cost control optimization; and convergence studies in the mesh
size, the heat transfer coefficient, and both jointly.
"""

from .assembly import (
    AssembledSystem,
    ProblemData,
    assemble,
    coercivity_constant,
    dump_matrix,
    load_vector,
    norm_H,
    norm_R,
    norm_V,
    norms,
    robin_matrix,
)
from .control import (
    ConjectureReport,
    CostReport,
    OptimizeReport,
    check_open_problems,
    convex_combination_states,
    cost,
    optimize,
)
from .convergence import (
    DiagramReport,
    RateTable,
    StudySession,
    alpha_sweep_state,
    diagram,
    fit_order,
    h_sweep_cost,
    h_sweep_state,
    interp_rate_study,
)
from .mesh import (
    Mesh,
    ScalarField,
    build_unit_square,
    constant_field,
    interpolate,
    prolongate,
    refine_uniform,
    validate_mesh,
    write_mesh,
)
from .vi_solver import (
    DIRICHLET_LIMIT,
    ROBIN,
    VIProblem,
    VIReport,
    build_vi_problem,
    solve_active_set,
    solve_enumerate,
    solve_psor,
    solve_state,
)

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem",
    "ConjectureReport",
    "CostReport",
    "DIRICHLET_LIMIT",
    "DiagramReport",
    "Mesh",
    "OptimizeReport",
    "ProblemData",
    "ROBIN",
    "RateTable",
    "ScalarField",
    "StudySession",
    "VIProblem",
    "VIReport",
    "alpha_sweep_state",
    "assemble",
    "build_unit_square",
    "build_vi_problem",
    "check_open_problems",
    "coercivity_constant",
    "constant_field",
    "convex_combination_states",
    "cost",
    "diagram",
    "dump_matrix",
    "fit_order",
    "h_sweep_cost",
    "h_sweep_state",
    "interp_rate_study",
    "interpolate",
    "load_vector",
    "norm_H",
    "norm_R",
    "norm_V",
    "norms",
    "optimize",
    "prolongate",
    "refine_uniform",
    "robin_matrix",
    "solve_active_set",
    "solve_enumerate",
    "solve_psor",
    "solve_state",
    "validate_mesh",
    "write_mesh",
]
