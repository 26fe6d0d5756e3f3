"""Radial quasilinear Neumann problems on the unit ball.

Nonconstant, positive, radially nondecreasing solutions of

    -div(|grad u|^(p-2) grad u) + u^(p-1) = f(u),   u'(0) = u'(1) = 0,

computed two independent ways: a cone-constrained mountain-pass descent on
a truncated problem, and a radial ODE shooting oracle.  A separate study
follows the pure power family f(u) = u^(q-1) to its q -> infinity limit
profile G.
"""

from .driver import (ProblemSetup, SolveResult, parse_nonlinearity,
                     setup_problem, solve_problem)
from .energy import (EnergyReport, energy, energy_report, fd_gradient_check,
                     grad_norm, gradient, nehari_scale, residual_strong)
from .errors import (ConepassError, DegenerateInputError, GeometryError,
                     InvalidNonlinearityError, InvalidParameterError,
                     NonconvergenceError, ShootingFailureError,
                     TruncationFailureError, UnsupportedNonlinearityError)
from .limit_study import (ConvergenceReport, SweepRow, compute_c_infinity,
                          convergence_report, run_q_sweep, sweep_csv_lines,
                          write_profile_dat, write_sweep_csv)
from .mountain_pass import (MinimaxOptions, Path, SolveReport, TaylorRow,
                            descend, direction_v, initial_path,
                            minimax_solve, taylor_certificate)
from .nonlinearity import (ConstantStates, HypothesisReport, Nonlinearity,
                           TruncatedNonlinearity, build_truncation,
                           check_hypotheses, critical_exponent,
                           estimate_sup_cap, find_constant_states,
                           from_table, multiwell, phi_p, pure_power,
                           zero_nonlinearity)
from .operator import (InnerSolveOptions, apply_T, fixed_point_map,
                       inner_solve, pseudo_gradient_K,
                       verify_cone_preservation)
from .radial import (RadialFunction, RadialGrid, constant_profile, integrate,
                     is_in_cone, make_grid, norm_w1p, project_cone,
                     random_cone_profile, read_profile_csv,
                     write_profile_csv)
from .shooting import (LimitProfile, ShootingSolution, integrate_ivp, shoot,
                       shoot_dirichlet_G, shoot_limit_profile, shoot_neumann,
                       variational_G)

__version__ = "0.1.0"

__all__ = [
    "ConepassError", "ConstantStates", "ConvergenceReport",
    "DegenerateInputError", "EnergyReport", "GeometryError",
    "HypothesisReport", "InnerSolveOptions", "InvalidNonlinearityError",
    "InvalidParameterError", "LimitProfile", "MinimaxOptions",
    "Nonlinearity", "NonconvergenceError", "Path", "ProblemSetup",
    "RadialFunction", "RadialGrid", "ShootingFailureError",
    "ShootingSolution",
    "SolveReport", "SolveResult", "SweepRow", "TaylorRow",
    "TruncatedNonlinearity", "TruncationFailureError",
    "UnsupportedNonlinearityError", "apply_T", "build_truncation",
    "check_hypotheses", "compute_c_infinity", "constant_profile",
    "convergence_report", "critical_exponent", "descend", "direction_v",
    "energy", "energy_report", "estimate_sup_cap", "fd_gradient_check",
    "find_constant_states", "fixed_point_map", "from_table", "grad_norm",
    "gradient", "initial_path", "inner_solve", "integrate",
    "integrate_ivp", "is_in_cone", "make_grid", "minimax_solve",
    "multiwell", "nehari_scale", "norm_w1p", "parse_nonlinearity",
    "phi_p", "project_cone", "pseudo_gradient_K", "pure_power",
    "random_cone_profile", "read_profile_csv", "residual_strong",
    "run_q_sweep", "setup_problem", "shoot", "shoot_dirichlet_G",
    "shoot_limit_profile", "shoot_neumann", "solve_problem",
    "sweep_csv_lines", "taylor_certificate", "variational_G",
    "verify_cone_preservation",
    "write_profile_csv", "write_profile_dat", "write_sweep_csv",
    "zero_nonlinearity",
]
