"""Globalized additively preconditioned trust-region optimization.

Subdomain solves supply a nonlinearly preconditioned gradient; a dual-radius
trust-region loop turns it into a globally convergent method.  See
``tr_solve`` for the plain baseline and ``gaspin_solve`` for the
preconditioned loop.
"""

from .decomposition import (CorrectedLocalObjective, Decomposition,
                            FrozenSubproblem, LocalObjective, SchwarzOperator,
                            local_objective)
from .driver import (GaspinConfig, accept_step, dual_radius_update,
                     extended_decrease_check, gaspin_solve, preconditioned_model)
from .elasticity import (EnergyConstants, PlaneCompression,
                         elastic_energy_density, lame_parameters)
from .linalg import SymmetricOperator
from .preconditioning import (PerturbationBoundError, PreconditionedGradient,
                              admissible_omega, aspin_gradient, damping_alpha,
                              gtilde_damped, gtilde_trust_region,
                              local_solve_constrained, local_solve_free)
from .problems import (Bratu, CorruptedGradient, DoubleWell, InfeasiblePointError,
                       Problem, Quadratic, Rosenbrock, directional_derivative_fd,
                       fd_check_gradient, fd_gradient, fd_hessian_matrix,
                       model_hessian)
from .runtime import parallel_map
from .trace import IterationRecord, TRACE_COLUMNS, write_summary, write_trace
from .trust_region import (QuadraticModel, SolveResult, TrustRegionConfig,
                           cauchy_point, decrease_ratio, radius_update,
                           steihaug_toint, tr_solve)

__version__ = "0.1.0"
