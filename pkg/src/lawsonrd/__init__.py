"""Lawson exponential integrators for 1-D reaction-diffusion problems.

Classical Lawson steps suffer order reduction with non-vanishing boundary
data; the corrected steps inject boundary traces through phi-functions and
recover local orders 2, 3 and 4.
"""

from .boundary import BoundaryTermSet, TraceHistory, bdf_time_derivative, boundary_terms
from .discretization import (DiscreteSpace, Grid1D, build_collocation, build_fd_dirichlet,
                             build_fd_mixed, build_space, elliptic_projection)
from .harness import ErrorReport, StudyConfig, assumption_audit, emit_csv, get_preset, run_study
from .integrators import (BlowUpError, SchemeKind, check_compatible, global_error, integrate,
                          local_error_sweep, step_classical, step_corrected2, step_corrected3,
                          step_corrected4)
from .phi import LinearPropagator, PhiRequest, augmented_oracle, phi_scalar, propagator_apply
from .problems import ManufacturedProblem, get_problem, manufacture
from .tableaus import ButcherTableau, builtin, classical_order

__version__ = "0.1.0"

__all__ = [
    "BlowUpError", "BoundaryTermSet", "ButcherTableau", "DiscreteSpace", "ErrorReport",
    "Grid1D", "LinearPropagator", "ManufacturedProblem", "PhiRequest", "SchemeKind",
    "StudyConfig", "TraceHistory", "assumption_audit", "augmented_oracle",
    "bdf_time_derivative", "boundary_terms", "build_collocation", "build_fd_dirichlet",
    "build_fd_mixed", "build_space", "builtin", "check_compatible", "classical_order", "elliptic_projection",
    "emit_csv", "get_preset", "get_problem", "global_error", "integrate", "local_error_sweep",
    "manufacture", "phi_scalar", "propagator_apply", "run_study", "step_classical",
    "step_corrected2", "step_corrected3", "step_corrected4",
]
