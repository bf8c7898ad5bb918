"""Numerical laboratory for blow-up of the damped semilinear wave equation in one space dimension.

The package solves the first-order Riemann-invariant system on a characteristic
cone lattice, extracts the blow-up curve, and checks rate bounds and
self-similar profiles against the computed field.
"""

from .expr import Expression, ExprEvalError, ExprSyntaxError
from .model import (AssumptionReport, ConfigError, DataError, InitialData, ProblemConfig,
                    constant_data, validate_assumptions)
from .ode import closed_form_T1, closed_form_y, rk4_trajectory
from .solver import (ConeLattice, FieldSolution, picard_iterates, picard_sweep,
                     solve_characteristic)
from .curve import BlowupCurve, curve_extract, distance_to_curve
from .analysis import check_gradient_domination, check_picard_monotone, check_two_sided
from .selfsimilar import profile_constants, profile_convergence, profile_residual

__version__ = "0.1.0"

__all__ = [
    "Expression", "ExprEvalError", "ExprSyntaxError",
    "AssumptionReport", "ConfigError", "DataError", "InitialData", "ProblemConfig",
    "constant_data", "validate_assumptions",
    "closed_form_T1", "closed_form_y", "rk4_trajectory",
    "ConeLattice", "FieldSolution", "picard_iterates", "picard_sweep", "solve_characteristic",
    "BlowupCurve", "curve_extract", "distance_to_curve",
    "check_gradient_domination", "check_picard_monotone", "check_two_sided",
    "profile_constants", "profile_convergence", "profile_residual",
]
