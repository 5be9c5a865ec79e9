"""Separable convex resource allocation solved through quadratic instances."""

from .applications import (
                     RouteSpec,
                     StorageSpec,
                     TaskSpec,
                     channel_power_to_rap,
                     mse_power_to_rap,
                     recover,
                     solve_app,
                     speedscale_to_rap,
                     storage_to_rap,
                     stratified_to_rap,
                     vessel_to_rap,
)
from .constants import EPS_FEAS, FD_STEP, TOL_CERT
from .errors import (
                     BudgetExceeded,
                     CertificateFailure,
                     DimensionMismatch,
                     DomainViolation,
                     GreedyUnsafe,
                     InfeasibleInstance,
                     InfeasiblePoint,
                     MalformedFamily,
                     NonpositiveScale,
                     NotStrictlyConvex,
                     RapError,
)
from .laminar import solve_gbc, solve_laminar, solve_nested_fast
from .model import (
                     QUADRATIC,
                     Certificate,
                     ConstraintSpec,
                     ConvexFunction,
                     Domain,
                     ExchangeGraph,
                     FeasibilityReport,
                     Instance,
                     Kind,
                     ObjectiveSpec,
                     Solution,
                     check_feasibility,
                     evaluate_objective,
                     exchangeable_pairs,
                     marginals,
                     validate_instance,
                     verify_condition1,
)
from .oracle import (
                     OracleBudget,
                     brute_force_integer,
                     greedy_integer,
                     grid_refine_continuous,
)
from .qbox import solve_qbox_continuous, solve_qbox_integer, solve_qbox_variable_fixing
from .reduction import (
                     ABS,
                     CATALOG_NAMES,
                     EXP,
                     NEG_LOG,
                     POWER4,
                     RECIPROCAL,
                     THRESHOLD,
                     catalog,
                     check_strict_equivalence,
                     perspective,
                     reciprocal_power,
                     solve_quadratic,
                     solve_separable,
                     threshold,
)
from .structure import (
                     CrossFreeFamily,
                     LaminarTree,
                     build_tree,
                     check_lemma_properties,
                     conic_decompose,
                     laminar_to_crossfree,
                     propagate_bounds,
)

__version__ = "0.1.0"

__all__ = [
                     "ABS",
                     "CATALOG_NAMES",
                     "EPS_FEAS",
                     "EXP",
                     "FD_STEP",
                     "NEG_LOG",
                     "POWER4",
                     "QUADRATIC",
                     "RECIPROCAL",
                     "THRESHOLD",
                     "TOL_CERT",
                     "BudgetExceeded",
                     "Certificate",
                     "CertificateFailure",
                     "ConstraintSpec",
                     "ConvexFunction",
                     "CrossFreeFamily",
                     "DimensionMismatch",
                     "Domain",
                     "DomainViolation",
                     "ExchangeGraph",
                     "FeasibilityReport",
                     "GreedyUnsafe",
                     "InfeasibleInstance",
                     "InfeasiblePoint",
                     "Instance",
                     "Kind",
                     "LaminarTree",
                     "MalformedFamily",
                     "NonpositiveScale",
                     "NotStrictlyConvex",
                     "ObjectiveSpec",
                     "OracleBudget",
                     "RapError",
                     "RouteSpec",
                     "Solution",
                     "StorageSpec",
                     "TaskSpec",
                     "brute_force_integer",
                     "build_tree",
                     "catalog",
                     "channel_power_to_rap",
                     "check_feasibility",
                     "check_lemma_properties",
                     "check_strict_equivalence",
                     "conic_decompose",
                     "evaluate_objective",
                     "exchangeable_pairs",
                     "greedy_integer",
                     "grid_refine_continuous",
                     "laminar_to_crossfree",
                     "marginals",
                     "mse_power_to_rap",
                     "perspective",
                     "propagate_bounds",
                     "reciprocal_power",
                     "recover",
                     "solve_app",
                     "solve_gbc",
                     "solve_laminar",
                     "solve_nested_fast",
                     "solve_qbox_continuous",
                     "solve_qbox_integer",
                     "solve_qbox_variable_fixing",
                     "solve_quadratic",
                     "solve_separable",
                     "speedscale_to_rap",
                     "storage_to_rap",
                     "stratified_to_rap",
                     "threshold",
                     "validate_instance",
                     "verify_condition1",
                     "vessel_to_rap",
]
