"""Exact maximum likelihood for rank-2 projection determinantal point processes.

Given per-pair observation counts, this package enumerates every complex
critical point of the log-likelihood over rank-2 projection kernels by
monodromy and parameter homotopy, certifies that all of them are real
strict local maxima, collapses them to their distinct probability
vectors, and returns the global maximizer — the exact MLE.
"""

from .analysis import (
    ImplicitPoint,
    MleResult,
    SignVector,
    VerificationReport,
    classify_hessians,
    enumerate_regions,
    implicit_images,
    select_mle,
    sign_vector,
    solution_sign_vector,
    to_implicit,
    verify_counts,
)
from .dpp import (
    DppDistribution,
    ProjectionKernel,
    dpp_distribution,
    projection_from_rows,
    random_counts,
    sample_counts,
)
from .estimator import ProjectionDppMle
from .exceptions import (
    DegenerateInstanceError,
    DivergedError,
    DomainError,
    DppmleError,
    FileFormatError,
    IncompleteSetError,
    KernelError,
    NoRealSolutionError,
    PathFailureError,
    PoleHitError,
    RankError,
    SeedFailureError,
    SingularJacobianError,
)
from .model import (
    DataCounts,
    MatrixParam,
    PlueckerVector,
    appended_column_quadric,
    gradient,
    hessian,
    in_domain,
    log_likelihood_general_d,
    log_likelihood_implicit,
    log_likelihood_parametric,
    plucker,
)
from .pipeline import SolveRun, Warmstart, build_warmstart, run_solve, run_verify
from .solver import (
    GradientSystem,
    Solution,
    SolutionSet,
    TrackerConfig,
    expected_count,
    ml_degree,
    monodromy_solve,
    newton_refine,
    seed_solution,
    solve_at,
    solve_at_many,
    track_path,
)

__version__ = "0.1.0"

__all__ = [
    "DataCounts",
    "DegenerateInstanceError",
    "DivergedError",
    "DomainError",
    "DppDistribution",
    "DppmleError",
    "FileFormatError",
    "GradientSystem",
    "ImplicitPoint",
    "IncompleteSetError",
    "KernelError",
    "MatrixParam",
    "MleResult",
    "NoRealSolutionError",
    "PathFailureError",
    "PlueckerVector",
    "PoleHitError",
    "ProjectionDppMle",
    "ProjectionKernel",
    "RankError",
    "SeedFailureError",
    "SignVector",
    "SingularJacobianError",
    "Solution",
    "SolutionSet",
    "SolveRun",
    "TrackerConfig",
    "VerificationReport",
    "Warmstart",
    "build_warmstart",
    "classify_hessians",
    "dpp_distribution",
    "enumerate_regions",
    "expected_count",
    "appended_column_quadric",
    "gradient",
    "hessian",
    "implicit_images",
    "in_domain",
    "log_likelihood_general_d",
    "log_likelihood_implicit",
    "log_likelihood_parametric",
    "ml_degree",
    "monodromy_solve",
    "newton_refine",
    "plucker",
    "projection_from_rows",
    "random_counts",
    "run_solve",
    "run_verify",
    "sample_counts",
    "seed_solution",
    "select_mle",
    "sign_vector",
    "solution_sign_vector",
    "solve_at",
    "solve_at_many",
    "to_implicit",
    "track_path",
    "verify_counts",
]
