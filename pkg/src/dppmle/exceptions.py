"""Exception types shared across the package."""


class DppmleError(Exception):
    """Base class for all package-specific errors."""


class DomainError(DppmleError):
    """A point lies outside the open domain (a minor or the quadric vanishes)."""


class RankError(DppmleError):
    """A matrix has deficient row rank where full rank is required."""


class KernelError(DppmleError):
    """A matrix fails the projection-kernel invariants."""


class SingularJacobianError(DppmleError):
    """Newton's method hit a (numerically) singular Jacobian."""


class DivergedError(DppmleError):
    """Newton's method exceeded its iteration budget without converging."""


class PathFailureError(DppmleError):
    """A tracked path underflowed the minimal step size."""


class PoleHitError(DppmleError):
    """A tracked path ran into a pole of the rational system."""


class SeedFailureError(DppmleError):
    """Start-pair construction hit a rank-ambiguous null space."""


class IncompleteSetError(DppmleError):
    """Monodromy stalled before reaching the expected solution count."""


class NoRealSolutionError(DppmleError):
    """No real critical point is available where one is required."""


class DegenerateInstanceError(DppmleError):
    """A generic instantiation accidentally landed on a degenerate locus."""


class FileFormatError(DppmleError):
    """A JSON input file does not match the expected schema."""
