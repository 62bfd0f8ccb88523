"""Exception hierarchy.

Pipeline exit codes map onto three families: configuration problems,
insufficient traced windows (geometry), and theorem violations (algebra or
classification bugs that must never be accepted as data).
"""


class HomFloerError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(HomFloerError):
    exit_code = 2


class WindowInsufficient(HomFloerError):
    """A traced branch segment does not cover what an operation needs."""

    exit_code = 3


class TheoremViolation(HomFloerError):
    """Computed data contradicts a proven property (d^2, bounds, torsion...)."""

    exit_code = 4


# map_models: a model and guess without a usable saddle are bad input
class NoConvergence(ConfigError):
    pass


class NotHyperbolic(ConfigError):
    pass


class OrientationReversing(ConfigError):
    pass


class OrbitEscaped(HomFloerError):
    pass


# manifold_tracer
class DeltaTooLarge(HomFloerError):
    pass


class RefinementBudgetExceeded(HomFloerError):
    pass


class ImageBeyondTrace(WindowInsufficient):
    pass


# intersection_finder / tangle
class AmbiguousMatch(HomFloerError):
    pass


class NoIntersection(WindowInsufficient):
    pass


class DifferentBranches(HomFloerError):
    pass


class TurningNotInteger(HomFloerError):
    """Discrete turning sum is not near a multiple of pi (under-refined curves)."""


# floer_complex / homology
class DSquaredNonzero(TheoremViolation):
    pass


class BoundViolated(TheoremViolation):
    pass


class TorsionFound(TheoremViolation):
    pass


class InequalityFailed(TheoremViolation):
    pass
