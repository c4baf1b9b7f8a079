"""Exception hierarchy.

Errors fall into three families so the CLI can map them to exit codes:
validation problems (bad inputs), solver failures (root finding could not
produce an answer) and simulation diagnostics (a run finished but its
output cannot be trusted).
"""


class WeakGarchError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(WeakGarchError, ValueError):
    pass


class SolverError(WeakGarchError, ArithmeticError):
    pass


class SimulationError(WeakGarchError, RuntimeError):
    pass


# validation
class StationarityViolation(ValidationError):
    pass


class NonPositiveOmega(ValidationError):
    pass


class NegativeCoefficient(ValidationError):
    pass


class NonPositiveParameter(ValidationError):
    pass


class InfiniteKurtosis(ValidationError):
    pass


class InvalidStep(ValidationError):
    pass


class NotIntegerMultiple(ValidationError):
    pass


class KurtosisOutOfRange(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class HorizonMismatch(ValidationError):
    pass


class PriceOutOfBounds(ValidationError):
    pass


class InsufficientPaths(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class DegenerateAlpha(ValidationError):
    pass


# solver
class NoValidBetaRoot(SolverError):
    pass


class BetaQuadraticInfeasible(SolverError):
    pass


class NoSolutionInBracket(SolverError):
    pass


class ConvergenceFailure(SolverError):
    pass


class NoConvergence(SolverError):
    pass


# simulation
class NegativeVarianceExplosion(SimulationError):
    pass


class InvalidKurtosisPath(SimulationError):
    pass


class InconsistentInput(UserWarning):
    """Parameters and kurtosis do not lie on the weak-GARCH manifold.

    Emitted through :mod:`warnings`; real estimated parameters never lie on
    the manifold exactly, so this is advisory.
    """
