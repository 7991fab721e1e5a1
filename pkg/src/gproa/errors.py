"""Exception hierarchy shared by all gproa modules."""


class GproaError(Exception):
    """Base class for all errors raised by gproa."""


class ContractViolation(GproaError, ValueError):
    """An argument violates a documented precondition (shape, range, ...)."""


class ConfigError(GproaError, ValueError):
    """A configuration file is malformed or violates a model invariant."""


# dae-core
class RegularityViolation(GproaError):
    """The algebraic Jacobian dg/dy is singular."""


class AlgebraicSolveFailure(GproaError):
    """Newton iteration on g(x, y) = 0 did not converge."""


class ModelInfeasible(GproaError):
    """No equilibrium could be found for a model configuration."""


# trajectory
class TrajectoryAborted(GproaError):
    """The algebraic solve failed while integrating a trajectory."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class TrajectoryDiverged(GproaError):
    """The integrated state became non-finite."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NotStableSample(GproaError):
    """A Lyapunov estimate was requested for a non-converged trajectory."""


# online GP
class IllConditionedKernel(GproaError):
    """Kernel factorization or a site update hit a non-positive pivot."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class PosteriorInconsistency(GproaError):
    """Predicted posterior variance is negative beyond rounding slack."""


# assessment
class DomainExhausted(GproaError):
    """Every grid point of the sampling domain has been excluded."""


class StepFailed(GproaError):
    """An assessment step ran out of resample retries."""


class UnstableEquilibrium(GproaError):
    """The reduced Jacobian at the equilibrium is not Hurwitz."""
