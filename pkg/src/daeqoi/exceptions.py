"""Exception hierarchy shared across the package."""


class DaeqoiError(Exception):
    """Base class for all errors raised by this package."""


class SingularMatrixError(DaeqoiError):
    """A pivot fell below the configured floor during an LU factorization.

    For DAE work this usually signals a violated index assumption, e.g. a
    singular g_z on a problem declared index-1.
    """


class DimensionMismatchError(DaeqoiError):
    """Array shapes are inconsistent with the declared problem dimensions."""


class NonFiniteIntegrandError(DaeqoiError):
    """An integrand evaluated to NaN or infinity inside a quadrature rule."""


class NonFiniteEvaluationError(DaeqoiError):
    """A function evaluated to NaN or infinity during finite differencing."""


class OutOfDomainError(DaeqoiError):
    """A time outside the trajectory's grid was requested."""


class NewtonDivergedError(DaeqoiError):
    """The per-step Newton iteration exhausted its iteration budget."""

    def __init__(self, step, time, residual):
        self.step = step
        self.time = time
        self.residual = residual
        super().__init__(
            f"Newton did not converge at step {step} (t={time:.6g}), "
            f"residual {residual:.3e}; the step size may be too large or an "
            f"index assumption violated"
        )


class StepSizeUnderflowError(DaeqoiError):
    """An adaptive integrator's step size underflowed (excess stiffness)."""


class ToleranceUnreachableError(DaeqoiError):
    """An adaptive integrator could not meet the requested tolerances."""


class NoAnalyticSolutionError(DaeqoiError):
    """The problem does not carry an analytic solution."""


class ZeroReferenceError(DaeqoiError):
    """Effectivity is undefined because the reference error is zero/absent."""


class PathMismatchError(DaeqoiError):
    """An adjoint solution is incompatible with the requested estimate."""


class PartitionMismatchError(DaeqoiError):
    """The differential variables cannot be split into equal parts."""


class UnknownProblemError(DaeqoiError):
    """No built-in problem is registered under the requested name."""


class InvalidParamsError(DaeqoiError):
    """Problem parameters fail validation."""


class InvalidGridError(DaeqoiError):
    """A spatial or temporal grid specification is invalid."""


class ConfigError(DaeqoiError):
    """An experiment configuration file is invalid."""


class OutputError(DaeqoiError):
    """A result table could not be rendered or written."""
