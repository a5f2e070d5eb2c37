"""Exception hierarchy shared by every module."""


class FokkerLabError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(FokkerLabError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class NumericError(FokkerLabError, ArithmeticError):
    """Non-finite input or loss of a numerical invariant."""


class DegenerateDensityError(FokkerLabError, ValueError):
    """A density has zero mass or is below the floor where it must not be."""


class SupportError(FokkerLabError, ValueError):
    """A grid or density lives on the wrong support."""


class AbsoluteContinuityError(FokkerLabError, ValueError):
    """p is not absolutely continuous with respect to q on the shared grid."""


class PreconditionError(FokkerLabError, ValueError):
    """A documented precondition of an operation does not hold."""


class SolverError(FokkerLabError, RuntimeError):
    """The Fokker-Planck integrator failed.

    ``step_index`` is filled in by :func:`fokkerlab.fpsolver.solve` when the
    failure happens inside a multi-step solve.
    """

    def __init__(self, message, step_index=None):
        if step_index is not None:
            message = f"step {step_index}: {message}"
        super().__init__(message)
        self.step_index = step_index


class PositivityError(SolverError):
    """A solver step produced values below the allowed negative tolerance."""


class BandwidthError(FokkerLabError, ValueError):
    """KDE bandwidth cannot be chosen for a degenerate ensemble."""


class SampleSizeError(FokkerLabError, ValueError):
    """Too few particles for the requested estimator."""


class BlowUpError(FokkerLabError, RuntimeError):
    """A simulated particle diverged."""

    def __init__(self, message, particle_index=None):
        super().__init__(message)
        self.particle_index = particle_index


class UnsupportedModelError(FokkerLabError, ValueError):
    """The model lacks a capability (e.g. a closed-form score) the check needs."""


class ConfigError(FokkerLabError, ValueError):
    """Invalid run configuration; the message names the offending field."""
