"""Exception hierarchy.

Configuration problems (bad input, unknown names, inconsistent options) and
numeric failures (singular systems, blow-up, non-convergence) are kept apart
so the command line can map them to distinct exit codes.
"""


class FeptrknError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FeptrknError, ValueError):
    """Invalid or unsupported user input."""


class NumericError(FeptrknError, ArithmeticError):
    """A numerical procedure failed."""


class SingularMatrixError(NumericError):
    def __init__(self, message, rcond=0.0):
        super().__init__(message)
        self.rcond = rcond


class CollocationError(SingularMatrixError):
    """The collocation matrix F(t, h) is (numerically) singular."""

    def __init__(self, t, h, rcond, detail=""):
        t, h = float(t), float(h)
        msg = f"collocation condition violated at (t={t!r}, h={h!r}), rcond={rcond:.3e}"
        if detail:
            msg += f" [{detail}]"
        super().__init__(msg, rcond)
        self.t = t
        self.h = h


class EmbeddedConfigurationError(CollocationError):
    """The embedded sub-method cannot be built at (t, h)."""


class InfeasibleNodesError(NumericError):
    def __init__(self, message, coefficients):
        super().__init__(f"{message}; monic coefficients a_0..a_(s-1) = {list(coefficients)}")
        self.coefficients = list(coefficients)


class StartupError(NumericError):
    """The starting procedure could not produce accurate stage values."""


class BlowUpError(NumericError):
    def __init__(self, step, t):
        super().__init__(f"non-finite solution at step {step} (t={t!r})")
        self.step = step
        self.t = t


class StepSizeError(NumericError):
    """Adaptive step size fell below the minimum allowed value."""


class SingularityError(NumericError):
    """The right-hand side was evaluated at a singular point."""


class EigenvalueError(NumericError):
    def __init__(self, matrix):
        super().__init__(f"eigenvalue iteration did not converge for matrix:\n{matrix!r}")
        self.matrix = matrix


class UnsupportedMetricError(ConfigurationError):
    """An error metric needs information the problem does not provide."""
