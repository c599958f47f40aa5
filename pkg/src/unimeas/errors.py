"""Exception hierarchy.

Every domain failure raises a subclass of :class:`UnimeasError`; the CLI maps
these to exit code 1.
"""


class UnimeasError(Exception):
    """Base class for physics/precondition failures."""


class LayoutError(UnimeasError, ValueError):
    """Unknown, duplicate or mismatched subsystem labels or dimensions."""


class NormalizationError(UnimeasError, ValueError):
    pass


class ZeroProbabilityError(UnimeasError):
    """Conditioning on an outcome whose probability is below threshold."""


class NotUnitaryError(UnimeasError, ValueError):
    pass


class InsufficientCorrelationError(UnimeasError):
    """The designated environment cluster has no correlation left to spend."""


class PatternViolationError(UnimeasError):
    """Subsystems expected to be perfectly correlated are not."""


class FineGrainingError(UnimeasError):
    """Amplitude ratios do not match the requested branch counts."""


class CompletenessError(UnimeasError):
    """A Kraus set violates sum_m M_m^dagger M_m = I."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Kraus completeness violated: residual {residual:.3e}")


class StateSizeError(UnimeasError):
    pass


class UncorrectedWarning(UserWarning):
    """Correction step ran on an environment without the correlated pattern."""
