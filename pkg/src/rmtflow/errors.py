"""Exception types shared across the package."""


class RmtFlowError(Exception):
    """Base class for all package-specific errors."""


class DomainError(RmtFlowError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NotHermitian(RmtFlowError, ValueError):
    """Matrix fails the Hermiticity tolerance."""


class NoConvergence(RmtFlowError, RuntimeError):
    """Iterative eigensolver failed to converge."""


class ChamberMismatch(RmtFlowError, ValueError):
    """Point does not lie in the Weyl chamber required by the operation."""


class UnsupportedDimension(RmtFlowError, ValueError):
    """Dimension outside the supported desk-scale range."""


class SpecError(RmtFlowError, ValueError):
    """Inconsistent process/ensemble specification."""


class StepCollapse(RmtFlowError, RuntimeError):
    """SDE step size underflowed during rejection-halving."""


class TooFewSamples(RmtFlowError, ValueError):
    """Not enough samples for a statistical test."""


class ZeroWeight(RmtFlowError, ValueError):
    """Importance weight undefined (nonpositive coordinate at the horizon)."""
