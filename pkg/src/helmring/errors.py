"""Exception types shared across the package."""


class HelmringError(Exception):
    """Base class for all package-specific errors."""


class DomainError(HelmringError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class StepResolutionError(HelmringError):
    """An ODE march was requested with steps too coarse for the local wavelength."""


class NonvanishingFieldError(HelmringError):
    """|psi| collapsed along a trajectory that provably has no zeros (solver bug)."""


class ImpedanceBlowupError(HelmringError):
    """The marched impedance defect diverged (Riccati instability signal)."""


class IllConditionedRuleError(HelmringError):
    """A fitted quadrature rule produced unusable weights."""


class BudgetExceededError(HelmringError):
    """A study refused to run because the finest level exceeds the wall-time budget."""
