"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the interval on which an operation is defined."""


class SingularFieldError(ValueError):
    """A field direction was requested for a vanishing field."""


class ConstructionError(ValueError):
    """Invalid parameters for a pulse segment or program."""


class FitError(ValueError):
    """A least-squares fit is degenerate."""


class UndefinedPhaseError(ValueError):
    """The in-plane Bloch component is zero, so no phase can be read off."""


class IntegrationError(RuntimeError):
    """Time stepping became unstable; retry with a smaller ``dt``."""
