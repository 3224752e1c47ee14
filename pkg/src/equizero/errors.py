"""Exception hierarchy shared by all modules."""


class EquizeroError(Exception):
    """Base class for errors raised by equizero."""


class UnimplementedDomainError(EquizeroError, NotImplementedError):
    pass


class RegionMismatchError(EquizeroError, ValueError):
    pass


class InsufficientResolutionError(EquizeroError, ValueError):
    """Quadrature rule cannot integrate the requested degree exactly."""

    def __init__(self, message, min_resolution):
        super().__init__(f"{message} (minimum resolution {min_resolution})")
        self.min_resolution = min_resolution


class CapacityError(EquizeroError, OverflowError):
    pass


class ConditioningError(EquizeroError, ArithmeticError):
    """Moment matrix is not numerically positive definite."""

    def __init__(self, message, smallest_eigenvalue=None):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class DegenerateSampleError(EquizeroError, ValueError):
    pass


class StepError(EquizeroError, ValueError):
    pass


class SeriesDomainError(EquizeroError, ValueError):
    pass


class ConfigError(EquizeroError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
