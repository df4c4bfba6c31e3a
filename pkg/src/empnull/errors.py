"""Exception hierarchy shared by the library and the CLI."""


class EmpnullError(Exception):
    """Base class for all library errors."""


class InputError(EmpnullError, ValueError):
    """Malformed or empty input data."""


class NonFiniteObservationError(InputError):
    def __init__(self, feature_id, value):
        self.feature_id = feature_id
        self.value = value
        super().__init__(f"feature {feature_id!r} has non-finite observation {value!r}")


class DomainError(EmpnullError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NullFitError(EmpnullError):
    """Base class for failures of the empirical null fit."""


class InsufficientDataError(NullFitError):
    pass


class DegenerateIntervalError(NullFitError):
    pass


class ConvergenceError(NullFitError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BenefitError(EmpnullError):
    def __init__(self, d1, cause):
        self.d1 = d1
        self.cause = cause
        super().__init__(f"null refit failed at d1={d1}: {cause}")
