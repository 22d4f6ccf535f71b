"""Exception hierarchy shared across the package."""


class RandEulerError(Exception):
    """Base class for all package errors."""


class DimensionError(RandEulerError, ValueError):
    pass


class DomainError(RandEulerError, ValueError):
    pass


class ConfigError(RandEulerError, ValueError):
    """Malformed or out-of-range experiment configuration."""


class PreconditionError(RandEulerError):
    """A numerical precondition of a scheme (step-size restriction, noise class) fails."""


class DivergenceError(RandEulerError, ArithmeticError):
    def __init__(self, step, path=None, message=None):
        self.step = step
        self.path = path
        where = f"step {step}" if path is None else f"step {step} of path {path}"
        super().__init__(message or f"non-finite state at {where}")


class NonConvergenceError(RandEulerError, ArithmeticError):
    def __init__(self, step, iterations, path=None):
        self.step = step
        self.iterations = iterations
        self.path = path
        super().__init__(
            f"fixed-point iteration did not converge at step {step} after "
            f"{iterations} iterations; declared K/L metadata is probably inconsistent"
        )


class ContractError(RandEulerError, AssertionError):
    """An internal invariant was violated (a bug, not bad input)."""


class ReferenceAccuracyError(RandEulerError, ArithmeticError):
    pass


class SingularityError(RandEulerError, ZeroDivisionError):
    pass


class BoundViolation(RandEulerError):
    """An a-priori bound that must hold was observed to fail."""
