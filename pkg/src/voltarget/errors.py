"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class ConvergenceError(RuntimeError):
    """A numerical routine exhausted its budget before meeting tolerance."""


class HypothesisError(ValueError):
    """Inputs violate a hypothesis required by a formula (e.g. constant coefficients)."""


class NonpositiveIndexValue(ArithmeticError):
    """The discrete-time index gross return was nonpositive on a path."""

    def __init__(self, step, gross):
        super().__init__(f"nonpositive gross return {gross!r} at step {step}")
        self.step = step
        self.gross = gross
