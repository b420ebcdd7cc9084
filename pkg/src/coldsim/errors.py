"""Exception types shared across the library."""


class InvalidParameterError(ValueError):
    """A parameter violates an operation's precondition."""


class InvalidInputError(ValueError):
    """An input array is malformed (non-finite, wrong shape, ...)."""


class ContractMismatchError(ValueError):
    """A compressor lacks the contract an algorithm or validator needs."""


class ScalingViolationError(RuntimeError):
    """The scaled compressor input left the unit ball.

    Carries the iteration index at which the violation happened; it
    signals that the scaling schedule's initial value is too small.
    """

    def __init__(self, iteration: int, message: str = ""):
        self.iteration = iteration
        super().__init__(message or f"scaled innovation left the unit ball at iteration {iteration}")


class DivergenceError(RuntimeError):
    """Iterates blew up past the divergence guard."""

    def __init__(self, iteration: int, message: str = ""):
        self.iteration = iteration
        super().__init__(message or f"iterates diverged at iteration {iteration}")


class NoConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class ConfigError(ValueError):
    """An experiment config failed to parse; collects every error found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
