"""Exception types shared across the package."""


class InvalidParams(ValueError):
    """A system parameter or policy violates a model constraint."""


class InvalidThreshold(InvalidParams):
    pass


class NoConvergence(RuntimeError):
    def __init__(self, max_iter, residual=float("nan")):
        super().__init__(
            f"no convergence after {max_iter} iterations (last step {residual:.3e})"
        )
        self.max_iter = max_iter
        self.residual = residual


class Unstable(ArithmeticError):
    """The relay data queue is not positive recurrent."""


class SingularBoundary(ArithmeticError):
    pass


class SingularChain(ArithmeticError):
    pass


class NonAbsorbing(ArithmeticError):
    pass


class ValidationFailed(AssertionError):
    def __init__(self, rows):
        self.rows = list(rows)
        super().__init__(f"{len(self.rows)} row(s) outside tolerance: {self.rows}")
