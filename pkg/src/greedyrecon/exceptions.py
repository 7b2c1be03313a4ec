"""Shared exception types."""


class NumericalError(RuntimeError):
    """A linear or nonlinear solve broke down (non-convergence, singular
    factor, or non-finite values)."""


class GreedyFailure(RuntimeError):
    """Every candidate subproblem of a greedy sweep failed.

    Carries the partial run (if any) on the ``partial`` attribute.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
