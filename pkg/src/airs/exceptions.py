"""Exception types raised by the solvers and the instance loader."""


class InstanceError(ValueError):
    """An instance, cost function or scheme violates its invariants."""


class ConvergenceError(RuntimeError):
    """An iterative routine did not reach its tolerance.

    The last iterate, when one exists, is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class UnboundedResponseError(ArithmeticError):
    """A price exceeds the terminal marginal cost, so the best response is infinite."""


class NotAnEquilibriumError(ValueError):
    """An action profile fails the equilibrium first-order conditions."""
