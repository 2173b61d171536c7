"""Exception and warning types raised across the package."""


class FunDeformError(Exception):
    """Base class for all package errors."""


class InputError(FunDeformError):
    """Invalid user input (files, indices, shapes)."""


class ParseError(InputError):
    pass


class DegenerateSimplex(InputError):
    pass


class NonManifold(InputError):
    pass


class ZeroNormal(InputError):
    pass


class ConnectivityMismatch(InputError):
    pass


class NumericalError(FunDeformError):
    """A numerical procedure failed to reach its contract."""


class ConvergenceFailure(NumericalError):
    pass


class SingularC(NumericalError):
    pass


class Infeasible(NumericalError):
    pass


class MaxIterExceeded(NumericalError):
    """Raised when an iterative solver runs out of iterations.

    The best iterate found so far is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DegenerateStep(NumericalError):
    """A symmetrization step kept inverting faces after repeated halving.

    The state reached before the failing step is attached as ``state``.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class RankDeficientWarning(UserWarning):
    """A least-squares system was rank deficient; a minimum-norm solution was used."""
