"""Exception types shared across the package."""


class BDFError(Exception):
    """Base class for all package errors."""


class InvalidParameter(BDFError, ValueError):
    pass


class NoConvergence(BDFError, RuntimeError):
    """Raised by iterative solvers; ``history`` holds the residual trace."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class DegenerateGrid(BDFError, ValueError):
    pass


class RepresentationMismatch(BDFError, ValueError):
    pass


class CutoffExceedsGrid(BDFError, ValueError):
    pass


class TableRange(BDFError, ValueError):
    pass


class GridMismatch(BDFError, ValueError):
    pass


class UnnormalizedInput(BDFError, ValueError):
    pass


class SignFlip(BDFError, RuntimeError):
    pass


class ResolutionInsufficient(BDFError, ValueError):
    pass


class TooLargeGrid(BDFError, ValueError):
    pass


class NotAProjector(BDFError, ValueError):
    pass


class NotInTangentSpace(BDFError, ValueError):
    pass


class NotCSymmetric(BDFError, ValueError):
    pass


class ClusterAmbiguous(BDFError, ValueError):
    pass


class CacheMismatch(BDFError, ValueError):
    pass


class ParseError(BDFError, ValueError):
    pass


class ValidationError(BDFError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
