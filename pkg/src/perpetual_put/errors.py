"""Exception hierarchy shared by all solver modules."""


class PerpetualPutError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteError(PerpetualPutError, ArithmeticError):
    """An integrand or right-hand side produced NaN or infinity."""


class BudgetError(PerpetualPutError, RuntimeError):
    """An iterative routine ran out of iterations/subdivisions before meeting its tolerance."""


class NoBracketError(PerpetualPutError, ValueError):
    """Root-finding endpoints do not straddle zero."""


class DomainError(PerpetualPutError, ValueError):
    """Argument outside the admissible domain of a function."""


class ModelInvalidError(PerpetualPutError, ValueError):
    """Volatility model or market parameters fail the admissibility checks."""


class GridTooCoarseError(PerpetualPutError, ValueError):
    """Finite-difference stencil requested on a grid that is too coarse or outside the continuation region."""


class UnsupportedFamilyError(PerpetualPutError, ValueError):
    """No first-order expansion is available for the requested model family."""
