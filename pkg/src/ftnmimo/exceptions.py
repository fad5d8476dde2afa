"""Exception hierarchy for ftnmimo."""


class FTNError(Exception):
    """Base class for all errors raised by this package."""


class MazoRegion(FTNError, ValueError):
    """Requested delta * (1 + beta) < 1; capacity formulas are not defined there."""


class IllConditioned(FTNError, ArithmeticError):
    """Gram matrix too close to singular to invert reliably."""


class NoPositiveGain(FTNError, ValueError):
    """Waterfilling was asked to allocate power over all-zero gains."""


class NonPositiveWeight(FTNError, ValueError):
    """A power-constraint weight was zero or negative."""


class NotPSD(FTNError, ValueError):
    """A covariance matrix has a materially negative eigenvalue."""


class DimensionMismatch(FTNError, ValueError):
    pass


class DimensionCap(FTNError, ValueError):
    """Dense block algebra would exceed the configured size cap."""


class ParseError(FTNError, ValueError):
    pass


class SpectrumZero(FTNError, ArithmeticError):
    """Folded spectrum vanishes at an interior grid point."""


class GridTooCoarse(FTNError, ArithmeticError):
    """Refining the frequency grid moved the capacity by more than the tolerance."""


class NotConverged(FTNError, RuntimeError):
    """Iterative solver hit its iteration cap.

    The best iterate found is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
