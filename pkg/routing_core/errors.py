"""
Exceptions raised by the routing core and the solvers built on it.
"""

from typing import Optional


class TollgridError(Exception):
    """
    Base class of every tollgrid error.
    """


class NetworkParseError(TollgridError, ValueError):
    """
    The network document could not be read or decoded.
    """


class NetworkValidationError(TollgridError, ValueError):
    """
    The network document decoded but violates a Link/OdPair/Network invariant.
    """

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class UnreachableDestinationError(NetworkValidationError):
    """
    Some O/D pair has no directed path from its origin to its destination.
    """


class PathEnumerationOverflow(TollgridError):
    """
    An O/D pair has more simple paths than the enumeration cap allows.
    """


class DimensionMismatchError(TollgridError, ValueError):
    """
    A flow or price vector does not match the network/path-set dimensions.
    """


class NegativeFlowError(TollgridError, ValueError):
    """
    A delay was requested at a negative flow.
    """


class InfeasibleFlowError(TollgridError, ValueError):
    """
    A path flow violates demand conservation or nonnegativity.
    """

    def __init__(self, message: str, max_residual: float = float("nan")):
        super().__init__(message)
        self.max_residual = max_residual


class HeterogeneousNetworkError(TollgridError, ValueError):
    """
    An operation that needs a homogeneous degree of capacity asymmetry got a heterogeneous network.
    """


class InvalidPriceError(TollgridError, ValueError):
    """
    A price vector holds a negative or non-finite entry.
    """
