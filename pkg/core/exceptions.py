"""
Exceptions for NODAL LAB
Every numerical refusal raised by the library derives from NodalLabError
"""

from typing import Optional, Tuple


class NodalLabError(Exception):
    """Base class for all library errors"""


class DomainError(NodalLabError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class ResolutionError(DomainError):
    """
    Grid too coarse for the requested computation

    Args:
        message: What was being computed
        required: Required (n_theta, n_phi)
        actual: Supplied (n_theta, n_phi)
    """

    def __init__(
        self,
        message: str,
        required: Tuple[int, int],
        actual: Optional[Tuple[int, int]] = None
    ):
        self.required = required
        self.actual = actual
        detail = f"{message}: requires n_theta >= {required[0]}, n_phi >= {required[1]}"
        if actual is not None:
            detail += f" (got n_theta={actual[0]}, n_phi={actual[1]})"
        super().__init__(detail)


class UnsupportedDegreeError(DomainError):
    """Order or degree above a documented implementation cap"""


class UsageError(NodalLabError):
    """Invalid command-line usage"""
