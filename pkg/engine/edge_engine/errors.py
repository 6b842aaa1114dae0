"""
Exception hierarchy for the edge placement engine.
"""

from typing import List, Optional


class EdgePlacementError(Exception):
    """Base exception for all engine errors."""
    pass


class TraceFormatError(EdgePlacementError):
    """Raised when a trace stream cannot be read at all (encoding, header, mixed timestamps)."""
    pass


class GeometryError(EdgePlacementError):
    """Raised for geometric operations on unusable input ("no points", "zero total weight")."""
    pass


class ZeroPeakError(EdgePlacementError):
    """Raised when an efficiency is requested for a series whose peak is zero."""

    def __init__(self, message: str = "zero peak"):
        super().__init__(message)


class UndefinedMaximumError(EdgePlacementError):
    """Raised when randomization is requested over all-zero loads."""

    def __init__(self, message: str = "undefined maximum"):
        super().__init__(message)


class NoNonzeroPeaksError(EdgePlacementError):
    """Raised when a peak distribution is requested but no station carries traffic."""

    def __init__(self, message: str = "no stations with nonzero peak"):
        super().__init__(message)


class ConfigError(EdgePlacementError):
    """Raised when a run or synth configuration is invalid.

    Attributes:
        fields: Names of the offending configuration fields.
    """

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        super().__init__(message)
        self.fields = fields or []
