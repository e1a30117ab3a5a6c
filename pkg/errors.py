"""
Exception hierarchy shared by every package
"""
from typing import Optional


class EdgepressError(Exception):
    """Base class for all errors raised by this project"""


class ConfigurationError(EdgepressError):
    """Shapes, dims or configuration values do not fit together"""


class PreconditionError(EdgepressError):
    """An operation was called with inputs outside its contract"""


class ParseError(EdgepressError):
    """Malformed JPEG bitstream"""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


class UnsupportedModeError(ParseError):
    """Bitstream uses a JPEG mode this decoder does not implement"""


class IngestionError(EdgepressError):
    """An image or edge-map file could not be read"""

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")


class RefusalError(EdgepressError):
    """Sidecar metadata and checkpoint disagree; nothing is written"""
