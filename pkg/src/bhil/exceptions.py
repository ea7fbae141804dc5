"""
Exceptions for Borehole Imaging Lab

Each class carries the process exit code the CLI reports for it.
"""


class BHILError(Exception):
    """Base exception for all lab errors"""

    exit_code = 1

    @property
    def kind(self) -> str:
        return type(self).__name__


class ConfigError(BHILError):
    """Raised when a scenario or a constructor argument is invalid"""

    exit_code = 2


class AssumptionViolation(ConfigError):
    """Raised when an input violates one of the modeling assumptions"""

    def __init__(self, assumption: str, detail: str) -> None:
        self.assumption = assumption
        self.detail = detail
        super().__init__(f"{assumption}: {detail}")


class NumericalError(BHILError):
    """Raised when a numerical stage cannot produce a finite result"""

    exit_code = 3


class ShapeMismatchError(NumericalError):
    """Raised when data axes do not match the acquisition geometry"""

    pass


class GridFormatError(BHILError):
    """Raised when a BHIL grid file is malformed or cannot be written"""

    exit_code = 4
