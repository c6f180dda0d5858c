"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: usage-type errors exit 1, file-format
errors exit 2, numeric failures exit 3.
"""


class CassiError(Exception):
    """Base class for all errors raised by cassikit."""

    exit_code = 1


class ShapeError(CassiError, ValueError):
    pass


class ParameterError(CassiError, ValueError):
    pass


class ModeError(ParameterError):
    """Unfolding mode outside {1, 2, 3}."""


class CapacityError(CassiError, MemoryError):
    pass


class ProvenanceError(CassiError, ValueError):
    pass


class NumericError(CassiError, ArithmeticError):
    exit_code = 3


class DivergenceError(NumericError):
    def __init__(self, stage, what="iterate"):
        super().__init__(f"non-finite {what} at stage {stage}")
        self.stage = stage


class FormatError(CassiError):
    exit_code = 2

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
