"""Exception types shared across the package."""


class ForceflowError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ForceflowError, ValueError):
    """A parameter is out of its documented range or inconsistent."""


class DataError(ForceflowError, ValueError):
    """Input data violates a structural precondition."""


class IdxFormatError(DataError):
    """An IDX file is malformed; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class NumericalError(ForceflowError, ArithmeticError):
    """A computation degenerated: underflow, divergence, or non-finite values."""


class DisconnectedGraphError(DataError):
    """The graph has more than one connected component."""


class PipelineError(ForceflowError, RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage
