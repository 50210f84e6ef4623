"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments that break its preconditions."""


class ParseError(ValueError):
    """Malformed mesh file. ``line`` is 1-based, or None when not line-specific."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericOverflowError(ArithmeticError):
    """A non-finite value appeared during evaluation."""

    def __init__(self, message, node=None):
        self.node = node
        super().__init__(message)


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss.

    ``checkpoint`` holds the state from the last epoch that finished cleanly
    (None when the first epoch already failed).
    """

    def __init__(self, message, checkpoint=None, epoch=None):
        self.checkpoint = checkpoint
        self.epoch = epoch
        super().__init__(message)


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint file."""
