"""Exception types shared across the package."""


class TxidError(Exception):
    """Base class for all package errors."""


class DegenerateFit(TxidError):
    """Fit is underdetermined or produced non-physical parameters."""


class ParseError(TxidError):
    """Malformed input file. Carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicatePoint(TxidError):
    """Repeated (device_id, r_in) pair in a measurement file."""


class ZeroSignal(TxidError):
    """Operation requires at least one nonzero sample."""


class TooShort(TxidError):
    """Signal shorter than the analysis window."""


class ShapeError(TxidError):
    """Tensor or layer-chain shape mismatch."""


class IndexOutOfRange(TxidError):
    """Symbol index outside the constellation."""


class RejectionOverflow(TxidError):
    """Truncated sampling failed to produce an in-window draw."""


class NonFiniteLoss(TxidError):
    """Training loss became NaN or infinite."""
