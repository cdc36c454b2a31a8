"""Exception hierarchy shared by the engine and the command line."""


class ODLError(Exception):
    """Base class for all engine errors."""


class DataError(ODLError, ValueError):
    """Malformed input: dimension mismatch, non-finite values, schema drift."""


class NumericalError(ODLError, ArithmeticError):
    """Solver divergence, NaN propagation and similar numeric failures."""


class CheckpointError(ODLError):
    """Unreadable, truncated or corrupted checkpoint file."""


class CheckpointVersionError(CheckpointError):
    """Magic bytes or format version do not match this reader."""
