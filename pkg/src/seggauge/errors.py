"""Exception types shared across the package."""


class SegGaugeError(Exception):
    """Base class for all package errors."""


class InputError(SegGaugeError):
    """Invalid argument values (empty seed sets, out-of-range data, bad files)."""


class ShapeError(InputError):
    """Mismatched grid dimensions."""


class ProtocolError(SegGaugeError):
    """An action that is not legal for the session's protocol or state."""


class StaleRevisionError(SegGaugeError):
    """Optimistic-concurrency conflict: the caller acted on an outdated revision."""
