"""Exception taxonomy shared across the toolkit."""


class SlicerError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(SlicerError):
    """Degenerate or inconsistent tensor shape."""


class NonFiniteError(SlicerError):
    """A NaN or Inf was encountered where finite values are required."""


class TensorFormatError(SlicerError):
    """Malformed or truncated .tns file."""


class ConfigError(SlicerError):
    """Invalid codec, channel, planner, or simulator configuration."""


class StreamFormatError(SlicerError):
    """Malformed .sif bitstream: bad magic, version, truncation, or CRC."""


class CorruptStreamError(StreamFormatError):
    """Structurally invalid payload in an otherwise well-framed stream."""


class ProfileError(SlicerError):
    """Missing or inconsistent model-profile data."""


class InfeasiblePlanError(SlicerError):
    """No feasible configuration exists for the given constraints."""
