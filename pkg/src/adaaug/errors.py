"""Exception taxonomy shared across the package.

Builtin IndexError / FileNotFoundError are raised where they are the natural
fit (label out of range, missing files); everything else funnels through the
classes below so callers can distinguish caller bugs (ContractError),
bad setup (ConfigurationError) and bad bytes on disk (DataFormatError).
"""


class ContractError(ValueError):
    """A documented precondition or invariant was violated by the caller."""


class ShapeError(ContractError):
    """Array dimensions incompatible; the message names both shapes."""


class RangeError(ContractError):
    """A schedule or loop index fell outside its documented range."""


class ConfigurationError(ValueError):
    """Inconsistent construction-time or config-file values."""


class DataFormatError(ValueError):
    """On-disk bytes do not match the expected layout; names the offset."""


class CheckpointError(DataFormatError):
    """Checkpoint container is corrupt or does not match the model."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but the quantity is undefined on it."""
