"""Exception taxonomy shared by all nxseg modules."""


class NxsegError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(NxsegError):
    """Operand dimensions are inconsistent with the operation's contract."""


class ConfigError(NxsegError):
    """A configuration value is out of its legal range."""


class FormatError(NxsegError):
    """A file does not conform to the expected on-disk format."""


class DomainError(NxsegError):
    """Input values violate a mathematical precondition (e.g. negativity)."""


class TrainingError(NxsegError):
    """Optimization failed (non-finite loss/gradient, degenerate batch)."""


class SamplingError(NxsegError):
    """A data pool cannot satisfy the requested sampling constraints."""
