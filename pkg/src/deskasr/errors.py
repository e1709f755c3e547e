"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so commands can be scripted:
config problems exit 2, data problems exit 3, any other failure exits 4.
"""


class DeskAsrError(Exception):
    """Base class for all package errors."""


class ConfigError(DeskAsrError):
    """Invalid configuration value or inconsistent option combination."""

    exit_code = 2


class DataError(DeskAsrError):
    """Malformed or missing input data (manifests, audio, token files)."""

    exit_code = 3


class ShapeError(DeskAsrError):
    """Tensor dimension mismatch."""

    exit_code = 4


class DomainError(DeskAsrError):
    """Numeric domain violation (log of non-positive, non-finite result)."""

    exit_code = 4


class ContractError(DeskAsrError):
    """An operation was called outside its contract (e.g. backward twice)."""

    exit_code = 4
