"""Exception taxonomy shared across modules.

The CLI maps these onto exit codes: ConfigError/DataError -> 2,
NumericalError -> 3; anything argparse-shaped exits 1.
"""


class ChdzdtError(Exception):
    """Base class for all package errors."""


class ConfigError(ChdzdtError):
    """Invalid configuration: bad vocab spec, malformed rules, config mismatch."""


class DataError(ChdzdtError):
    """Unreadable or malformed input data."""


class CorruptCheckpointError(DataError):
    """Checkpoint failed magic/version/manifest validation; nothing was loaded."""


class NumericalError(ChdzdtError):
    """Non-finite loss or other numerical failure; carries step diagnostics."""
