"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, RefusalError -> 3.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError):
    """Invalid configuration, command-line arguments, or file contents."""


class RefusalError(ToolkitError):
    """An operation refused its inputs (precondition violation or a
    numerical condition that would produce meaningless output)."""


class GridMismatchError(RefusalError):
    """Two volumes that must share a grid (or spacing) do not."""
