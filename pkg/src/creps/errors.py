"""Exception types shared across the package.

File-format failures carry a stable ``code`` string so callers (and the CLI)
can dispatch without parsing messages.
"""


class FormatError(Exception):
    """Malformed or unsupported on-disk data."""

    code = "format"


class BadMagicError(FormatError):
    code = "bad-magic"


class TruncatedFileError(FormatError):
    code = "truncated"


class DuplicateNameError(FormatError):
    code = "duplicate-name"


class LengthMismatchError(FormatError):
    code = "length-mismatch"


class ConfigError(FormatError):
    """Config document rejected: parse failure, unknown key, or invariant."""

    code = "config"


class NumericError(RuntimeError):
    """Non-finite values or a diverged computation; maps to CLI exit 3."""


class MemoryBudgetError(MemoryError):
    """Predicted activation memory exceeds the configured budget."""
