"""Shared exception types.

ConfigError marks bad run configuration (CLI exit code 2); ValueError and
RuntimeError mark contract misuse by calling code; FloatingPointError (builtin)
marks non-finite numerics that must not propagate silently.
"""


class ConfigError(ValueError):
    """A run configuration field is missing, malformed, or out of range."""
