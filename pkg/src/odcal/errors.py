"""Shared exception types."""


class ParseError(ValueError):
    """Malformed input file (CSV survey, target series, params table)."""


class ConfigError(ValueError):
    """Invalid run configuration; maps to CLI exit code 2."""
