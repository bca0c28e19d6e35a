"""Exception taxonomy shared across the package.

ConfigError covers bad configuration and usage (CLI exit code 1); DataError
covers malformed or inconsistent data at run time (CLI exit code 2).
"""

__all__ = ["ConfigError", "DataError"]


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass
