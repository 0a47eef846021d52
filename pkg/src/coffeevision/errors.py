"""Shared exception base.

Every domain error raised by this package derives from CoffeeVisionError so
callers (and the CLI) can distinguish bad data from programming bugs.
"""


class CoffeeVisionError(Exception):
    """Base class for all domain errors."""
