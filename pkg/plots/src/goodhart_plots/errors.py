"""Exception hierarchy for the figure package."""


class PlotsError(Exception):
    """Base class for every error this package raises deliberately."""


class SchemaError(PlotsError):
    """An input file is missing, empty, or its columns do not match."""
