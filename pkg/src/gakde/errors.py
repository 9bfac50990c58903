class GakdeError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(GakdeError, ValueError):
    pass


class DegenerateFitnessError(GakdeError):
    """Every (test row, gene) pair is excluded, so the CV term is undefined."""


class ZeroSpreadError(GakdeError):
    """Neither the chromosome nor the data has any spread to scale a bandwidth from."""


class UnsupportedDimensionError(GakdeError):
    pass


class DataError(GakdeError):
    """Input file content could not be turned into a valid sample."""
