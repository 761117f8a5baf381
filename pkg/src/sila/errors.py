class SilaError(Exception):
    """Base class for all library errors."""


class DataError(SilaError):
    """Invalid or inconsistent input data."""


class ModelFileError(SilaError):
    """Malformed or unsupported model/trajectory file."""
