"""
DET-LSH error hierarchy
Every error raised on purpose by the library derives from DetLshError
"""


class DetLshError(Exception):
    """Base class for library errors"""


class InvalidArgumentError(DetLshError, ValueError):
    """Argument outside the accepted domain (bad dimension, probability, shape...)"""


class UnsplittableLeafError(DetLshError):
    """Leaf has exhausted every symbol bit and must overflow"""


class FormatError(DetLshError):
    """Malformed vector file or index file"""


class InconsistentDimensionError(FormatError):
    """Vector records disagree on their dimension"""


class TruncatedFileError(FormatError):
    """File ends in the middle of a record or section"""


class MagicMismatchError(FormatError):
    """Index file does not start with the expected magic"""


class VersionMismatchError(FormatError):
    """Index file was written by an unsupported format version"""


class FingerprintMismatchError(FormatError):
    """Index file was built from a different dataset"""
