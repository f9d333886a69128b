"""Exception types shared across the package.

Every error raised on a user-facing path derives from HapflowError so the
CLI can map failures onto exit statuses in one place.
"""


class HapflowError(Exception):
    """Base class for all package errors."""


class InvalidConfig(HapflowError):
    """A run configuration field is out of range or inconsistent."""


class DegenerateSize(HapflowError):
    """An operation was asked to take a max over an empty index set (N=1)."""


class IndexOutOfRange(HapflowError):
    """A row or column index falls outside [0, N)."""


class ShapeMismatch(HapflowError):
    """Array shapes or record dimensions disagree."""


class MissingRecord(HapflowError):
    """A record stream does not cover every (index, level, tag) it must."""


class DuplicateKey(HapflowError):
    """A record stream contains the same (index, level, tag) twice."""


class ParseError(HapflowError):
    """An input file is malformed; message carries the file position."""


class PositiveSimilarity(HapflowError):
    """A similarity value is > 0; message carries the offending position."""


class DimensionMismatch(HapflowError):
    """Input data dimensions disagree (point arity, matrix size, labels)."""


class MapperFailure(HapflowError):
    """A mapper raised; message carries the input record key and cause."""


class ReducerFailure(HapflowError):
    """A reducer raised; message carries the intermediate key and cause."""


class SpillIOFailure(HapflowError):
    """Reading or writing a spill file failed."""


class InsufficientTimings(HapflowError):
    """A scaling report needs at least two timing entries."""


class MissingAux(HapflowError):
    """A reducer needed a routed auxiliary scalar that never arrived."""


class InvalidRange(HapflowError):
    """A preference range or constant violates the non-positive bound."""


class LengthMismatch(HapflowError):
    """Two per-point sequences that must align have different lengths."""
