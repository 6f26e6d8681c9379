"""Exception hierarchy shared by all modules.

Exit-code mapping (used by the CLI):
    ConfigError                       -> 1
    InputError, SchemaError,
    CacheInvalidError, IndexFormatError -> 2
    BackendError and subclasses       -> 3
    EvaluationError, TruthError       -> 4
"""


class LinkageError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(LinkageError):
    """Invalid configuration (bad flag value, impossible size, ...)."""


class InputError(LinkageError):
    """I/O problem: missing file, malformed row, unreadable data."""


class SchemaError(InputError):
    """A required column or key is absent from the input file."""


class CacheInvalidError(InputError):
    """Embedding cache file is corrupt, truncated, or incompatible."""


class IndexFormatError(InputError):
    """Persisted sparse index file is corrupt or has wrong version."""


class BackendError(LinkageError):
    """Model backend failed or violated its contract."""


class BackendUnavailableError(BackendError):
    """Gateway could not be reached (after retries)."""


class ProtocolError(BackendError):
    """Gateway reply violated the wire protocol (id mismatch, shape, range)."""


class SelectParseError(BackendError):
    """The /select reply was not a valid in-range candidate index."""


class EvaluationError(LinkageError):
    """Evaluation protocol violation (query without ground truth, ...)."""


class TruthError(EvaluationError):
    """Ground-truth file could not be resolved against the corpus."""
