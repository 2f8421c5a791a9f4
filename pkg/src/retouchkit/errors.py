"""Exception hierarchy for retouchkit.

Three broad families, mapped onto CLI exit codes:

* ``ValidationError``  -> exit 2 (bad user input: schemas, values, op names)
* ``ServiceError``     -> exit 3 (the external completion service misbehaved)
* ``StreamError``      -> exit 4 (I/O and serialization failures)
"""


class RetouchError(Exception):
    """Base class for every error raised by this package."""


# --------------------------------------------------------------------------
# validation (exit code 2)


class ValidationError(RetouchError):
    """Invalid user-supplied input."""


class WrongSpace(ValidationError):
    """A buffer arrived in the wrong color space for the operation."""


class UnsupportedLayout(ValidationError):
    """Decoded image has a bit depth or channel layout we do not accept."""


class ValueOutOfRange(ValidationError):
    """Adjustment value outside [-100, +100] or not an integer."""


class UnknownOp(ValidationError):
    """Operation name not present in the registry."""


class SchemaError(ValidationError):
    """A document (plan, record, service reply) does not match its schema."""


class StageMismatch(ValidationError):
    """An op was referenced under a stage it does not belong to."""


class DuplicateOp(ValidationError):
    """The same op appears twice where uniqueness is required."""


class UnknownDegreeWord(ValidationError):
    """Degree word not present in the legend."""


class DegenerateSample(ValidationError):
    """Puzzle generation could not produce a usable record after resampling."""


class DimensionMismatch(ValidationError):
    """Two images that must share dimensions do not."""


class TooSmall(ValidationError):
    """Image smaller than the metric's minimum window."""


class UnresolvableTriplet(ValidationError):
    """A reasoning triplet could not be resolved to a concrete value."""


# --------------------------------------------------------------------------
# external service (exit code 3)


class ServiceError(RetouchError):
    """The external completion service failed."""


class ServiceUnavailable(ServiceError):
    """Endpoint unreachable or persistently erroring after retries."""


class RateLimited(ServiceError):
    """Service asked us to back off."""


class SchemaViolation(ServiceError):
    """Service reply failed validation even after bounded retries.

    Carries the raw reply text so callers can log it.
    """

    def __init__(self, message, raw_text=""):
        super().__init__(message)
        self.raw_text = raw_text


# --------------------------------------------------------------------------
# streams and sinks (exit code 4)


class StreamError(RetouchError):
    """I/O level failure."""


class CorruptStream(StreamError):
    """Byte stream could not be decoded as an image."""


class SerializationError(StreamError):
    """A dataset record could not be written or read back intact."""


class SinkFull(StreamError):
    """The output sink ran out of space."""


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SERVICE = 3
EXIT_IO = 4


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code of its error family."""
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, ServiceError):
        return EXIT_SERVICE
    if isinstance(exc, (StreamError, OSError)):
        return EXIT_IO
    return EXIT_VALIDATION if isinstance(exc, RetouchError) else 1
