"""Exception types raised by the toolkit."""


class VinemarkError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(VinemarkError, ValueError):
    """A parameter is outside its legal range."""


class WindowTooLargeError(InvalidParameterError):
    """A sliding window does not fit inside the image."""


class EmptyTruthError(VinemarkError):
    """The ground-truth mask contains no positive pixel."""


class MultipleBudsError(VinemarkError):
    """The ground-truth mask contains more than one connected region."""


class EmptyComponentError(VinemarkError):
    """An operation requiring pixels received an empty pixel set."""


class InconsistentInputError(VinemarkError):
    """Two inputs that must agree (e.g. on dimensions) do not."""


class InconsistentConfigError(VinemarkError):
    """Results produced under different configurations were mixed."""


class UndefinedCountError(VinemarkError):
    """A count estimate is undefined for the given rates."""


class OracleSizeError(VinemarkError):
    """Input exceeds the size limit of the brute-force oracle."""


class ManifestError(VinemarkError):
    """A dataset manifest is missing or malformed."""
