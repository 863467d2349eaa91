"""Exception types shared across the package.

CLI mapping: ``LafError`` (and subclasses) exit with code 1, ``OSError``
with code 2.
"""


class LafError(Exception):
    """Base class for all validation and algorithm failures."""


class ValidationError(LafError):
    """Input data or configuration violates a documented invariant."""


class CorpusFormatError(ValidationError):
    """A corpus / checkpoint file is malformed; message names the location."""


class ConfigError(ValidationError):
    """A config document has an unknown or ill-typed key; message names the key path."""


class TransferCollapseError(LafError):
    """The domain-transfer loop filtered the image or frame pool down to nothing."""
