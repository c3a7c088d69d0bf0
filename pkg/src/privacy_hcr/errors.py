"""Exception hierarchy.

The CLI maps :class:`ConfigError` to exit code 2 and
:class:`NumericDomainError` to exit code 3.
"""


class PrivacyHCRError(Exception):
    """Base class for all package errors."""


class ConfigError(PrivacyHCRError, ValueError):
    """Malformed input: bad model file, inconsistent dimensions, bad CSV."""


class NumericDomainError(PrivacyHCRError, ValueError):
    """A quantity is well-formed but outside the domain of the operation."""


class NotDiagonalizableError(NumericDomainError):
    """The state matrix has no well-conditioned eigenvector basis."""


class EstimationError(PrivacyHCRError, RuntimeError):
    """Every candidate change time was excluded by the estimator."""
