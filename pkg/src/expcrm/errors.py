"""Exception types shared across the package.

Errors are split by who can fix them: ``DomainError`` and friends mean the
caller passed something outside a documented precondition, ``QuadratureError``
subclasses mean the numeric oracle could not certify a result, and
``ConfigError`` marks unreadable input files (the CLI maps it to exit code 2,
everything else recoverable to exit code 1).
"""

from __future__ import annotations


class ExpCrmError(Exception):
    """Base class for all package errors."""


class DomainError(ExpCrmError, ValueError):
    """A value lies outside the documented domain of an operation."""


class InvalidModelError(ExpCrmError, ValueError):
    """Hyperparameters violate the model's validity region.

    The message names the failed requirement (infinite ordinary mass or
    finite expected atom count) so callers can report which assumption broke.
    """


class InvalidObservationError(ExpCrmError, ValueError):
    """An observation is incompatible with the likelihood.

    Raised e.g. for a count above a bounded support, where every weight
    assigns the observation probability zero.
    """


class TailBoundError(ExpCrmError, ValueError):
    """A truncation level leaves more than the allowed tail mass.

    Carries ``certificate``, a dict with the per-round tail bounds that
    exceeded the budget, so the caller can see how far off the cap was.
    """

    def __init__(self, message: str, certificate: dict | None = None):
        super().__init__(message)
        self.certificate = certificate or {}


class RngFaultError(ExpCrmError, RuntimeError):
    """A rejection loop failed to terminate within its retry budget."""


class ConfigError(ExpCrmError, ValueError):
    """An input file could not be parsed (malformed JSON, missing keys)."""


class QuadratureError(ExpCrmError, RuntimeError):
    """The integrator could not reach the requested tolerance."""


class DivergenceSuspected(QuadratureError):
    """Endpoint contributions refuse to decay: the integral looks infinite.

    ``evidence`` holds the log contributions of the probed geometric shells;
    ``endpoint`` names which end of the domain misbehaved.
    """

    def __init__(self, message: str, endpoint: str, evidence: list | None = None):
        super().__init__(message)
        self.endpoint = endpoint
        self.evidence = list(evidence) if evidence is not None else []


class SingularityMismatch(QuadratureError):
    """The declared endpoint power does not match the integrand's behaviour."""
