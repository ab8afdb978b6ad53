"""Shared exception and warning types."""


class DppError(Exception):
    """Base class for all dppkit errors."""


class ValidationError(DppError, ValueError):
    """Malformed input or a violated operation precondition."""


class NotFoundError(DppError, LookupError):
    """Requested DID, product, or status list is not on the registry."""


class AuthorizationError(DppError):
    """Signer is not entitled to perform the requested registry write."""


class InsufficientFundsError(DppError):
    """Fee payer's account cannot cover the transaction fee."""


class ProtocolError(DppError):
    """A lifecycle protocol step was invoked from an invalid state."""


class CorrelationWarning(UserWarning):
    """An owner DID is being reused across products, enabling correlation."""
