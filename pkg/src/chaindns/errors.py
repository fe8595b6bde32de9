"""Exception hierarchy.

Registry failures are :class:`DispatchError` subclasses; the ledger catches
them to roll back a transaction while still charging its fee. Each class
name doubles as the wire-level error code (``err.code``).
"""

from __future__ import annotations


class ChainDnsError(Exception):
    @property
    def code(self) -> str:
        return type(self).__name__


class MalformedValue(ChainDnsError):
    """Bytes that do not decode under the canonical encoding."""


# -- transaction-level -----------------------------------------------------

class TransactionError(ChainDnsError):
    """The transaction is invalid as a whole and is dropped, fee unpaid."""


class StaleNonce(TransactionError):
    pass


class UnknownCall(TransactionError):
    pass


# -- registry dispatch -----------------------------------------------------

class DispatchError(ChainDnsError):
    """A registry rejected the call; state rolls back but the fee is kept."""


class InvalidLabel(DispatchError):
    pass


class InvalidArgument(DispatchError):
    pass


class TldTaken(DispatchError):
    pass


class NotFound(DispatchError):
    pass


class DomainTaken(DispatchError):
    pass


class WrongTld(DispatchError):
    pass


class InsufficientMaintainers(DispatchError):
    pass


class MaintainerConflict(DispatchError):
    pass


class NotAuthorized(DispatchError):
    pass


class AlreadyAvailable(DispatchError):
    pass


class NotOwner(DispatchError):
    pass


class Unavailable(DispatchError):
    pass


class QueueFull(DispatchError):
    pass


class DuplicateProvider(DispatchError):
    pass


class UnknownProvider(DispatchError):
    pass


DISPATCH_ERRORS: dict[str, type[DispatchError]] = {
    cls.__name__: cls
    for cls in (
        InvalidLabel, InvalidArgument, TldTaken, NotFound, DomainTaken, WrongTld,
        InsufficientMaintainers, MaintainerConflict, NotAuthorized,
        AlreadyAvailable, NotOwner, Unavailable, QueueFull,
        DuplicateProvider, UnknownProvider,
    )
}


# -- simulator / transport -------------------------------------------------

class DuplicateNetworkId(ChainDnsError):
    pass


class InvalidEvent(ChainDnsError):
    pass


class UnknownMethod(ChainDnsError):
    pass


class NetworkUnreachable(ChainDnsError):
    pass


class RpcError(ChainDnsError):
    """Error object carried in an RPC response envelope."""

    def __init__(self, code: str, message: str = "") -> None:
        super().__init__(f"{code}: {message}" if message else code)
        self._code = code
        self.message = message

    @property
    def code(self) -> str:
        return self._code


# -- resolver --------------------------------------------------------------

class ResolveError(ChainDnsError):
    pass


class InvalidDomain(ResolveError):
    pass


class TldNotFound(ResolveError):
    pass


class DomainNotFound(ResolveError):
    pass


class DomainRevoked(ResolveError):
    pass


class TransportError(ResolveError):
    pass


# -- bench -----------------------------------------------------------------

class SetupFailed(ChainDnsError):
    def __init__(self, step: str, cause: BaseException | str) -> None:
        super().__init__(f"setup failed at {step}: {cause}")
        self.step = step
        self.cause = cause
