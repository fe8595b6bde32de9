"""Transaction call variants and the signed-transaction envelope.

Each call is a frozen dataclass with a one-byte ``TAG`` and the name of
the registry (``PALLET``) that executes it. ``WORKER_ONLY`` calls are
accepted only from an off-chain worker origin.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import ClassVar, Union

from .codec import Decoder, Encoder, digest256
from .errors import MalformedValue, UnknownCall
from .types import ASSET_HASH_SIZE, ID_SIZE, AccountId, ChainSpec, NodeId, check_asset_hash


@dataclass(frozen=True)
class RegisterTld:
    TAG: ClassVar[int] = 0
    PALLET: ClassVar[str] = "root"
    WORKER_ONLY: ClassVar[bool] = False
    tld: str
    chain_spec: ChainSpec

    def write(self, e: Encoder) -> None:
        e.str(self.tld)
        self.chain_spec.write(e)

    @classmethod
    def read(cls, d: Decoder) -> "RegisterTld":
        return cls(d.str(), ChainSpec.read(d))


@dataclass(frozen=True)
class RegisterDomain:
    TAG: ClassVar[int] = 1
    PALLET: ClassVar[str] = "tld"
    WORKER_ONLY: ClassVar[bool] = False
    domain: str
    chain_spec: ChainSpec
    maintainers: tuple[NodeId, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "maintainers", tuple(self.maintainers))

    def write(self, e: Encoder) -> None:
        e.str(self.domain)
        self.chain_spec.write(e)
        e.seq(self.maintainers, lambda e_, n: e_.fixed(n.bytes))

    @classmethod
    def read(cls, d: Decoder) -> "RegisterDomain":
        domain = d.str()
        spec = ChainSpec.read(d)
        return cls(domain, spec, tuple(d.seq(lambda d_: NodeId(d_.fixed(ID_SIZE)))))


@dataclass(frozen=True)
class RevokeDomain:
    TAG: ClassVar[int] = 2
    PALLET: ClassVar[str] = "tld"
    WORKER_ONLY: ClassVar[bool] = True
    domain: str

    def write(self, e: Encoder) -> None:
        e.str(self.domain)

    @classmethod
    def read(cls, d: Decoder) -> "RevokeDomain":
        return cls(d.str())


@dataclass(frozen=True)
class AmendChainspec:
    TAG: ClassVar[int] = 3
    PALLET: ClassVar[str] = "tld"
    WORKER_ONLY: ClassVar[bool] = False
    domain: str
    new_spec: ChainSpec

    def write(self, e: Encoder) -> None:
        e.str(self.domain)
        self.new_spec.write(e)

    @classmethod
    def read(cls, d: Decoder) -> "AmendChainspec":
        return cls(d.str(), ChainSpec.read(d))


@dataclass(frozen=True)
class RegisterAssetForDomain:
    TAG: ClassVar[int] = 4
    PALLET: ClassVar[str] = "assets"
    WORKER_ONLY: ClassVar[bool] = False
    domain: str
    asset_hash: bytes

    def __post_init__(self) -> None:
        object.__setattr__(self, "asset_hash", check_asset_hash(self.asset_hash))

    def write(self, e: Encoder) -> None:
        e.str(self.domain).fixed(self.asset_hash)

    @classmethod
    def read(cls, d: Decoder) -> "RegisterAssetForDomain":
        return cls(d.str(), d.fixed(ASSET_HASH_SIZE))


@dataclass(frozen=True)
class SubmitVerifiedDomain:
    TAG: ClassVar[int] = 5
    PALLET: ClassVar[str] = "assets"
    WORKER_ONLY: ClassVar[bool] = True
    request_id: int
    domain: str
    asset_hash: bytes

    def __post_init__(self) -> None:
        object.__setattr__(self, "asset_hash", check_asset_hash(self.asset_hash))

    def write(self, e: Encoder) -> None:
        e.u64(self.request_id).str(self.domain).fixed(self.asset_hash)

    @classmethod
    def read(cls, d: Decoder) -> "SubmitVerifiedDomain":
        return cls(d.u64(), d.str(), d.fixed(ASSET_HASH_SIZE))


@dataclass(frozen=True)
class RejectRequest:
    TAG: ClassVar[int] = 6
    PALLET: ClassVar[str] = "assets"
    WORKER_ONLY: ClassVar[bool] = True
    request_id: int
    reason: str

    def write(self, e: Encoder) -> None:
        e.u64(self.request_id).str(self.reason)

    @classmethod
    def read(cls, d: Decoder) -> "RejectRequest":
        return cls(d.u64(), d.str())


@dataclass(frozen=True)
class RemoveProvider:
    TAG: ClassVar[int] = 7
    PALLET: ClassVar[str] = "assets"
    WORKER_ONLY: ClassVar[bool] = True
    domain: str

    def write(self, e: Encoder) -> None:
        e.str(self.domain)

    @classmethod
    def read(cls, d: Decoder) -> "RemoveProvider":
        return cls(d.str())


@dataclass(frozen=True)
class AdvanceCursor:
    TAG: ClassVar[int] = 8
    PALLET: ClassVar[str] = "assets"
    WORKER_ONLY: ClassVar[bool] = True
    batch_size: int

    def write(self, e: Encoder) -> None:
        e.u32(self.batch_size)

    @classmethod
    def read(cls, d: Decoder) -> "AdvanceCursor":
        return cls(d.u32())


Call = Union[
    RegisterTld, RegisterDomain, RevokeDomain, AmendChainspec,
    RegisterAssetForDomain, SubmitVerifiedDomain, RejectRequest,
    RemoveProvider, AdvanceCursor,
]

CALL_TYPES: dict[int, type] = {
    cls.TAG: cls
    for cls in (
        RegisterTld, RegisterDomain, RevokeDomain, AmendChainspec,
        RegisterAssetForDomain, SubmitVerifiedDomain, RejectRequest,
        RemoveProvider, AdvanceCursor,
    )
}


@dataclass(frozen=True)
class Transaction:
    origin: AccountId
    nonce: int
    call: Call
    fee: int = 1

    def encode(self) -> bytes:
        e = Encoder().fixed(self.origin.bytes).u64(self.nonce).u64(self.fee)
        e.u8(self.call.TAG)
        self.call.write(e)
        return e.finish()

    @classmethod
    def decode(cls, raw: bytes) -> "Transaction":
        d = Decoder(raw)
        origin = AccountId(d.fixed(ID_SIZE))
        nonce, fee = d.u64(), d.u64()
        tag = d.u8()
        call_type = CALL_TYPES.get(tag)
        if call_type is None:
            raise UnknownCall(f"unknown call tag {tag}")
        try:
            call = call_type.read(d)
        except ValueError as exc:
            raise MalformedValue(str(exc)) from exc
        d.finish()
        return cls(origin, nonce, call, fee)

    @cached_property
    def hash(self) -> bytes:
        return digest256(self.encode())
