"""Core value types shared by every registry and by the resolver."""

from __future__ import annotations

import base64
import json
import re
from dataclasses import dataclass, field
from os import PathLike
from typing import Optional

from .codec import Decoder, Encoder, digest256
from .errors import MalformedValue

ID_SIZE = 32
ASSET_HASH_SIZE = 32

LABEL_RE = re.compile(r"[a-z0-9][a-z0-9-]{0,62}")


def is_valid_label(label: str) -> bool:
    return LABEL_RE.fullmatch(label) is not None


def split_domain(domain: str) -> Optional[tuple[str, str]]:
    """Return ``(name, tld)`` for a well-formed two-label domain, else None."""
    parts = domain.split(".")
    if len(parts) != 2 or not all(is_valid_label(p) for p in parts):
        return None
    return parts[0], parts[1]


@dataclass(frozen=True, order=True)
class _Id32:
    bytes: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.bytes, (bytes, bytearray)) or len(self.bytes) != ID_SIZE:
            raise ValueError(f"{type(self).__name__} must be exactly {ID_SIZE} bytes")
        object.__setattr__(self, "bytes", bytes(self.bytes))

    @classmethod
    def derive(cls, label: str):
        """Deterministic identifier from a human-readable seed label."""
        return cls(digest256(f"{cls.__name__}:{label}".encode()))

    @classmethod
    def from_hex(cls, h: str):
        return cls(bytes.fromhex(h.removeprefix("0x")))

    def hex(self) -> str:
        return self.bytes.hex()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.bytes[:4].hex()}..)"


class NodeId(_Id32):
    """Identifier of a network peer."""


class AccountId(_Id32):
    """Identifier of a transaction origin."""


def worker_account(node: NodeId) -> AccountId:
    """Reserved origin used by ``node``'s off-chain worker."""
    return AccountId(digest256(b"offchain-worker:" + node.bytes))


def asset_hash(asset_id: str) -> bytes:
    """BLAKE2b-256 of the UTF-8 asset identifier, computed client-side."""
    return digest256(asset_id.encode("utf-8"))


def check_asset_hash(h: bytes) -> bytes:
    if not isinstance(h, (bytes, bytearray)) or len(h) != ASSET_HASH_SIZE:
        raise ValueError(f"asset hash must be exactly {ASSET_HASH_SIZE} bytes")
    return bytes(h)


@dataclass(frozen=True)
class ChainSpec:
    """Connection details for one network. The payload is opaque."""

    name: str
    id: str
    payload: bytes = b""

    def __post_init__(self) -> None:
        if not self.name or not self.id:
            raise ValueError("ChainSpec name and id must be non-empty")
        object.__setattr__(self, "payload", bytes(self.payload))

    @property
    def payload_size_bytes(self) -> int:
        return len(self.payload)

    def write(self, e: Encoder) -> None:
        e.str(self.name).str(self.id).bytes(self.payload)

    @classmethod
    def read(cls, d: Decoder) -> "ChainSpec":
        name, id_, payload = d.str(), d.str(), d.bytes()
        try:
            return cls(name, id_, payload)
        except ValueError as exc:
            raise MalformedValue(str(exc)) from exc

    def encode(self) -> bytes:
        e = Encoder()
        self.write(e)
        return e.finish()

    @classmethod
    def decode(cls, raw: bytes) -> "ChainSpec":
        d = Decoder(raw)
        spec = cls.read(d)
        d.finish()
        return spec

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "id": self.id,
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ChainSpec":
        return cls(obj["name"], obj["id"], base64.b64decode(obj.get("payload_b64", "")))

    def save(self, path: str | PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | PathLike) -> "ChainSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class TldRecord:
    tld: str
    chain_spec: ChainSpec
    registrant: AccountId

    def encode(self) -> bytes:
        e = Encoder().str(self.tld)
        self.chain_spec.write(e)
        return e.fixed(self.registrant.bytes).finish()

    @classmethod
    def decode(cls, raw: bytes) -> "TldRecord":
        d = Decoder(raw)
        tld = d.str()
        spec = ChainSpec.read(d)
        registrant = AccountId(d.fixed(ID_SIZE))
        d.finish()
        return cls(tld, spec, registrant)


@dataclass(frozen=True)
class DomainInformation:
    creator: AccountId
    chain_specifications: Optional[ChainSpec]
    maintainers: tuple[NodeId, ...] = field(default_factory=tuple)
    available: bool = False

    def encode(self) -> bytes:
        e = Encoder().fixed(self.creator.bytes)
        if self.chain_specifications is None:
            e.u8(0)
        else:
            e.u8(1)
            self.chain_specifications.write(e)
        e.seq(self.maintainers, lambda e_, n: e_.fixed(n.bytes))
        e.bool(self.available)
        return e.finish()

    @classmethod
    def decode(cls, raw: bytes) -> "DomainInformation":
        d = Decoder(raw)
        creator = AccountId(d.fixed(ID_SIZE))
        tag = d.u8()
        if tag == 0:
            spec = None
        elif tag == 1:
            spec = ChainSpec.read(d)
        else:
            raise MalformedValue(f"invalid option tag {tag}")
        maintainers = tuple(d.seq(lambda d_: NodeId(d_.fixed(ID_SIZE))))
        available = d.bool()
        d.finish()
        return cls(creator, spec, maintainers, available)


@dataclass(frozen=True)
class PendingRequest:
    request_id: int
    requester: AccountId
    domain: str
    asset_hash: bytes
    timestamp: int

    def encode(self) -> bytes:
        return (
            Encoder()
            .u64(self.request_id)
            .fixed(self.requester.bytes)
            .str(self.domain)
            .fixed(self.asset_hash)
            .u64(self.timestamp)
            .finish()
        )

    @classmethod
    def decode(cls, raw: bytes) -> "PendingRequest":
        d = Decoder(raw)
        out = cls(
            d.u64(),
            AccountId(d.fixed(ID_SIZE)),
            d.str(),
            d.fixed(ASSET_HASH_SIZE),
            d.u64(),
        )
        d.finish()
        return out
