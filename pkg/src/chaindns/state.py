"""Consensus state snapshots and the write overlays used during execution."""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Optional, Protocol

from .codec import Encoder, decode_u64, digest256
from .types import AccountId

_DELETED = object()

NUMBER_KEY = b":system:number"
AUTHOR_KEY = b":system:author"
PALLETS_KEY = b":system:pallets"
NONCE_PREFIX = b":system:nonce:"


class StorageRead(Protocol):
    def get(self, key: bytes) -> Optional[bytes]: ...


class ChainState:
    """Immutable key/value snapshot plus the cumulative fee pool."""

    __slots__ = ("_entries", "fee_pool", "_root")

    def __init__(self, entries: Mapping[bytes, bytes] | None = None, fee_pool: int = 0) -> None:
        self._entries = dict(entries or {})
        self.fee_pool = fee_pool
        self._root: Optional[bytes] = None

    @property
    def entries(self) -> Mapping[bytes, bytes]:
        return MappingProxyType(self._entries)

    def get(self, key: bytes) -> Optional[bytes]:
        return self._entries.get(key)

    @property
    def number(self) -> int:
        raw = self._entries.get(NUMBER_KEY)
        return decode_u64(raw) if raw is not None else 0

    @property
    def root(self) -> bytes:
        """BLAKE2b-256 over the sorted entries and the fee pool."""
        if self._root is None:
            e = Encoder().u64(self.fee_pool).u32(len(self._entries))
            for k in sorted(self._entries):
                e.bytes(k).bytes(self._entries[k])
            self._root = digest256(e.finish())
        return self._root

    def overlay(self) -> "Overlay":
        return Overlay(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChainState):
            return NotImplemented
        return self.fee_pool == other.fee_pool and self._entries == other._entries

    def __repr__(self) -> str:
        return f"ChainState(entries={len(self._entries)}, fee_pool={self.fee_pool}, root={self.root.hex()[:12]})"


class Overlay:
    """Buffered writes over a readable base; discard or commit as a unit."""

    def __init__(self, base: StorageRead) -> None:
        self._base = base
        self._changes: dict[bytes, object] = {}

    def get(self, key: bytes) -> Optional[bytes]:
        if key in self._changes:
            v = self._changes[key]
            return None if v is _DELETED else v  # type: ignore[return-value]
        return self._base.get(key)

    def put(self, key: bytes, value: bytes) -> None:
        self._changes[key] = bytes(value)

    def delete(self, key: bytes) -> None:
        self._changes[key] = _DELETED

    def child(self) -> "Overlay":
        return Overlay(self)

    def commit(self) -> None:
        """Push buffered writes into the parent overlay."""
        if not isinstance(self._base, Overlay):
            raise TypeError("only nested overlays can be committed")
        self._base._changes.update(self._changes)
        self._changes.clear()

    def seal(self, fee_pool: int) -> ChainState:
        """Materialize a new snapshot from a top-level overlay."""
        if not isinstance(self._base, ChainState):
            raise TypeError("seal() requires an overlay directly over a ChainState")
        entries = dict(self._base._entries)
        for k, v in self._changes.items():
            if v is _DELETED:
                entries.pop(k, None)
            else:
                entries[k] = v  # type: ignore[assignment]
        return ChainState(entries, fee_pool)


@dataclass
class DispatchContext:
    """What a registry call sees while executing."""

    store: Overlay
    origin: AccountId
    block_number: int
    workers: frozenset  # AccountIds allowed to make worker-only calls

    @property
    def is_worker(self) -> bool:
        return self.origin in self.workers


def nonce_key(account: AccountId) -> bytes:
    return NONCE_PREFIX + account.bytes


def account_nonce(store: StorageRead, account: AccountId) -> int:
    raw = store.get(nonce_key(account))
    return decode_u64(raw) if raw is not None else 0
