"""Client side of the discovery protocols.

Resolution walks root -> TLD network -> domain record. Claiming asks the
root for the TLD network's details and submits ``register_domain`` there.
Asset identifiers are hashed here, before anything leaves the client.
"""

from __future__ import annotations

import logging
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .calls import RegisterAssetForDomain, RegisterDomain, Transaction
from .errors import (
    DISPATCH_ERRORS,
    DomainNotFound,
    DomainRevoked,
    DomainTaken,
    InsufficientMaintainers,
    InvalidDomain,
    RpcError,
    TldNotFound,
    TransportError,
)
from .types import AccountId, ChainSpec, NodeId, asset_hash, split_domain

log = logging.getLogger(__name__)


def _monotonic_ms() -> float:
    return time.monotonic() * 1000


@dataclass
class ResolverConfig:
    root_spec: ChainSpec
    cache_capacity: int = 1024
    cache_ttl: float = 60_000  # ms, on the resolver's clock

    def __post_init__(self) -> None:
        if self.cache_capacity < 0:
            raise ValueError("cache_capacity must be >= 0")


@dataclass(frozen=True)
class CacheEntry:
    domain: str
    spec: ChainSpec
    inserted_at: float


class ResolutionCache:
    """Thread-safe LRU cache with a TTL."""

    def __init__(self, capacity: int, ttl: float, clock: Callable[[], float]) -> None:
        self.capacity = capacity
        self.ttl = ttl
        self._clock = clock
        self._entries: OrderedDict[str, CacheEntry] = OrderedDict()
        self._lock = threading.Lock()

    def get(self, domain: str) -> Optional[ChainSpec]:
        if self.capacity == 0:
            return None
        with self._lock:
            entry = self._entries.get(domain)
            if entry is None:
                return None
            if self._clock() - entry.inserted_at > self.ttl:
                del self._entries[domain]
                return None
            self._entries.move_to_end(domain)
            return entry.spec

    def put(self, domain: str, spec: ChainSpec) -> None:
        if self.capacity == 0:
            return
        with self._lock:
            self._entries[domain] = CacheEntry(domain, spec, self._clock())
            self._entries.move_to_end(domain)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)

    def __len__(self) -> int:
        return len(self._entries)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


class Resolver:
    def __init__(self, transport, config: ResolverConfig, clock: Callable[[], float] = _monotonic_ms) -> None:
        self.transport = transport
        self.config = config
        self.cache = ResolutionCache(config.cache_capacity, config.cache_ttl, clock)

    def _call(self, spec: ChainSpec, method: str, params: list):
        try:
            return self.transport.call(spec, method, params)
        except RpcError as exc:
            raise TransportError(f"{method} on {spec.id}: {exc}") from exc

    def tld_spec(self, tld: str) -> ChainSpec:
        obj = self._call(self.config.root_spec, "root_queryTld", [tld])
        if obj is None:
            raise TldNotFound(tld)
        return ChainSpec.from_json(obj)

    def _domain_record(self, tld_spec: ChainSpec, domain: str) -> Optional[dict]:
        return self._call(tld_spec, "tld_queryDomain", [domain])

    def resolve(self, domain: str) -> ChainSpec:
        parts = split_domain(domain)
        if parts is None:
            raise InvalidDomain(domain)
        cached = self.cache.get(domain)
        if cached is not None:
            return cached
        record = self._domain_record(self.tld_spec(parts[1]), domain)
        if record is None:
            raise DomainNotFound(domain)
        if record["available"]:
            raise DomainRevoked(domain)
        spec = ChainSpec.from_json(record["chain_spec"])
        self.cache.put(domain, spec)
        return spec

    def _submit(self, spec: ChainSpec, origin: AccountId, call, fee: int) -> bytes:
        nonce = self._call(spec, "system_accountNextIndex", [origin.hex()])
        tx = Transaction(origin, int(nonce), call, fee)
        return bytes.fromhex(self._call(spec, "author_submitExtrinsic", [tx.encode().hex()]))

    def _await(self, spec: ChainSpec, tx_hash: bytes, wait: Optional[Callable[[], object]]) -> None:
        """If a ``wait`` hook is given (e.g. advance the simulator one block),
        run it and raise the registry error the transaction hit, if any."""
        if wait is None:
            return
        wait()
        status = self._call(spec, "author_extrinsicStatus", [tx_hash.hex()]) or {}
        if status.get("status") in ("failed", "dropped"):
            code = status.get("error", "")
            err_type = DISPATCH_ERRORS.get(code)
            if err_type is not None:
                raise err_type(code)
            raise TransportError(f"transaction {status.get('status')}: {code}")

    def claim_domain(
        self,
        domain: str,
        chain_spec: ChainSpec,
        maintainers: Sequence[NodeId],
        origin: AccountId,
        *,
        fee: int = 1,
        wait: Optional[Callable[[], object]] = None,
    ) -> bytes:
        """Claim ``domain``; returns the submitted transaction hash.

        Raises :class:`~chaindns.errors.DomainTaken` when the name is already
        live so the caller can pick another one and retry.
        """
        parts = split_domain(domain)
        if parts is None:
            raise InvalidDomain(domain)
        if not maintainers:
            raise InsufficientMaintainers("at least one maintainer node is required")
        tld_spec = self.tld_spec(parts[1])
        record = self._domain_record(tld_spec, domain)
        if record is not None and not record["available"]:
            raise DomainTaken(domain)
        tx_hash = self._submit(tld_spec, origin, RegisterDomain(domain, chain_spec, tuple(maintainers)), fee)
        self._await(tld_spec, tx_hash, wait)
        return tx_hash

    def resolve_asset(self, asset_id: str) -> list[tuple[str, ChainSpec]]:
        listed = self._call(self.config.root_spec, "asset_queryProviders", [asset_hash(asset_id).hex()])
        out = []
        for domain in listed or []:
            try:
                out.append((domain, self.resolve(domain)))
            except TransportError:
                raise
            except (DomainNotFound, DomainRevoked, TldNotFound, InvalidDomain) as exc:
                log.warning("provider %s of %r is not resolvable: %s", domain, asset_id, exc.code)
        return out

    def register_assets(
        self,
        domain: str,
        asset_ids: Iterable[str],
        origin: AccountId,
        *,
        fee: int = 1,
        wait: Optional[Callable[[], object]] = None,
    ) -> list[bytes]:
        hashes = []
        for asset_id in asset_ids:
            call = RegisterAssetForDomain(domain, asset_hash(asset_id))
            hashes.append(self._submit(self.config.root_spec, origin, call, fee))
        if hashes and wait is not None:
            wait()
            for h in hashes:
                self._await(self.config.root_spec, h, lambda: None)
        return hashes
