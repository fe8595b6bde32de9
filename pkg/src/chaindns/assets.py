"""Asset-discovery registry on the root chain.

Requests to list a domain as the provider of a (hashed) asset are queued
on-chain and validated later by off-chain workers, because validation
needs a cross-chain query. Verified pairs land in two mutually inverse
maps: asset -> providers and provider -> assets. A persistent cursor over
the sorted provider list lets re-verification resume across blocks.
"""

from __future__ import annotations

import struct
from bisect import bisect_left
from typing import Iterator

from .calls import (
    AdvanceCursor,
    RegisterAssetForDomain,
    RejectRequest,
    RemoveProvider,
    SubmitVerifiedDomain,
)
from .codec import Decoder, Encoder, decode_str_list, decode_u64, enc, encode_str_list, encode_u64
from .errors import DuplicateProvider, InvalidArgument, NotAuthorized, NotFound, QueueFull, UnknownProvider
from .state import ChainState, DispatchContext, Overlay, StorageRead
from .types import ASSET_HASH_SIZE, PendingRequest

DEFAULT_LIFETIME = 50
DEFAULT_QUEUE_CAP = 10_000
DEFAULT_BATCH_SIZE = 8

LIFETIME_KEY = b":asset:lifetime"
QUEUE_CAP_KEY = b":asset:queue_cap"
HEAD_KEY = b":asset:pending_head"
NEXT_ID_KEY = b":asset:next_id"
COUNT_KEY = b":asset:pending_count"
PENDING_PREFIX = b":asset:pending:"
PROVIDERS_PREFIX = b":asset:providers:"
ASSETS_PREFIX = b":asset:assets:"
PROVIDER_INDEX_KEY = b":asset:provider_index"
CURSOR_KEY = b":asset:cursor"


def genesis_entries(lifetime: int = DEFAULT_LIFETIME, queue_cap: int = DEFAULT_QUEUE_CAP) -> dict[bytes, bytes]:
    return {
        LIFETIME_KEY: encode_u64(lifetime),
        QUEUE_CAP_KEY: encode_u64(queue_cap),
        HEAD_KEY: encode_u64(0),
        NEXT_ID_KEY: encode_u64(0),
        COUNT_KEY: encode_u64(0),
        PROVIDER_INDEX_KEY: encode_str_list([]),
        CURSOR_KEY: encode_u64(0),
    }


def _u64(state: StorageRead, key: bytes, default: int = 0) -> int:
    raw = state.get(key)
    return decode_u64(raw) if raw is not None else default


def pending_key(request_id: int) -> bytes:
    # big-endian so key order matches queue order
    return PENDING_PREFIX + struct.pack(">Q", request_id)


def providers_key(asset_hash: bytes) -> bytes:
    return PROVIDERS_PREFIX + asset_hash


def assets_key(domain: str) -> bytes:
    return ASSETS_PREFIX + enc(domain)


def _encode_hashes(hashes: list[bytes]) -> bytes:
    return Encoder().seq(hashes, Encoder.fixed).finish()


def _decode_hashes(raw: bytes) -> list[bytes]:
    d = Decoder(raw)
    out = d.seq(lambda d_: d_.fixed(ASSET_HASH_SIZE))
    d.finish()
    return out


def lifetime(state: StorageRead) -> int:
    return _u64(state, LIFETIME_KEY, DEFAULT_LIFETIME)


def pending_count(state: StorageRead) -> int:
    return _u64(state, COUNT_KEY)


def get_request(state: StorageRead, request_id: int) -> PendingRequest | None:
    raw = state.get(pending_key(request_id))
    return PendingRequest.decode(raw) if raw is not None else None


def iter_pending(state: StorageRead) -> Iterator[PendingRequest]:
    """Pending requests, oldest first."""
    for rid in range(_u64(state, HEAD_KEY), _u64(state, NEXT_ID_KEY)):
        req = get_request(state, rid)
        if req is not None:
            yield req


def pending_requests(state: StorageRead, limit: int | None = None) -> list[PendingRequest]:
    out = []
    for req in iter_pending(state):
        if limit is not None and len(out) >= limit:
            break
        out.append(req)
    return out


def query_asset_providers(state: StorageRead, asset_hash: bytes) -> list[str]:
    raw = state.get(providers_key(asset_hash))
    return decode_str_list(raw) if raw is not None else []


def provider_assets(state: StorageRead, domain: str) -> list[bytes]:
    raw = state.get(assets_key(domain))
    return _decode_hashes(raw) if raw is not None else []


def providers(state: StorageRead) -> list[str]:
    raw = state.get(PROVIDER_INDEX_KEY)
    return decode_str_list(raw) if raw is not None else []


def cursor(state: StorageRead) -> int:
    return _u64(state, CURSOR_KEY)


def next_batch(provider_list: list[str], index: int, batch_size: int) -> tuple[list[str], int]:
    """Up to ``batch_size`` distinct providers starting at ``index``,
    wrapping; returns the batch and the advanced cursor."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = len(provider_list)
    if n == 0:
        return [], 0
    start = index if index < n else 0
    take = min(batch_size, n)
    batch = [provider_list[(start + i) % n] for i in range(take)]
    return batch, (start + take) % n


def asset_providers_map(state: ChainState) -> dict[bytes, list[str]]:
    return {
        k[len(PROVIDERS_PREFIX):]: decode_str_list(v)
        for k, v in state.entries.items()
        if k.startswith(PROVIDERS_PREFIX)
    }


def provider_assets_map(state: ChainState) -> dict[str, list[bytes]]:
    out = {}
    for k, v in state.entries.items():
        if k.startswith(ASSETS_PREFIX):
            d = Decoder(k[len(ASSETS_PREFIX):])
            domain = d.str()
            d.finish()
            out[domain] = _decode_hashes(v)
    return out


# -- mutation ------------------------------------------------------------

def _require_worker(ctx: DispatchContext, name: str) -> None:
    if not ctx.is_worker:
        raise NotAuthorized(f"{name} is worker-only")


def _drop_request(store: Overlay, request_id: int) -> None:
    store.delete(pending_key(request_id))
    store.put(COUNT_KEY, encode_u64(pending_count(store) - 1))


def _index_insert(store: Overlay, domain: str) -> None:
    names = providers(store)
    pos = bisect_left(names, domain)
    names.insert(pos, domain)
    store.put(PROVIDER_INDEX_KEY, encode_str_list(names))
    cur = cursor(store)
    if pos < cur:
        store.put(CURSOR_KEY, encode_u64(cur + 1))


def _index_remove(store: Overlay, domain: str) -> None:
    names = providers(store)
    pos = bisect_left(names, domain)
    if pos < len(names) and names[pos] == domain:
        del names[pos]
        store.put(PROVIDER_INDEX_KEY, encode_str_list(names))
        # keep the cursor on the same next provider
        cur = cursor(store)
        if pos < cur:
            cur -= 1
        if cur >= len(names):
            cur = 0
        store.put(CURSOR_KEY, encode_u64(cur))


def register_asset_for_domain(ctx: DispatchContext, call: RegisterAssetForDomain) -> None:
    store = ctx.store
    if pending_count(store) >= _u64(store, QUEUE_CAP_KEY, DEFAULT_QUEUE_CAP):
        raise QueueFull(f"{pending_count(store)} pending requests")
    rid = _u64(store, NEXT_ID_KEY)
    req = PendingRequest(rid, ctx.origin, call.domain, call.asset_hash, ctx.block_number)
    store.put(pending_key(rid), req.encode())
    store.put(NEXT_ID_KEY, encode_u64(rid + 1))
    store.put(COUNT_KEY, encode_u64(pending_count(store) + 1))


def submit_verified_domain(ctx: DispatchContext, call: SubmitVerifiedDomain) -> None:
    _require_worker(ctx, "submit_verified_domain")
    store = ctx.store
    req = get_request(store, call.request_id)
    if req is None or req.domain != call.domain or req.asset_hash != call.asset_hash:
        raise NotFound(f"no pending request {call.request_id} for {call.domain!r}")
    listed = query_asset_providers(store, call.asset_hash)
    if call.domain in listed:
        raise DuplicateProvider(call.domain)
    listed.append(call.domain)
    store.put(providers_key(call.asset_hash), encode_str_list(listed))
    offered = provider_assets(store, call.domain)
    if call.asset_hash not in offered:
        if not offered:
            _index_insert(store, call.domain)
        offered.append(call.asset_hash)
        store.put(assets_key(call.domain), _encode_hashes(offered))
    _drop_request(store, call.request_id)


def reject_request(ctx: DispatchContext, call: RejectRequest) -> None:
    _require_worker(ctx, "reject_request")
    if get_request(ctx.store, call.request_id) is None:
        raise NotFound(f"no pending request {call.request_id}")
    _drop_request(ctx.store, call.request_id)


def remove_provider(ctx: DispatchContext, call: RemoveProvider) -> int:
    _require_worker(ctx, "remove_provider")
    store = ctx.store
    offered = provider_assets(store, call.domain)
    if not offered:
        raise UnknownProvider(call.domain)
    for h in offered:
        listed = [d for d in query_asset_providers(store, h) if d != call.domain]
        if listed:
            store.put(providers_key(h), encode_str_list(listed))
        else:
            store.delete(providers_key(h))
    store.delete(assets_key(call.domain))
    _index_remove(store, call.domain)
    return len(offered)


def advance_cursor(ctx: DispatchContext, call: AdvanceCursor) -> list[str]:
    _require_worker(ctx, "advance_cursor")
    if call.batch_size < 1:
        raise InvalidArgument("batch_size must be >= 1")
    batch, new_cursor = next_batch(providers(ctx.store), cursor(ctx.store), call.batch_size)
    ctx.store.put(CURSOR_KEY, encode_u64(new_cursor))
    return batch


def prune_expired_requests(store: Overlay, current_block: int) -> int:
    """Drop every request with ``current_block > timestamp + lifetime``.

    Queue order is submission order, so timestamps are non-decreasing and the
    scan stops at the first live request that has not expired.
    """
    life = lifetime(store)
    head, next_id = _u64(store, HEAD_KEY), _u64(store, NEXT_ID_KEY)
    pruned = 0
    rid = head
    while rid < next_id:
        req = get_request(store, rid)
        if req is not None:
            if current_block <= req.timestamp + life:
                break
            store.delete(pending_key(rid))
            pruned += 1
        rid += 1
    if rid != head:
        store.put(HEAD_KEY, encode_u64(rid))
    if pruned:
        store.put(COUNT_KEY, encode_u64(pending_count(store) - pruned))
    return pruned


CALLS = {
    RegisterAssetForDomain: register_asset_for_domain,
    SubmitVerifiedDomain: submit_verified_domain,
    RejectRequest: reject_request,
    RemoveProvider: remove_provider,
    AdvanceCursor: advance_cursor,
}


def on_initialize(store: Overlay, block_number: int) -> None:
    prune_expired_requests(store, block_number)
