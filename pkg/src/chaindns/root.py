"""Root registry: TLD name -> connection details of the network serving it."""

from __future__ import annotations

from .calls import RegisterTld
from .codec import decode_str_list, encode_str_list, storage_key_for
from .errors import InvalidLabel, NotFound, TldTaken
from .state import DispatchContext, StorageRead
from .types import AccountId, ChainSpec, TldRecord, is_valid_label

TLD_INDEX_KEY = b":root:tlds"


def tld_key(tld: str) -> bytes:
    return storage_key_for(tld)


def genesis_entries() -> dict[bytes, bytes]:
    return {TLD_INDEX_KEY: encode_str_list([])}


def register_tld(ctx: DispatchContext, call: RegisterTld) -> None:
    if not is_valid_label(call.tld):
        raise InvalidLabel(f"invalid TLD label {call.tld!r}")
    key = tld_key(call.tld)
    # the requested TLD must not already be managed by another network
    if ctx.store.get(key) is not None:
        raise TldTaken(call.tld)
    ctx.store.put(key, TldRecord(call.tld, call.chain_spec, ctx.origin).encode())
    names = decode_str_list(ctx.store.get(TLD_INDEX_KEY) or encode_str_list([]))
    names.append(call.tld)
    names.sort()
    ctx.store.put(TLD_INDEX_KEY, encode_str_list(names))


CALLS = {RegisterTld: register_tld}


def get_tld_record(state: StorageRead, tld: str) -> TldRecord | None:
    raw = state.get(tld_key(tld))
    return TldRecord.decode(raw) if raw is not None else None


def query_tld(state: StorageRead, tld: str) -> ChainSpec:
    record = get_tld_record(state, tld)
    if record is None:
        raise NotFound(tld)
    return record.chain_spec


def list_tlds(state: StorageRead) -> list[tuple[str, AccountId]]:
    raw = state.get(TLD_INDEX_KEY)
    out = []
    for name in decode_str_list(raw) if raw is not None else []:
        record = get_tld_record(state, name)
        assert record is not None, f"index lists {name!r} without a record"
        out.append((name, record.registrant))
    return out
