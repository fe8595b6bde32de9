"""TLD registry: full domain -> DomainInformation, plus the inverse
maintainer index used to enforce mandatory participation."""

from __future__ import annotations

from .calls import AmendChainspec, RegisterDomain, RevokeDomain
from .codec import (
    Decoder,
    decode_str_list,
    decode_u64,
    enc,
    encode_str_list,
    encode_u64,
    storage_key_for,
)
from .errors import (
    AlreadyAvailable,
    InsufficientMaintainers,
    InvalidLabel,
    MaintainerConflict,
    NotAuthorized,
    NotFound,
    NotOwner,
    DomainTaken,
    Unavailable,
    WrongTld,
)
from .state import ChainState, DispatchContext, StorageRead
from .types import DomainInformation, NodeId, is_valid_label, split_domain

TLD_NAME_KEY = b":tld:name"
MIN_MAINTAINERS_KEY = b":tld:min_maintainers"
DOMAIN_INDEX_KEY = b":tld:domains"
MAINTAINER_PREFIX = b":tld:maintainer:"


def domain_key(domain: str) -> bytes:
    return storage_key_for(domain)


def maintainer_key(node: NodeId) -> bytes:
    return MAINTAINER_PREFIX + node.bytes


def genesis_entries(tld: str, min_maintainers: int = 1) -> dict[bytes, bytes]:
    if not is_valid_label(tld):
        raise ValueError(f"invalid TLD label {tld!r}")
    if min_maintainers < 1:
        raise ValueError("min_maintainers must be at least 1")
    return {
        TLD_NAME_KEY: enc(tld),
        MIN_MAINTAINERS_KEY: encode_u64(min_maintainers),
        DOMAIN_INDEX_KEY: encode_str_list([]),
    }


def served_tld(state: StorageRead) -> str:
    d = Decoder(state.get(TLD_NAME_KEY) or b"")
    name = d.str()
    d.finish()
    return name


def min_maintainers(state: StorageRead) -> int:
    raw = state.get(MIN_MAINTAINERS_KEY)
    return decode_u64(raw) if raw is not None else 1


def get_domain(state: StorageRead, domain: str) -> DomainInformation | None:
    raw = state.get(domain_key(domain))
    return DomainInformation.decode(raw) if raw is not None else None


def register_domain(ctx: DispatchContext, call: RegisterDomain) -> None:
    parts = split_domain(call.domain)
    if parts is None:
        raise InvalidLabel(f"invalid domain {call.domain!r}")
    if parts[1] != served_tld(ctx.store):
        raise WrongTld(f"{call.domain!r} is not under .{served_tld(ctx.store)}")
    existing = get_domain(ctx.store, call.domain)
    if existing is not None and not existing.available:
        raise DomainTaken(call.domain)
    if len(set(call.maintainers)) != len(call.maintainers):
        raise MaintainerConflict("maintainer listed twice")
    if len(call.maintainers) < min_maintainers(ctx.store):
        raise InsufficientMaintainers(
            f"{len(call.maintainers)} < {min_maintainers(ctx.store)} maintainers"
        )
    for node in call.maintainers:
        bound = maintainer_domain(ctx.store, node)
        if bound is not None:
            raise MaintainerConflict(f"{node!r} already maintains {bound!r}")

    info = DomainInformation(ctx.origin, call.chain_spec, call.maintainers, False)
    ctx.store.put(domain_key(call.domain), info.encode())
    for node in call.maintainers:
        ctx.store.put(maintainer_key(node), enc(call.domain))
    if existing is None:
        names = decode_str_list(ctx.store.get(DOMAIN_INDEX_KEY) or encode_str_list([]))
        names.append(call.domain)
        names.sort()
        ctx.store.put(DOMAIN_INDEX_KEY, encode_str_list(names))


def revoke_domain(ctx: DispatchContext, call: RevokeDomain) -> None:
    if not ctx.is_worker:
        raise NotAuthorized("revoke_domain is worker-only")
    info = get_domain(ctx.store, call.domain)
    if info is None:
        raise NotFound(call.domain)
    if info.available:
        raise AlreadyAvailable(call.domain)
    for node in info.maintainers:
        ctx.store.delete(maintainer_key(node))
    revoked = DomainInformation(info.creator, None, (), True)
    ctx.store.put(domain_key(call.domain), revoked.encode())


def amend_chainspec(ctx: DispatchContext, call: AmendChainspec) -> None:
    info = get_domain(ctx.store, call.domain)
    if info is None:
        raise NotFound(call.domain)
    if info.available:
        raise Unavailable(call.domain)
    if info.creator != ctx.origin:
        raise NotOwner(call.domain)
    amended = DomainInformation(info.creator, call.new_spec, info.maintainers, False)
    ctx.store.put(domain_key(call.domain), amended.encode())


CALLS = {
    RegisterDomain: register_domain,
    RevokeDomain: revoke_domain,
    AmendChainspec: amend_chainspec,
}


def query_domain(state: StorageRead, domain: str) -> DomainInformation:
    info = get_domain(state, domain)
    if info is None:
        raise NotFound(domain)
    return info


def maintainer_domain(state: StorageRead, node: NodeId) -> str | None:
    raw = state.get(maintainer_key(node))
    if raw is None:
        return None
    d = Decoder(raw)
    domain = d.str()
    d.finish()
    return domain


def list_domains(state: StorageRead) -> list[str]:
    raw = state.get(DOMAIN_INDEX_KEY)
    return decode_str_list(raw) if raw is not None else []


def maintainer_index(state: ChainState) -> dict[NodeId, str]:
    """Dump the stored inverse index (a prefix scan, for inspection)."""
    out = {}
    for key in state.entries:
        if key.startswith(MAINTAINER_PREFIX):
            node = NodeId(key[len(MAINTAINER_PREFIX):])
            out[node] = maintainer_domain(state, node)
    return out
