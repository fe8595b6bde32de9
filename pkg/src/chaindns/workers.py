"""Per-node off-chain workers.

Workers never write chain state. They observe the latest sealed block,
talk to other networks over RPC, and feed results back as worker-origin
transactions into their own network's pending pool. Only the worker of the
node that authored the block just sealed submits anything; every node
keeps its own peer cache current.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

from . import assets, root, tld
from .calls import AdvanceCursor, Call, RejectRequest, RemoveProvider, RevokeDomain, SubmitVerifiedDomain, Transaction
from .codec import storage_key_for
from .errors import MalformedValue, RpcError
from .types import DomainInformation, NodeId, split_domain, worker_account

if TYPE_CHECKING:
    from .netsim import Network
    from .transport import Transport

log = logging.getLogger(__name__)

DEFAULT_MAX_REQUESTS = 16

VERIFIED = "verified"
REJECTED = "rejected"
DEFERRED = "deferred"


@dataclass
class WorkerConfig:
    max_requests: int = DEFAULT_MAX_REQUESTS
    batch_size: int = assets.DEFAULT_BATCH_SIZE


@dataclass
class WorkerContext:
    self_node: NodeId
    is_author: bool
    network: "Network"
    transport: "Transport"
    block_number: int = 0
    log: Optional[list] = None
    peer_cache: set = field(default_factory=set)

    @property
    def state(self):
        return self.network.chain.head_state

    def submit(self, call: Call) -> Optional[bytes]:
        origin = worker_account(self.self_node)
        try:
            tx = Transaction(origin, self.network.next_nonce(origin), call, fee=0)
            return self.network.submit(tx)
        except Exception:  # retried on the next block
            log.exception("%s: worker submission failed", self.network.id)
            return None

    def record(self, **event) -> None:
        if self.log is not None:
            event.setdefault("network", self.network.id)
            event.setdefault("block", self.block_number)
            self.log.append(event)


@dataclass(frozen=True)
class ValidationOutcome:
    request_id: int
    domain: str
    status: str  # verified | rejected | deferred
    cause: Optional[str] = None


def decode_remote_domain_info(raw: bytes) -> DomainInformation:
    """Strictly decode a DomainInformation value fetched from a TLD network."""
    return DomainInformation.decode(raw)


def run_mandatory_participation(ctx: WorkerContext, current_participants: set[NodeId]) -> list[bytes]:
    """Revoke the domain of every maintainer that left since the last block."""
    disconnected = {n for n in ctx.peer_cache if n not in current_participants}
    submitted = []
    if ctx.is_author:
        for node in sorted(disconnected):
            domain = tld.maintainer_domain(ctx.state, node)
            if domain is not None:
                tx_hash = ctx.submit(RevokeDomain(domain))
                ctx.record(kind="revoke_submitted", domain=domain, node=node.hex())
                if tx_hash is not None:
                    submitted.append(tx_hash)
    ctx.peer_cache.clear()
    ctx.peer_cache.update(current_participants)
    return submitted


def fetch_remote_domain(ctx: WorkerContext, domain: str) -> tuple[Optional[DomainInformation], Optional[str]]:
    """Query the TLD network serving ``domain``.

    Returns ``(info, None)`` on success or ``(None, cause)``.
    """
    parts = split_domain(domain)
    if parts is None:
        return None, "DomainNotFound"
    record = root.get_tld_record(ctx.state, parts[1])
    if record is None:
        return None, "UnknownTld"
    try:
        raw_hex = ctx.transport.call(record.chain_spec, "state_getStorage", [storage_key_for(domain).hex()])
    except RpcError as exc:
        log.info("%s: cross-chain query for %s failed: %s", ctx.network.id, domain, exc)
        return None, "TransportTimeout"
    if raw_hex is None:
        return None, "DomainNotFound"
    try:
        return decode_remote_domain_info(bytes.fromhex(raw_hex)), None
    except (MalformedValue, ValueError):
        return None, "MalformedValue"


def run_asset_validation(ctx: WorkerContext, max_requests: int = DEFAULT_MAX_REQUESTS) -> list[ValidationOutcome]:
    if not ctx.is_author:
        return []
    outcomes = []
    accepted: set[tuple[str, bytes]] = set()
    for req in assets.pending_requests(ctx.state, max_requests):
        info, cause = fetch_remote_domain(ctx, req.domain)
        if cause == "TransportTimeout":
            outcomes.append(ValidationOutcome(req.request_id, req.domain, DEFERRED, cause))
            continue
        if info is not None:
            if info.available:
                cause = "DomainAvailable"
            elif info.creator != req.requester:
                cause = "RequesterMismatch"
        if cause is not None:
            ctx.submit(RejectRequest(req.request_id, cause))
            outcomes.append(ValidationOutcome(req.request_id, req.domain, REJECTED, cause))
            continue
        pair = (req.domain, req.asset_hash)
        if pair in accepted or req.domain in assets.query_asset_providers(ctx.state, req.asset_hash):
            # already listed; consume the redundant request
            ctx.submit(RejectRequest(req.request_id, "DuplicateProvider"))
            outcomes.append(ValidationOutcome(req.request_id, req.domain, VERIFIED, "DuplicateProvider"))
            continue
        accepted.add(pair)
        ctx.submit(SubmitVerifiedDomain(req.request_id, req.domain, req.asset_hash))
        ctx.record(
            kind="asset_verified",
            request_id=req.request_id,
            domain=req.domain,
            requester=req.requester.hex(),
            creator=info.creator.hex(),
            available=info.available,
        )
        outcomes.append(ValidationOutcome(req.request_id, req.domain, VERIFIED))
    return outcomes


def run_provider_reverification(ctx: WorkerContext, batch_size: int = assets.DEFAULT_BATCH_SIZE) -> list[str]:
    if not ctx.is_author:
        return []
    batch, _ = assets.next_batch(assets.providers(ctx.state), assets.cursor(ctx.state), batch_size)
    if not batch:
        return []
    ctx.submit(AdvanceCursor(batch_size))
    removed = []
    for domain in batch:
        info, cause = fetch_remote_domain(ctx, domain)
        if cause == "TransportTimeout":
            continue
        if info is None or info.available:
            ctx.submit(RemoveProvider(domain))
            ctx.record(kind="provider_removal_submitted", domain=domain, cause=cause or "DomainAvailable")
            removed.append(domain)
    return removed


class NodeWorker:
    """The off-chain worker process of a single node."""

    def __init__(self, node: NodeId, kind: str, config: Optional[WorkerConfig] = None) -> None:
        self.node = node
        self.kind = kind
        self.config = config or WorkerConfig()
        self.peer_cache: set[NodeId] = set()
        self.runs = 0

    def run(self, ctx: WorkerContext, current_participants: set[NodeId]) -> None:
        self.runs += 1
        ctx.peer_cache = self.peer_cache
        if self.kind == "tld":
            run_mandatory_participation(ctx, current_participants)
        elif self.kind == "root":
            # cursor advance must precede new provider insertions in the block
            run_provider_reverification(ctx, self.config.batch_size)
            run_asset_validation(ctx, self.config.max_requests)
