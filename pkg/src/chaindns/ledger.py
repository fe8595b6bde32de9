"""Deterministic single-chain ledger: genesis, transaction dispatch,
block execution and replay."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from types import ModuleType
from typing import Iterable, Optional, Sequence

from . import assets, root, tld
from .calls import Transaction
from .codec import Encoder, decode_str_list, digest256, encode_str_list, encode_u64
from .errors import ChainDnsError, DispatchError, NotAuthorized, StaleNonce, TransactionError, UnknownCall
from .state import (
    AUTHOR_KEY,
    NUMBER_KEY,
    PALLETS_KEY,
    ChainState,
    DispatchContext,
    Overlay,
    StorageRead,
    account_nonce,
    nonce_key,
)
from .types import ID_SIZE, AccountId, NodeId, worker_account

log = logging.getLogger(__name__)

PALLETS: dict[str, ModuleType] = {"root": root, "tld": tld, "assets": assets}

RUNTIMES = {
    "root": ("root", "assets"),
    "tld": ("tld",),
    "plain": (),
}


class ReplayMismatch(ChainDnsError):
    pass


def genesis_state(
    kind: str = "plain",
    *,
    tld_name: Optional[str] = None,
    min_maintainers: int = 1,
    lifetime: int = assets.DEFAULT_LIFETIME,
    queue_cap: int = assets.DEFAULT_QUEUE_CAP,
) -> ChainState:
    """Build the genesis snapshot for a root, TLD or plain network."""
    if kind not in RUNTIMES:
        raise ValueError(f"unknown runtime kind {kind!r}")
    pallets = RUNTIMES[kind]
    entries: dict[bytes, bytes] = {
        PALLETS_KEY: encode_str_list(pallets),
        NUMBER_KEY: encode_u64(0),
    }
    if "root" in pallets:
        entries.update(root.genesis_entries())
    if "assets" in pallets:
        entries.update(assets.genesis_entries(lifetime, queue_cap))
    if "tld" in pallets:
        if tld_name is None:
            raise ValueError("a TLD network needs tld_name")
        entries.update(tld.genesis_entries(tld_name, min_maintainers))
    return ChainState(entries)


def runtime_pallets(state: StorageRead) -> tuple[str, ...]:
    raw = state.get(PALLETS_KEY)
    return tuple(decode_str_list(raw)) if raw is not None else ()


@dataclass(frozen=True)
class Rejection:
    tx_hash: bytes
    error: str
    included: bool  # False: dropped, fee unpaid; True: registry error, fee paid
    message: str = ""


@dataclass(frozen=True)
class Block:
    number: int
    parent_hash: bytes
    transactions: tuple[Transaction, ...]
    author: NodeId
    state_root: bytes
    rejected: tuple[Rejection, ...] = field(default=(), compare=False)

    @cached_property
    def extrinsics_root(self) -> bytes:
        return digest256(Encoder().seq(self.transactions, lambda e, tx: e.bytes(tx.encode())).finish())

    @cached_property
    def hash(self) -> bytes:
        header = (
            Encoder()
            .u64(self.number)
            .fixed(self.parent_hash)
            .fixed(self.author.bytes)
            .fixed(self.state_root)
            .fixed(self.extrinsics_root)
            .finish()
        )
        return digest256(header)


def _dispatch(store: Overlay, tx: Transaction, number: int, workers: frozenset, pallets: Sequence[str]) -> Optional[DispatchError]:
    expected = account_nonce(store, tx.origin)
    if tx.nonce != expected:
        raise StaleNonce(f"nonce {tx.nonce} != expected {expected}")
    if tx.call.PALLET not in pallets:
        raise UnknownCall(f"{type(tx.call).__name__} not served by this runtime")
    handler = PALLETS[tx.call.PALLET].CALLS[type(tx.call)]

    child = store.child()
    ctx = DispatchContext(child, tx.origin, number, workers)
    err: Optional[DispatchError] = None
    try:
        if tx.call.WORKER_ONLY and not ctx.is_worker:
            raise NotAuthorized(f"{type(tx.call).__name__} is worker-only")
        handler(ctx, tx.call)
        child.commit()
    except DispatchError as exc:
        err = exc
    store.put(nonce_key(tx.origin), encode_u64(expected + 1))
    return err


def apply_transaction(
    state: ChainState, tx: Transaction, *, workers: Iterable[AccountId] = ()
) -> tuple[ChainState, Optional[DispatchError]]:
    """Apply one transaction to a snapshot outside of block execution.

    Raises :class:`TransactionError` (stale nonce, unknown call) with the
    state untouched. A registry failure is returned alongside a state in which
    only the nonce and fee pool moved.
    """
    store = state.overlay()
    err = _dispatch(store, tx, state.number, frozenset(workers), runtime_pallets(state))
    return store.seal(state.fee_pool + tx.fee), err


def execute_block(
    parent: ChainState, number: int, author: NodeId, txs: Iterable[Transaction]
) -> tuple[ChainState, list[Transaction], list[Rejection]]:
    store = parent.overlay()
    workers = {worker_account(author)}
    # worker transactions submitted after the parent block was sealed are
    # authorized by the parent's author
    prev_author = store.get(AUTHOR_KEY)
    if prev_author is not None and len(prev_author) == ID_SIZE:
        workers.add(worker_account(NodeId(prev_author)))
    store.put(NUMBER_KEY, encode_u64(number))
    store.put(AUTHOR_KEY, author.bytes)

    pallets = runtime_pallets(store)
    for name in pallets:
        hook = getattr(PALLETS[name], "on_initialize", None)
        if hook is not None:
            hook(store, number)

    fee_pool = parent.fee_pool
    included: list[Transaction] = []
    rejected: list[Rejection] = []
    frozen_workers = frozenset(workers)
    for tx in txs:
        try:
            err = _dispatch(store, tx, number, frozen_workers, pallets)
        except TransactionError as exc:
            rejected.append(Rejection(tx.hash, exc.code, False, str(exc)))
            continue
        included.append(tx)
        fee_pool += tx.fee
        if err is not None:
            rejected.append(Rejection(tx.hash, err.code, True, str(err)))
    return store.seal(fee_pool), included, rejected


class Chain:
    """One network's canonical chain: sealed blocks and their snapshots.

    Only one thread may call :meth:`author_block`; any thread may read
    :attr:`head_state` (snapshots are immutable).
    """

    def __init__(self, genesis: ChainState, chain_id: str = "chain") -> None:
        self.chain_id = chain_id
        self.genesis = genesis
        self.genesis_hash = digest256(b"genesis:" + chain_id.encode() + genesis.root)
        self.blocks: list[Block] = []
        self._states: list[ChainState] = [genesis]

    @property
    def head_state(self) -> ChainState:
        return self._states[-1]

    @property
    def head_number(self) -> int:
        return len(self.blocks)

    @property
    def head_hash(self) -> bytes:
        return self.blocks[-1].hash if self.blocks else self.genesis_hash

    def state_at(self, number: int) -> ChainState:
        return self._states[number]

    def author_block(self, pending_txs: Iterable[Transaction], author: NodeId) -> Block:
        number = self.head_number + 1
        state, included, rejected = execute_block(self.head_state, number, author, pending_txs)
        block = Block(number, self.head_hash, tuple(included), author, state.root, tuple(rejected))
        for r in rejected:
            log.debug("%s #%d rejected %s: %s", self.chain_id, number, r.error, r.message)
        self.blocks.append(block)
        self._states.append(state)
        return block

    @classmethod
    def replay(cls, genesis: ChainState, blocks: Iterable[Block], chain_id: str = "chain") -> "Chain":
        """Re-execute recorded blocks and check every link and state root."""
        chain = cls(genesis, chain_id)
        for recorded in blocks:
            if recorded.parent_hash != chain.head_hash:
                raise ReplayMismatch(f"block {recorded.number}: parent hash mismatch")
            block = chain.author_block(recorded.transactions, recorded.author)
            if any(not r.included for r in block.rejected):
                raise ReplayMismatch(f"block {recorded.number}: recorded transaction no longer valid")
            if block.state_root != recorded.state_root:
                raise ReplayMismatch(f"block {recorded.number}: state root mismatch")
        return chain
