"""Deterministic in-process simulator for several cooperating networks.

Each :class:`Network` owns one canonical :class:`~chaindns.ledger.Chain`,
a pending pool and a membership set. Blocks are authored round-robin over
the connected nodes; after every tick's seals, each connected node's
off-chain worker runs. RPC requests arrive as JSON envelopes, either
in-process or over the local TCP gateway in :mod:`chaindns.transport`.
"""

from __future__ import annotations

import itertools
import json
import logging
import threading
from dataclasses import dataclass, field
from os import PathLike
from typing import TYPE_CHECKING, Any, Callable, Iterable, Optional

from . import assets, root, tld
from .calls import Transaction
from .codec import storage_key_for
from .errors import (
    ChainDnsError,
    DuplicateNetworkId,
    InvalidEvent,
    NetworkUnreachable,
    UnknownMethod,
)
from .ledger import Block, Chain, genesis_state, runtime_pallets
from .state import ChainState, account_nonce
from .types import AccountId, DomainInformation, NodeId

if TYPE_CHECKING:
    from .workers import WorkerConfig

log = logging.getLogger(__name__)

RPC_METHODS = (
    "root_queryTld",
    "tld_queryDomain",
    "asset_queryProviders",
    "asset_pendingCount",
    "state_getStorage",
    "system_peers",
    "author_submitExtrinsic",
    "system_accountNextIndex",
    "author_extrinsicStatus",
    "chain_getHead",
)


@dataclass
class NetworkConfig:
    network_id: str
    node_count: int = 4
    block_interval: int = 6000  # simulated ms
    min_maintainers: int = 1
    kind: str = "plain"  # root | tld | plain
    tld: Optional[str] = None
    lifetime: int = assets.DEFAULT_LIFETIME
    queue_cap: int = assets.DEFAULT_QUEUE_CAP
    genesis: Optional[ChainState] = None

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        if self.block_interval <= 0:
            raise ValueError("block_interval must be > 0")
        if self.kind == "tld" and not self.tld:
            raise ValueError("a tld network needs a tld name")

    def build_genesis(self) -> ChainState:
        if self.genesis is not None:
            return self.genesis
        return genesis_state(
            self.kind,
            tld_name=self.tld,
            min_maintainers=self.min_maintainers,
            lifetime=self.lifetime,
            queue_cap=self.queue_cap,
        )

    @classmethod
    def from_json(cls, obj: dict) -> "NetworkConfig":
        genesis = None
        if "genesis" in obj:
            g = obj["genesis"]
            genesis = ChainState(
                {bytes.fromhex(k): bytes.fromhex(v) for k, v in g.get("entries", {}).items()},
                int(g.get("fee_pool", 0)),
            )
        return cls(
            network_id=obj["network_id"],
            node_count=int(obj.get("node_count", 4)),
            block_interval=int(obj.get("block_interval", 6000)),
            min_maintainers=int(obj.get("min_maintainers", 1)),
            kind=obj.get("kind", "plain"),
            tld=obj.get("tld"),
            lifetime=int(obj.get("lifetime", assets.DEFAULT_LIFETIME)),
            queue_cap=int(obj.get("queue_cap", assets.DEFAULT_QUEUE_CAP)),
            genesis=genesis,
        )


@dataclass(frozen=True)
class PeerEvent:
    kind: str  # join | leave
    node: NodeId
    at_block: int
    network: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("join", "leave"):
            raise InvalidEvent(f"unknown peer event kind {self.kind!r}")


def node_id_for(network_id: str, index: int) -> NodeId:
    return NodeId.derive(f"{network_id}/node{index}")


def domain_info_json(info: DomainInformation) -> dict:
    return {
        "creator": info.creator.hex(),
        "chain_spec": info.chain_specifications.to_json() if info.chain_specifications else None,
        "maintainers": [n.hex() for n in info.maintainers],
        "available": info.available,
    }


class Network:
    """Handle for one simulated network."""

    def __init__(self, config: NetworkConfig, make_worker: Callable[[NodeId], Any]) -> None:
        self.config = config
        self.id = config.network_id
        self.chain = Chain(config.build_genesis(), config.network_id)
        self.nodes: list[NodeId] = [node_id_for(self.id, i) for i in range(config.node_count)]
        self._connected: set[NodeId] = set(self.nodes)
        self.workers = {n: make_worker(n) for n in self.nodes}
        self._make_worker = make_worker
        self._pool: list[Transaction] = []
        self._pool_lock = threading.Lock()
        self._scheduled: dict[int, list[PeerEvent]] = {}
        self.tx_status: dict[bytes, dict] = {}
        self.authors: list[NodeId] = []
        self.partitioned = False
        self._route = itertools.count()

    # -- membership ----------------------------------------------------

    @property
    def kind(self) -> str:
        return self.config.kind

    def peers(self) -> list[NodeId]:
        """Connected nodes in join order."""
        return [n for n in self.nodes if n in self._connected]

    def peers_of(self, node: NodeId) -> list[NodeId]:
        return [n for n in self.peers() if n != node]

    def is_connected(self, node: NodeId) -> bool:
        return node in self._connected

    def add_node(self) -> NodeId:
        """Create a fresh, not-yet-connected node (e.g. a maintainer to be
        contributed by a registrant). Connect it with a join event."""
        node = node_id_for(self.id, len(self.nodes))
        self.nodes.append(node)
        self.workers[node] = self._make_worker(node)
        return node

    def _projected_members(self, at_block: int) -> set[NodeId]:
        """Membership once every event scheduled up to ``at_block`` applied."""
        members = set(self._connected)
        for h in sorted(self._scheduled):
            if h > at_block:
                break
            for ev in self._scheduled[h]:
                (members.add if ev.kind == "join" else members.discard)(ev.node)
        return members

    def schedule(self, ev: PeerEvent) -> None:
        members = self._projected_members(ev.at_block)
        if ev.kind == "leave" and ev.node not in members:
            raise InvalidEvent(f"{ev.node!r} is not connected to {self.id}")
        if ev.kind == "join":
            if ev.node in members:
                raise InvalidEvent(f"{ev.node!r} is already connected to {self.id}")
            if ev.node not in self.nodes:
                self.nodes.append(ev.node)
                self.workers[ev.node] = self._make_worker(ev.node)
        if ev.at_block <= self.chain.head_number:
            self._apply(ev)
        else:
            self._scheduled.setdefault(ev.at_block, []).append(ev)

    def _apply(self, ev: PeerEvent) -> None:
        if ev.kind == "leave":
            self._connected.discard(ev.node)
        else:
            self._connected.add(ev.node)

    def apply_events_for(self, number: int) -> None:
        for ev in self._scheduled.pop(number, []):
            self._apply(ev)

    def author_for(self, number: int) -> Optional[NodeId]:
        members = self.peers()
        if not members:
            return None
        return members[(number - 1) % len(members)]

    # -- pool ------------------------------------------------------------

    def submit(self, tx: Transaction) -> bytes:
        with self._pool_lock:
            self._pool.append(tx)
            self.tx_status[tx.hash] = {"status": "pending"}
        return tx.hash

    def next_nonce(self, account: AccountId) -> int:
        with self._pool_lock:
            queued = sum(1 for tx in self._pool if tx.origin == account)
        return account_nonce(self.chain.head_state, account) + queued

    def pending(self) -> list[Transaction]:
        with self._pool_lock:
            return list(self._pool)

    def seal(self) -> Optional[Block]:
        number = self.chain.head_number + 1
        self.apply_events_for(number)
        author = self.author_for(number)
        if author is None:
            log.warning("%s: no connected nodes, block %d not produced", self.id, number)
            return None
        with self._pool_lock:
            txs, self._pool = self._pool, []
        block = self.chain.author_block(txs, author)
        self.authors.append(author)
        failed = {r.tx_hash: r for r in block.rejected}
        for tx in txs:
            r = failed.get(tx.hash)
            if r is None:
                self.tx_status[tx.hash] = {"status": "included", "block": number}
            elif r.included:
                self.tx_status[tx.hash] = {"status": "failed", "block": number, "error": r.error}
            else:
                self.tx_status[tx.hash] = {"status": "dropped", "block": number, "error": r.error}
        return block

    # -- rpc -------------------------------------------------------------

    @property
    def reachable(self) -> bool:
        return not self.partitioned and bool(self._connected)

    def route(self) -> NodeId:
        members = self.peers()
        if self.partitioned or not members:
            raise NetworkUnreachable(self.id)
        return members[next(self._route) % len(members)]

    def handle(self, method: str, params: list) -> Any:
        self.route()
        state = self.chain.head_state
        pallets = runtime_pallets(state)
        if method == "system_peers":
            return [n.hex() for n in self.peers()]
        if method == "state_getStorage":
            raw = state.get(bytes.fromhex(params[0].removeprefix("0x")))
            return raw.hex() if raw is not None else None
        if method == "chain_getHead":
            return {
                "number": self.chain.head_number,
                "hash": self.chain.head_hash.hex(),
                "state_root": state.root.hex(),
            }
        if method == "author_submitExtrinsic":
            tx = Transaction.decode(bytes.fromhex(params[0].removeprefix("0x")))
            return self.submit(tx).hex()
        if method == "system_accountNextIndex":
            return self.next_nonce(AccountId.from_hex(params[0]))
        if method == "author_extrinsicStatus":
            return self.tx_status.get(bytes.fromhex(params[0].removeprefix("0x")))
        if method == "root_queryTld" and "root" in pallets:
            record = root.get_tld_record(state, params[0])
            return record.chain_spec.to_json() if record else None
        if method == "tld_queryDomain" and "tld" in pallets:
            info = tld.get_domain(state, params[0])
            return domain_info_json(info) if info else None
        if method == "asset_queryProviders" and "assets" in pallets:
            return assets.query_asset_providers(state, bytes.fromhex(params[0].removeprefix("0x")))
        if method == "asset_pendingCount" and "assets" in pallets:
            return assets.pending_count(state)
        raise UnknownMethod(f"{method} not served by {self.id}")


@dataclass
class Scenario:
    networks: list[NetworkConfig]
    events: list[PeerEvent] = field(default_factory=list)
    seed: int = 0
    domains: list[dict] = field(default_factory=list)
    blocks: Optional[int] = None

    @classmethod
    def from_json(cls, obj: dict) -> "Scenario":
        networks = [NetworkConfig.from_json(n) for n in obj.get("networks", [])]
        by_id = {n.network_id: n for n in networks}
        events = []
        for ev in obj.get("events", []):
            net = ev["network"]
            if net not in by_id:
                raise InvalidEvent(f"event names unknown network {net!r}")
            node = ev["node"]
            node_id = node_id_for(net, node) if isinstance(node, int) else NodeId.from_hex(node)
            events.append(PeerEvent(ev["kind"], node_id, int(ev["at_block"]), net))
        domains = [d if isinstance(d, dict) else {"domain": d} for d in obj.get("domains", [])]
        return cls(networks, events, int(obj.get("seed", 0)), domains, obj.get("blocks"))

    @classmethod
    def load(cls, path: str | PathLike) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


class Simulator:
    """Single logical scheduler over every spawned network."""

    def __init__(self, seed: int = 0, worker_config: Optional["WorkerConfig"] = None) -> None:
        from .transport import InProcessTransport
        from .workers import WorkerConfig

        self.seed = seed
        self.worker_config = worker_config or WorkerConfig()
        self.networks: dict[str, Network] = {}
        self.clock_ms = 0
        self.tick = 0
        self.event_log: list[dict] = []
        self.transport = InProcessTransport(self)
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    @classmethod
    def from_scenario(cls, scenario: Scenario, *, with_events: bool = True) -> "Simulator":
        """Spawn the scenario's networks; ``with_events=False`` leaves the
        event script for the caller (e.g. after setup added maintainers)."""
        sim = cls(seed=scenario.seed)
        for cfg in scenario.networks:
            sim.spawn_network(cfg)
        if with_events:
            sim.apply_script(scenario.events)
        return sim

    def apply_script(self, events: Iterable[PeerEvent]) -> None:
        for ev in events:
            self.inject_peer_event(self.networks[ev.network], ev)

    def spawn_network(self, config: NetworkConfig) -> Network:
        if config.network_id in self.networks:
            raise DuplicateNetworkId(config.network_id)
        from .workers import NodeWorker

        net = Network(config, lambda node, _kind=config.kind: NodeWorker(node, _kind, self.worker_config))
        self.networks[config.network_id] = net
        return net

    def network(self, network_id: str) -> Network:
        return self.networks[network_id]

    def inject_peer_event(self, net: Network | str, ev: PeerEvent) -> None:
        if isinstance(net, str):
            net = self.networks[net]
        net.schedule(ev)

    def set_partitioned(self, net: Network | str, partitioned: bool = True) -> None:
        if isinstance(net, str):
            net = self.networks[net]
        net.partitioned = partitioned

    def advance(self, blocks: int = 1, network: Network | str | None = None) -> None:
        """Seal ``blocks`` blocks on each target network, in network-id order
        per tick, then run the off-chain workers of every node that imported
        a block that tick."""
        if blocks < 1:
            raise ValueError("blocks must be >= 1")
        if network is None:
            targets = [self.networks[k] for k in sorted(self.networks)]
        else:
            targets = [self.networks[network] if isinstance(network, str) else network]
        for _ in range(blocks):
            sealed = [(net, net.seal()) for net in targets]
            self.tick += 1
            self.clock_ms += max(net.config.block_interval for net in targets)
            for net, block in sealed:
                if block is not None:
                    self._run_workers(net, block)

    def _run_workers(self, net: Network, block: Block) -> None:
        from .workers import WorkerContext

        participants = set(net.peers())
        for node in net.peers():
            ctx = WorkerContext(
                self_node=node,
                is_author=(node == block.author),
                network=net,
                transport=self.transport,
                block_number=block.number,
                log=self.event_log,
            )
            net.workers[node].run(ctx, participants)

    # -- rpc -------------------------------------------------------------

    def rpc(self, network_id: str, envelope: dict) -> dict:
        """Answer one RPC envelope; errors come back in the envelope."""
        rid = envelope.get("id")
        method = envelope.get("method", "")
        params = envelope.get("params", [])
        resp: dict = {"id": rid, "method": method, "params": params}
        try:
            if method not in RPC_METHODS:
                raise UnknownMethod(method)
            net = self.networks.get(network_id)
            if net is None:
                raise NetworkUnreachable(network_id)
            resp["response"] = net.handle(method, list(params))
        except ChainDnsError as exc:
            resp["error"] = {"code": exc.code, "message": str(exc)}
        except (ValueError, IndexError, TypeError) as exc:
            resp["error"] = {"code": "InvalidParams", "message": str(exc)}
        return resp

    def handle_wire(self, network_id: str, line: str) -> str:
        try:
            envelope = json.loads(line)
            if not isinstance(envelope, dict):
                raise ValueError("envelope must be a JSON object")
        except ValueError as exc:
            return json.dumps({"id": None, "error": {"code": "ParseError", "message": str(exc)}})
        return json.dumps(self.rpc(network_id, envelope))

    # -- inspection helpers ------------------------------------------------

    def state_roots(self) -> dict[str, list[bytes]]:
        return {nid: [b.state_root for b in net.chain.blocks] for nid, net in sorted(self.networks.items())}

    def query_storage(self, network_id: str, domain: str) -> Optional[bytes]:
        return self.networks[network_id].chain.head_state.get(storage_key_for(domain))
