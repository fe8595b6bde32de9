"""Hierarchical, DNS-like discovery registry for blockchain networks."""

from .codec import enc, parse_storage_key, storage_key_for
from .ledger import Block, Chain, apply_transaction, genesis_state
from .netsim import NetworkConfig, PeerEvent, Simulator
from .resolver import Resolver, ResolverConfig
from .state import ChainState
from .types import AccountId, ChainSpec, DomainInformation, NodeId, PendingRequest, asset_hash

__all__ = [
    "AccountId", "Block", "Chain", "ChainSpec", "ChainState", "DomainInformation",
    "NetworkConfig", "NodeId", "PeerEvent", "PendingRequest", "Resolver", "ResolverConfig",
    "Simulator", "apply_transaction", "asset_hash", "enc", "genesis_state",
    "parse_storage_key", "storage_key_for",
]

__version__ = "0.1.0"
