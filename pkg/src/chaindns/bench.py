"""Topology orchestration, load generation and the storage-growth model."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .calls import RegisterTld, Transaction
from .errors import ChainDnsError, ResolveError, SetupFailed
from .netsim import Network, NetworkConfig, PeerEvent, Simulator
from .resolver import Resolver, ResolverConfig
from .transport import TcpGateway, TcpTransport
from .types import AccountId, ChainSpec, NodeId, split_domain

log = logging.getLogger(__name__)

ROOT_ID = "root"


def tld_network_id(tld: str) -> str:
    return f"tld-{tld}"


def network_spec(net: Network, payload_size: int = 0) -> ChainSpec:
    """ChainSpec advertising a simulated network; optionally padded so the
    stored connection string has a realistic size."""
    body = json.dumps({"network": net.id, "bootnodes": [n.hex() for n in net.nodes[:2]]}, sort_keys=True).encode()
    if payload_size > len(body):
        body += b" " * (payload_size - len(body))
    return ChainSpec(net.id, net.id, body)


# -- plan / topology ------------------------------------------------------

@dataclass
class BenchPlan:
    tlds: list[str]
    domains: list[str]
    nodes: int = 4
    maintainers_per_domain: int = 1
    rps: int = 1000
    duration_s: float = 1.0
    total_requests: Optional[int] = None
    mode: str = "inproc"  # inproc | tcp
    clock: str = "wall"  # wall | sim
    seed: int = 0
    concurrency: int = 32
    sim_rpc_ms: float = 0.5  # per-RPC cost under the simulated clock
    spec_payload_bytes: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("inproc", "tcp"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.clock not in ("wall", "sim"):
            raise ValueError(f"unknown clock {self.clock!r}")
        if self.total_requests is None:
            self.total_requests = int(round(self.rps * self.duration_s))

    @classmethod
    def generate(
        cls,
        num_tlds: int,
        num_domains: int,
        *,
        weights: Optional[Sequence[float]] = None,
        seed: int = 0,
        **kw,
    ) -> "BenchPlan":
        """Synthesize a manifest: TLDs ``t0..``, domains spread uniformly
        (round-robin) or by ``weights``."""
        tlds = [f"t{i}" for i in range(num_tlds)]
        rng = random.Random(seed)
        domains = []
        for i in range(num_domains):
            if weights is None:
                tld = tlds[i % num_tlds]
            else:
                tld = rng.choices(tlds, weights=weights)[0]
            domains.append(f"d{i}.{tld}")
        return cls(tlds=tlds, domains=domains, seed=seed, **kw)


@dataclass
class Topology:
    sim: Simulator
    plan: BenchPlan
    root_spec: ChainSpec
    tld_specs: dict[str, ChainSpec]
    domain_specs: dict[str, ChainSpec] = field(default_factory=dict)
    creators: dict[str, AccountId] = field(default_factory=dict)
    maintainers: dict[str, list[NodeId]] = field(default_factory=dict)
    gateway: Optional[TcpGateway] = None

    def transport(self, mode: Optional[str] = None):
        if (mode or self.plan.mode) == "tcp":
            if self.gateway is None:
                self.gateway = TcpGateway(self.sim)
                self.gateway.start()
            return TcpTransport(self.gateway.addresses)
        return self.sim.transport

    def resolver(self, cache_capacity: int = 0, mode: Optional[str] = None, transport=None) -> Resolver:
        return Resolver(
            transport or self.transport(mode),
            ResolverConfig(self.root_spec, cache_capacity=cache_capacity),
            clock=lambda: float(self.sim.clock_ms),
        )

    def tld_network(self, tld: str) -> Network:
        return self.sim.networks[self.tld_specs[tld].id]

    def close(self) -> None:
        if self.gateway is not None:
            self.gateway.close()
            self.gateway = None


def _check_block(net: Network, tx_hashes: dict[bytes, str], step: str) -> None:
    for h, label in tx_hashes.items():
        status = net.tx_status.get(h, {})
        if status.get("status") != "included":
            raise SetupFailed(f"{step} {label}", status.get("error", status.get("status", "unknown")))


def orchestrate(plan: BenchPlan, sim: Optional[Simulator] = None) -> Topology:
    """Spawn (or adopt) the networks, register TLDs on the root, then claim
    every planned domain through the client protocol."""
    seen: set[str] = set()
    for d in plan.domains:
        if d in seen:
            raise SetupFailed("plan", f"duplicate domain {d!r}")
        seen.add(d)
        parts = split_domain(d)
        if parts is None or parts[1] not in plan.tlds:
            raise SetupFailed("plan", f"domain {d!r} is not under a planned TLD")
    if len(set(plan.tlds)) != len(plan.tlds):
        raise SetupFailed("plan", "duplicate TLD")

    sim = sim or Simulator(seed=plan.seed)
    root_net = next((n for n in sim.networks.values() if n.kind == "root"), None)
    if root_net is None:
        root_net = sim.spawn_network(NetworkConfig(ROOT_ID, node_count=plan.nodes, kind="root"))
    tld_nets = {n.config.tld: n for n in sim.networks.values() if n.kind == "tld"}
    for tld in plan.tlds:
        if tld not in tld_nets:
            tld_nets[tld] = sim.spawn_network(
                NetworkConfig(tld_network_id(tld), node_count=plan.nodes, kind="tld", tld=tld)
            )

    topo = Topology(
        sim, plan, network_spec(root_net, plan.spec_payload_bytes),
        {t: network_spec(tld_nets[t], plan.spec_payload_bytes) for t in plan.tlds},
    )

    # TLD registrations on the root
    submitted = {}
    for tld in plan.tlds:
        operator = AccountId.derive(f"tld-operator:{tld}")
        tx = Transaction(operator, root_net.next_nonce(operator), RegisterTld(tld, topo.tld_specs[tld]))
        submitted[root_net.submit(tx)] = tld
    if submitted:
        sim.advance(1)
        _check_block(root_net, submitted, "register_tld")

    # maintainer nodes contributed by each registrant join their TLD network
    for d in plan.domains:
        net = tld_nets[split_domain(d)[1]]
        nodes = [net.add_node() for _ in range(plan.maintainers_per_domain)]
        for node in nodes:
            sim.inject_peer_event(net, PeerEvent("join", node, net.chain.head_number + 1, net.id))
        topo.maintainers[d] = nodes

    resolver = topo.resolver(cache_capacity=0, mode="inproc")
    pending: dict[str, dict[bytes, str]] = {}
    for d in plan.domains:
        creator = AccountId.derive(f"registrant:{d}")
        payload = json.dumps({"network": f"net-{d}"}).encode()
        spec = ChainSpec(d, f"net-{d}", payload)
        try:
            h = resolver.claim_domain(d, spec, topo.maintainers[d], creator)
        except ChainDnsError as exc:
            raise SetupFailed(f"claim {d}", exc) from exc
        topo.domain_specs[d] = spec
        topo.creators[d] = creator
        pending.setdefault(tld_nets[split_domain(d)[1]].id, {})[h] = d
    if plan.domains:
        sim.advance(1)
        for net_id, hashes in sorted(pending.items()):
            _check_block(sim.networks[net_id], hashes, "claim")
    return topo


# -- load -----------------------------------------------------------------

@dataclass(frozen=True)
class Sample:
    request_index: int
    start_ns: int
    latency_ms: float
    outcome: str


def nearest_rank(sorted_values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile of an ascending sample; 0.0 when empty."""
    n = len(sorted_values)
    if n == 0:
        return 0.0
    rank = math.ceil(Fraction(pct) * n / 100)
    return sorted_values[min(max(rank, 1), n) - 1]


@dataclass
class LatencyReport:
    count: int
    success_count: int
    error_count: int
    median_ms: float
    p95_ms: float
    p99_ms: float
    max_ms: float
    throughput: list[int]
    samples: list[Sample] = field(default_factory=list, repr=False)
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], meta: Optional[dict] = None) -> "LatencyReport":
        samples = sorted(samples, key=lambda s: s.request_index)
        lat = sorted(s.latency_ms for s in samples)
        ok = sum(1 for s in samples if s.outcome == "ok")
        per_second: dict[int, int] = {}
        for s in samples:
            done_ns = s.start_ns + int(s.latency_ms * 1e6)
            sec = done_ns // 1_000_000_000
            per_second[sec] = per_second.get(sec, 0) + 1
        throughput = [per_second.get(i, 0) for i in range(max(per_second) + 1)] if per_second else []
        return cls(
            count=len(samples),
            success_count=ok,
            error_count=len(samples) - ok,
            median_ms=nearest_rank(lat, 50),
            p95_ms=nearest_rank(lat, 95),
            p99_ms=nearest_rank(lat, 99),
            max_ms=lat[-1] if lat else 0.0,
            throughput=throughput,
            samples=list(samples),
            meta=dict(meta or {}),
        )

    def summary(self) -> dict:
        out = asdict(self)
        out.pop("samples")
        return out

    def outcome_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for s in self.samples:
            counts[s.outcome] = counts.get(s.outcome, 0) + 1
        return dict(sorted(counts.items()))


class _CountingTransport:
    """Counts RPC round trips per thread; used by the simulated clock."""

    def __init__(self, inner) -> None:
        self.inner = inner
        self._local = threading.local()

    def reset(self) -> None:
        self._local.calls = 0

    @property
    def calls(self) -> int:
        return getattr(self._local, "calls", 0)

    def call(self, spec, method, params):
        self._local.calls = self.calls + 1
        return self.inner.call(spec, method, params)


class RateLimiter:
    """Token bucket: at most ``rps`` starts per second plus a small burst."""

    def __init__(self, rps: float, burst: Optional[int] = None) -> None:
        self.rps = rps
        self.capacity = burst if burst is not None else max(1, math.ceil(rps * 0.02))
        self._tokens = 1.0
        self._last = time.perf_counter()

    def acquire(self) -> None:
        while True:
            now = time.perf_counter()
            self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rps)
            self._last = now
            if self._tokens >= 1:
                self._tokens -= 1
                return
            time.sleep((1 - self._tokens) / self.rps)


def _outcome(resolver: Resolver, domain: str) -> str:
    try:
        resolver.resolve(domain)
        return "ok"
    except ResolveError as exc:
        return exc.code
    except Exception as exc:  # counted, never thrown
        return type(exc).__name__


def draw_domains(pool: Sequence[str], n: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    pool = sorted(pool)
    return [rng.choice(pool) for _ in range(n)]


def run_load(topo: Topology, plan: Optional[BenchPlan] = None, pick_set: Optional[Sequence[str]] = None) -> LatencyReport:
    """Issue ``plan.total_requests`` resolutions of randomly drawn domains."""
    plan = plan or topo.plan
    n = plan.total_requests if plan.rps > 0 else 0
    meta = {
        "rps": plan.rps, "total_requests": n, "mode": plan.mode, "clock": plan.clock,
        "seed": plan.seed, "nodes": plan.nodes,
    }
    if n == 0:
        return LatencyReport.from_samples([], meta)
    pool = list(pick_set if pick_set is not None else topo.domain_specs)
    if not pool:
        pool = [f"unplanned.{plan.tlds[0] if plan.tlds else 'none'}"]
    picks = draw_domains(pool, n, plan.seed)

    counting = _CountingTransport(topo.transport(plan.mode))
    resolver = topo.resolver(cache_capacity=0, transport=counting)

    if plan.clock == "sim":
        samples = []
        for i, domain in enumerate(picks):
            counting.reset()
            outcome = _outcome(resolver, domain)
            samples.append(Sample(i, round(i * 1e9 / plan.rps), counting.calls * plan.sim_rpc_ms, outcome))
        return LatencyReport.from_samples(samples, meta)

    samples: list[Optional[Sample]] = [None] * n
    issued_ns: list[int] = [0] * n
    t_start = time.perf_counter_ns()

    def job(i: int, domain: str) -> None:
        t0 = time.perf_counter_ns()
        outcome = _outcome(resolver, domain)
        t1 = time.perf_counter_ns()
        samples[i] = Sample(i, t0 - t_start, (t1 - t0) / 1e6, outcome)

    limiter = RateLimiter(plan.rps)
    with ThreadPoolExecutor(max_workers=plan.concurrency, thread_name_prefix="load") as pool_exec:
        futures = []
        for i, domain in enumerate(picks):
            limiter.acquire()
            issued_ns[i] = time.perf_counter_ns() - t_start
            futures.append(pool_exec.submit(job, i, domain))
        for f in futures:
            f.result()
    if isinstance(counting.inner, TcpTransport):
        counting.inner.close()
    done = [s if s is not None else Sample(i, issued_ns[i], 0.0, "Lost") for i, s in enumerate(samples)]
    report = LatencyReport.from_samples(done, meta)
    report.meta["issued_ns"] = issued_ns
    return report


def render_csv(report: LatencyReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["request_index", "start_ns", "latency_ms", "outcome"])
    for s in report.samples:
        w.writerow([s.request_index, s.start_ns, f"{s.latency_ms:.6f}", s.outcome])
    return buf.getvalue()


def report_emit(report: LatencyReport, path: str | os.PathLike) -> tuple[Path, Path]:
    """Write ``latency.csv`` and ``summary.json`` under directory ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "latency.csv", out / "summary.json"
    csv_path.write_text(render_csv(report), encoding="utf-8")
    summary = report.summary()
    summary["meta"] = {k: v for k, v in summary["meta"].items() if k != "issued_ns"}
    summary["outcomes"] = report.outcome_counts()
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, json_path


# -- storage model --------------------------------------------------------

@dataclass(frozen=True)
class StorageModel:
    domain_growth_rate: float  # domains per day
    string_size: float  # MB per connection string
    tld_share: float = 1.0

    def __post_init__(self) -> None:
        if self.domain_growth_rate < 0 or self.string_size < 0 or self.tld_share < 0:
            raise ValueError("storage model inputs must be nonnegative")
        if self.tld_share > 1:
            raise ValueError("tld_share must be <= 1")


def kb_to_mb(kb: float, kb_size: int = 1024) -> float:
    if kb_size not in (1000, 1024):
        raise ValueError("kb_size must be 1000 or 1024")
    return kb / kb_size


def storage_growth(model: StorageModel) -> tuple[float, float]:
    """(MB/day for a single registry network, MB/day for the busiest TLD)."""
    single = model.domain_growth_rate * model.string_size
    return single, single * model.tld_share
