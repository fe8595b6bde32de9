"""Acceptance gate. Each test reports one PASS/FAIL line in the summary."""

import functools
import json
import math
import random
import string
import time

import pytest

from chaindns import assets, root, tld
from chaindns.bench import BenchPlan, StorageModel, kb_to_mb, orchestrate, render_csv, run_load, storage_growth
from chaindns.calls import (
    RegisterAssetForDomain,
    RegisterDomain,
    RegisterTld,
    RemoveProvider,
    RevokeDomain,
    SubmitVerifiedDomain,
    Transaction,
)
from chaindns.codec import decode_str_list, enc, storage_key_for
from chaindns.errors import DomainNotFound, DomainRevoked, InvalidDomain, ResolveError, TldNotFound
from chaindns.ledger import Chain, apply_transaction, execute_block, genesis_state
from chaindns.netsim import NetworkConfig, PeerEvent, Simulator
from chaindns.types import asset_hash, split_domain
from chaindns.workers import WorkerConfig
from conftest import ACCEPTANCE, AUTHOR, DATA, acct, node, spec
import oracles


def criterion(n, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*a, **kw):
            t0 = time.perf_counter()
            try:
                detail = fn(*a, **kw) or ""
            except BaseException as exc:
                ACCEPTANCE[n] = (title, False, f"{type(exc).__name__}: {str(exc)[:120]}")
                raise
            ACCEPTANCE[n] = (title, True, f"{detail}{'; ' if detail else ''}{time.perf_counter() - t0:.2f}s")
        return run
    return wrap


# 1 ---------------------------------------------------------------------------

@criterion(1, "golden encoding/key vectors")
def test_golden_vectors():
    vectors = [json.loads(l) for l in (DATA / "golden_vectors.jsonl").read_text(encoding="utf-8").splitlines()]
    inputs = [v["input"] for v in vectors]
    assert len(vectors) == 20
    assert "" in inputs and any(len(s) == 1 for s in inputs)
    assert any(len(s) == 63 and "." not in s for s in inputs)
    assert sum(1 for s in inputs if split_domain(s)) >= 5
    for v in vectors:
        # the file itself must agree with the independent oracle
        assert oracles.enc(v["input"]).hex() == v["enc_hex"]
        assert oracles.storage_key(v["input"]).hex() == v["key_hex"]
        assert enc(v["input"]).hex() == v["enc_hex"]
        assert storage_key_for(v["input"]).hex() == v["key_hex"]
    return "20/20 bit-identical"


# 2 ---------------------------------------------------------------------------

def _sequential_oracle(genesis, txs, registry):
    """Apply each transaction on its own, in order; return the owner."""
    state = genesis
    for tx in txs:
        state, _ = apply_transaction(state, tx)
    return registry(state)


@criterion(2, "FCFS registration, root and TLD")
def test_fcfs_property():
    rng = random.Random(2024)
    trials = 500
    for trial in range(trials):
        kind = "root" if trial % 2 == 0 else "tld"
        k = rng.randint(2, 8)
        g = genesis_state("root") if kind == "root" else genesis_state("tld", tld_name="chain")
        prior = None
        if rng.random() < 0.2:
            # name already owned before the block: nobody in the block wins
            prior = acct(f"prior{trial}")
            call = (RegisterTld("x", spec("prior")) if kind == "root"
                    else RegisterDomain("x.chain", spec("prior"), (node(f"pm{trial}"),)))
            g, err = apply_transaction(g, Transaction(prior, 0, call))
            assert err is None
        txs = []
        for i in range(k):
            who = acct(f"t{trial}c{i}")
            if kind == "root":
                call = RegisterTld("x", spec(f"s{i}"))
            else:
                call = RegisterDomain("x.chain", spec(f"s{i}"), (node(f"t{trial}m{i}"),))
            txs.append(Transaction(who, 0, call))
            if rng.random() < 0.3:  # unrelated traffic interleaved
                other = acct(f"t{trial}o{i}")
                noise = (RegisterTld(f"n{i}", spec("n")) if kind == "root"
                         else RegisterDomain(f"n{i}.chain", spec("n"), (node(f"t{trial}n{i}"),)))
                txs.append(Transaction(other, 0, noise))
        rng.shuffle(txs)

        if kind == "root":
            def registry(s):
                r = root.get_tld_record(s, "x")
                return r.registrant, r.chain_spec
        else:
            def registry(s):
                d = tld.get_domain(s, "x.chain")
                return d.creator, d.chain_specifications

        state, included, _ = execute_block(g, 1, AUTHOR, txs)
        expected = _sequential_oracle(g, txs, registry)
        assert registry(state) == expected
        contenders = [t for t in txs if getattr(t.call, "tld", getattr(t.call, "domain", None)) in ("x", "x.chain")]
        want = prior if prior is not None else contenders[0].origin
        assert registry(state)[0] == want
        assert len(included) == len(txs)
    return f"{trials} trials"


# 3 ---------------------------------------------------------------------------

def _revocations(net):
    return [(b.number, t.call.domain) for b in net.chain.blocks for t in b.transactions
            if isinstance(t.call, RevokeDomain) and not any(r.tx_hash == t.hash for r in b.rejected)]


@criterion(3, "mandatory-participation revocation")
def test_mandatory_participation():
    topo = orchestrate(BenchPlan(tlds=["chain"], domains=["alpha.chain", "beta.chain"]))
    sim = topo.sim
    net = topo.tld_network("chain")
    n2 = topo.maintainers["beta.chain"][0]
    sim.advance(2)

    # negative control: an unbound node departs
    unbound = net.peers()[0]
    assert tld.maintainer_domain(net.chain.head_state, unbound) is None
    h0 = net.chain.head_number + 1
    sim.inject_peer_event(net, PeerEvent("leave", unbound, h0, net.id))
    sim.advance(4)
    assert _revocations(net) == []
    assert all(not tld.query_domain(net.chain.head_state, d).available for d in topo.plan.domains)

    h = net.chain.head_number + 1
    sim.inject_peer_event(net, PeerEvent("leave", n2, h, net.id))
    while net.chain.head_number < h + 2:
        sim.advance(1)
        assert n2 not in net.peers() or net.chain.head_number < h
    state = net.chain.state_at(h + 2)
    assert tld.query_domain(state, "beta.chain").available
    assert n2 not in tld.maintainer_index(state)
    assert not tld.query_domain(state, "alpha.chain").available
    [(at, dom)] = _revocations(net)
    assert dom == "beta.chain" and at <= h + 2
    return f"leave at #{h}, revoked in #{at}; control: 0 revocations"


# 4 ---------------------------------------------------------------------------

def _label(rng, n=6):
    return rng.choice(string.ascii_lowercase) + "".join(rng.choices(string.ascii_lowercase + string.digits, k=n))


def _expected_outcome(sim, topo, name):
    """Oracle: read the registries directly."""
    parts = split_domain(name)
    if parts is None:
        return InvalidDomain
    rec = root.get_tld_record(sim.networks["root"].chain.head_state, parts[1])
    if rec is None:
        return TldNotFound
    info = tld.get_domain(sim.networks[rec.chain_spec.id].chain.head_state, name)
    if info is None:
        return DomainNotFound
    if info.available:
        return DomainRevoked
    return info.chain_specifications


@criterion(4, "resolution oracle equivalence")
def test_resolution_equivalence():
    rng = random.Random(4)
    checked = controls = 0
    for _ in range(100):
        tlds = sorted({_label(rng, 3) for _ in range(rng.randint(1, 4))})
        n_domains = rng.randint(5, 50)
        domains = []
        while len(domains) < n_domains:
            d = f"{_label(rng)}.{rng.choice(tlds)}"
            if d not in domains:
                domains.append(d)
        topo = orchestrate(BenchPlan(tlds=tlds, domains=domains, nodes=2, seed=rng.randrange(1 << 30)))
        sim = topo.sim
        # revoke a couple so DomainRevoked is exercised too
        for d in rng.sample(domains, 2):
            net = topo.tld_network(split_domain(d)[1])
            sim.inject_peer_event(net, PeerEvent("leave", topo.maintainers[d][0], net.chain.head_number + 1, net.id))
        sim.advance(2)
        r = topo.resolver(cache_capacity=rng.choice([0, 8]))
        for d in domains:
            want = _expected_outcome(sim, topo, d)
            if isinstance(want, type):
                with pytest.raises(want):
                    r.resolve(d)
            else:
                assert r.resolve(d) == want
            checked += 1
        control = set()
        while len(control) < 50:
            roll = rng.random()
            if roll < 0.4:
                control.add(f"{_label(rng)}.{rng.choice(tlds)}")
            elif roll < 0.7:
                control.add(f"{_label(rng)}.{_label(rng, 4)}")
            elif roll < 0.85:
                control.add(rng.choice(["Bad.name", "a..b", "nodot", "a.b.c", "-x.y", "x." + "y" * 64]))
            else:
                control.add(f"{_label(rng)}-{_label(rng)}.{rng.choice(tlds)}")
        control -= set(domains)
        for name in control:
            want = _expected_outcome(sim, topo, name)
            assert isinstance(want, type) and issubclass(want, ResolveError)
            with pytest.raises(want):
                r.resolve(name)
            controls += 1
    return f"{checked} registered + {controls} control names"


# 5 ---------------------------------------------------------------------------

def _maps_from_history(chain):
    """Rebuild asset->providers from included, successful transactions."""
    fwd = {}
    for b in chain.blocks:
        failed = {r.tx_hash for r in b.rejected}
        # pruning happens in on_initialize and never touches provider maps
        for t in b.transactions:
            if t.hash in failed:
                continue
            if isinstance(t.call, SubmitVerifiedDomain):
                fwd.setdefault(t.call.asset_hash, []).append(t.call.domain)
            elif isinstance(t.call, RemoveProvider):
                for h in list(fwd):
                    fwd[h] = [d for d in fwd[h] if d != t.call.domain]
                    if not fwd[h]:
                        del fwd[h]
    return fwd


def _raw_providers(state):
    return {
        k[len(assets.PROVIDERS_PREFIX):]: decode_str_list(v)
        for k, v in state.entries.items()
        if k.startswith(assets.PROVIDERS_PREFIX)
    }


def _check_maps(root_net):
    state = root_net.chain.head_state
    fwd = assets.asset_providers_map(state)
    back = assets.provider_assets_map(state)
    assert fwd == _raw_providers(state)
    inverse = {}
    for h, ds in fwd.items():
        for d in ds:
            inverse.setdefault(d, []).append(h)
    assert {d: sorted(hs) for d, hs in inverse.items()} == {d: sorted(hs) for d, hs in back.items()}
    assert sorted(back) == assets.providers(state)
    assert fwd == _maps_from_history(root_net.chain)


@criterion(5, "asset pipeline end-to-end")
def test_asset_pipeline():
    batch = 3
    lifetime = 20
    sim = Simulator(seed=5, worker_config=WorkerConfig(batch_size=batch))
    sim.spawn_network(NetworkConfig("root", kind="root", lifetime=lifetime))
    sim.spawn_network(NetworkConfig("tld-dead", kind="tld", tld="dead"))
    domains = [f"p{i}.chain" for i in range(10)] + ["lost.dead"]
    topo = orchestrate(BenchPlan(tlds=["chain", "dead"], domains=domains), sim)
    root_net = sim.networks["root"]
    r = topo.resolver()
    step = lambda: (sim.advance(1), _check_maps(root_net))  # noqa: E731

    for d in domains[:10]:
        r.register_assets(d, ["shared-token", f"own-{d}"], topo.creators[d])
    r.register_assets("p0.chain", ["stolen"], acct("impostor"))
    # 21 requests, at most 16 validated per block
    for _ in range(3):
        step()
    assert assets.pending_count(root_net.chain.head_state) == 0
    assert [d for d, _ in r.resolve_asset("own-p3.chain")] == ["p3.chain"]
    assert len(r.resolve_asset("shared-token")) == 10
    assert r.resolve_asset("stolen") == []
    verified = [e for e in sim.event_log if e.get("kind") == "asset_verified"]
    assert len(verified) == 20
    assert all(e["requester"] == e["creator"] and not e["available"] for e in verified)

    # a request that can never be validated: its TLD network is unreachable
    sim.set_partitioned("tld-dead")
    r.register_assets("lost.dead", ["never"], topo.creators["lost.dead"])
    step()
    req = next(q for q in assets.pending_requests(root_net.chain.head_state) if q.domain == "lost.dead")
    while root_net.chain.head_number < req.timestamp + lifetime:
        step()
        assert assets.get_request(root_net.chain.head_state, req.request_id) is not None
    step()
    assert root_net.chain.head_number == req.timestamp + lifetime + 1
    assert assets.get_request(root_net.chain.head_state, req.request_id) is None

    # revoke providers one at a time; measure root blocks until each leaves every list
    net = topo.tld_network("chain")
    took = []
    live = list(domains[:10])
    for victim in ("p7.chain", "p1.chain", "p4.chain"):
        n = len(assets.providers(root_net.chain.head_state))
        bound = math.ceil(n / batch)
        sim.inject_peer_event(net, PeerEvent("leave", topo.maintainers[victim][0], net.chain.head_number + 1, net.id))
        while not tld.query_domain(net.chain.head_state, victim).available:
            step()
        revoked_at = root_net.chain.head_number
        while victim in assets.providers(root_net.chain.head_state):
            step()
            assert root_net.chain.head_number - revoked_at <= bound
        took.append(f"{root_net.chain.head_number - revoked_at}/{bound}")
        live.remove(victim)
        state = root_net.chain.head_state
        assert all(victim not in ds for ds in assets.asset_providers_map(state).values())
        assert [d for d, _ in r.resolve_asset("shared-token")] == live
    for _ in range(3):
        step()
    return f"removal blocks/bound {', '.join(took)} (batch={batch})"


# 6 ---------------------------------------------------------------------------

@criterion(6, "worker purity / replay")
def test_replay():
    sim = Simulator(seed=6, worker_config=WorkerConfig(batch_size=2))
    topo = orchestrate(BenchPlan(tlds=["chain", "dot"], domains=[f"d{i}.chain" for i in range(6)] + ["k.dot"]), sim)
    r = topo.resolver()
    for d in topo.plan.domains:
        r.register_assets(d, [f"a-{d}", "common"], topo.creators[d])
    r.register_assets("d1.chain", ["x"], acct("mallory"))
    sim.advance(3)
    net = topo.tld_network("chain")
    for d in ("d2.chain", "d4.chain"):
        sim.inject_peer_event(net, PeerEvent("leave", topo.maintainers[d][0], net.chain.head_number + 1, net.id))
    sim.inject_peer_event(net, PeerEvent("leave", net.peers()[1], net.chain.head_number + 2, net.id))
    sim.advance(8)
    assert sum(1 for b in sim.networks["root"].chain.blocks for t in b.transactions if isinstance(t.call, RemoveProvider))
    total = 0
    for nid, live in sorted(sim.networks.items()):
        replayed = Chain.replay(live.config.build_genesis(), live.chain.blocks, nid)
        assert [b.state_root for b in replayed.blocks] == [b.state_root for b in live.chain.blocks]
        assert [replayed.state_at(i).root for i in range(live.chain.head_number + 1)] == [
            live.chain.state_at(i).root for i in range(live.chain.head_number + 1)
        ]
        assert replayed.head_hash == live.chain.head_hash
        total += len(live.chain.blocks)
    return f"{len(sim.networks)} chains, {total} blocks"


# 7 ---------------------------------------------------------------------------

@criterion(7, "storage model")
def test_storage_model():
    single, _ = storage_growth(StorageModel(244_000, kb_to_mb(767)))
    _, top = storage_growth(StorageModel(244_000, kb_to_mb(767), 0.3648))
    e1 = abs(single - 182_761) / 182_761
    e2 = abs(top - 66_671) / 66_671
    assert e1 < 1e-3 and e2 < 1e-3
    return f"{single:.1f} MB/day (err {e1:.2e}), {top:.1f} MB/day (err {e2:.2e})"


# 8 ---------------------------------------------------------------------------

@criterion(8, "benchmark harness properties")
def test_bench_harness(tmp_path):
    plan = BenchPlan.generate(2, 12, nodes=4, rps=1000, total_requests=10_000, seed=8, concurrency=16)
    topo = orchestrate(plan)
    assert len(topo.sim.networks) == 3
    assert all(len(n.peers()) >= 4 for n in topo.sim.networks.values())
    report = run_load(topo, plan)
    # (a) every request has an outcome
    assert report.count == 10_000
    assert sorted(s.request_index for s in report.samples) == list(range(10_000))
    assert "Lost" not in report.outcome_counts()
    assert report.success_count == 10_000
    # rate ceiling on issue times
    issued = report.meta["issued_ns"]
    j = worst = 0
    for i, t in enumerate(issued):
        while issued[j] < t - 1_000_000_000:
            j += 1
        worst = max(worst, i - j + 1)
    assert worst <= 1.05 * plan.rps
    # (b) percentiles vs sort-based oracle
    lat = [s.latency_ms for s in report.samples]
    assert report.median_ms == oracles.nearest_rank(lat, 50)
    assert report.p95_ms == oracles.nearest_rank(lat, 95)
    assert report.p99_ms == oracles.nearest_rank(lat, 99)
    assert report.max_ms == max(lat)
    # (c) byte-identical CSVs for the same seed
    csvs = []
    for _ in range(2):
        p = BenchPlan.generate(2, 12, nodes=4, rps=1000, total_requests=2000, seed=81, clock="sim")
        csvs.append(render_csv(run_load(orchestrate(p), p)).encode())
    assert csvs[0] == csvs[1]
    # (d) emitted only
    medians = {}
    for nodes in (4, 8):
        p = BenchPlan.generate(2, 12, nodes=nodes, rps=1000, total_requests=1000, seed=8, concurrency=16)
        medians[nodes] = run_load(orchestrate(p), p).median_ms
    print(f"median latency: 4 nodes {medians[4]:.3f} ms, 8 nodes {medians[8]:.3f} ms")
    return (f"p50={report.median_ms:.3f}ms p99={report.p99_ms:.3f}ms, peak {worst}/s; "
            f"medians 4n={medians[4]:.3f}ms 8n={medians[8]:.3f}ms (not asserted)")


# 9 ---------------------------------------------------------------------------

@criterion(9, "hash privacy")
def test_hash_privacy():
    rng = random.Random(9)
    topo = orchestrate(BenchPlan(tlds=["chain"], domains=["alpha.chain"]))
    seen = []

    class Spy:
        def __init__(self, inner):
            self.inner = inner

        def call(self, spec_, method, params):
            if method == "author_submitExtrinsic":
                seen.append(bytes.fromhex(params[0]))
            return self.inner.call(spec_, method, params)

    r = topo.resolver(transport=Spy(topo.sim.transport))
    ids = set()
    while len(ids) < 100:
        ids.add("".join(rng.choices(string.ascii_letters + string.digits + ":-_/", k=rng.randint(8, 40))))
    ids = sorted(ids)
    r.register_assets("alpha.chain", ids, topo.creators["alpha.chain"])
    assert len(seen) == 100
    for raw, asset_id in zip(seen, ids):
        tx = Transaction.decode(raw)
        assert isinstance(tx.call, RegisterAssetForDomain) and tx.call.asset_hash == asset_hash(asset_id)
        for other in ids:
            assert other.encode() not in raw
    topo.sim.advance(3)
    blob = b"".join(k + v for k, v in topo.sim.networks["root"].chain.head_state.entries.items())
    assert not any(i.encode() in blob for i in ids)
    return "100 ids, 0 leaks"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
