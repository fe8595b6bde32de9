"""``bench`` command line: orchestrate, load, storage, demo."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

from . import assets, tld
from .bench import (
    BenchPlan,
    StorageModel,
    kb_to_mb,
    orchestrate,
    report_emit,
    run_load,
    storage_growth,
)
from .errors import ChainDnsError, ResolveError
from .netsim import PeerEvent, Scenario, Simulator
from .types import AccountId, ChainSpec


SEED_ENV = "CHAINDNS_SEED"


def _seed(args_seed: int) -> int:
    env = os.environ.get(SEED_ENV)
    return int(env) if env not in (None, "") else args_seed


def cmd_orchestrate(args: argparse.Namespace) -> int:
    scenario = Scenario.load(args.scenario)
    scenario.seed = _seed(scenario.seed)
    sim = Simulator.from_scenario(scenario, with_events=False)
    tlds = sorted(n.config.tld for n in sim.networks.values() if n.kind == "tld")
    domains = [d["domain"] for d in scenario.domains]
    plan = BenchPlan(
        tlds=tlds,
        domains=domains,
        maintainers_per_domain=max([int(d.get("maintainers", 1)) for d in scenario.domains] or [1]),
        seed=scenario.seed,
    )
    topo = orchestrate(plan, sim)
    # events may name maintainer nodes that only exist after setup
    sim.apply_script(scenario.events)
    last_event = max((ev.at_block for ev in scenario.events), default=0)
    blocks = args.blocks if args.blocks is not None else scenario.blocks
    if blocks is None:
        blocks = max(1, last_event + 2 - sim.tick)
    if blocks > 0:
        sim.advance(blocks)

    resolver = topo.resolver(cache_capacity=0)
    resolutions = {}
    for d in domains:
        try:
            resolutions[d] = {"outcome": "ok", "chain_spec": resolver.resolve(d).to_json()}
        except ResolveError as exc:
            resolutions[d] = {"outcome": exc.code}
    summary = {
        "seed": scenario.seed,
        "ticks": sim.tick,
        "networks": {
            nid: {
                "kind": net.kind,
                "head": net.chain.head_number,
                "state_root": net.chain.head_state.root.hex(),
                "peers": len(net.peers()),
                "fee_pool": net.chain.head_state.fee_pool,
            }
            for nid, net in sorted(sim.networks.items())
        },
        "domains": resolutions,
    }
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_load(args: argparse.Namespace) -> int:
    seed = _seed(args.seed)
    plan = BenchPlan.generate(
        args.tlds,
        args.domains,
        seed=seed,
        nodes=args.nodes,
        rps=args.rps,
        duration_s=args.duration,
        total_requests=args.total,
        mode=args.mode,
        clock=args.clock,
        concurrency=args.concurrency,
    )
    topo = orchestrate(plan)
    try:
        report = run_load(topo, plan)
    finally:
        topo.close()
    csv_path, json_path = report_emit(report, args.out)
    print(
        f"n={report.count} ok={report.success_count} err={report.error_count} "
        f"p50={report.median_ms:.3f}ms p95={report.p95_ms:.3f}ms "
        f"p99={report.p99_ms:.3f}ms max={report.max_ms:.3f}ms"
    )
    print(f"wrote {csv_path} and {json_path}")
    return 0


def cmd_storage(args: argparse.Namespace) -> int:
    model = StorageModel(args.domains_per_day, kb_to_mb(args.string_kb, args.kb), args.tld_share)
    single, top = storage_growth(model)
    print(json.dumps({
        "domains_per_day": args.domains_per_day,
        "string_mb": model.string_size,
        "single_network_mb_per_day": single,
        "top_tld_share": args.tld_share,
        "top_tld_mb_per_day": top,
    }, indent=2))
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    say = print
    plan = BenchPlan(tlds=["chain"], domains=["alpha.chain", "beta.chain"], seed=_seed(args.seed))
    topo = orchestrate(plan)
    sim = topo.sim
    say(f"networks: {', '.join(sorted(sim.networks))}; head ticks={sim.tick}")
    resolver = topo.resolver(cache_capacity=16)
    for d in plan.domains:
        say(f"resolve {d} -> {resolver.resolve(d).id}")

    tld_net = topo.tld_network("chain")
    gamma_node = tld_net.add_node()
    sim.inject_peer_event(tld_net, PeerEvent("join", gamma_node, tld_net.chain.head_number + 1, tld_net.id))

    gamma_owner = AccountId.derive("registrant:gamma.chain")
    resolver.claim_domain(
        "gamma.chain", ChainSpec("gamma", "net-gamma.chain", b"{}"), [gamma_node], gamma_owner,
        wait=lambda: sim.advance(1),
    )
    say(f"claimed gamma.chain -> resolves to {resolver.resolve('gamma.chain').id}")
    try:
        resolver.claim_domain("gamma.chain", ChainSpec("x", "x", b""), [tld_net.add_node()], gamma_owner)
    except ChainDnsError as exc:
        say(f"second claim of gamma.chain refused: {exc.code}")

    owner = topo.creators["beta.chain"]
    resolver.register_assets("beta.chain", ["token:BETA", "nft:beta-art"], owner, wait=lambda: sim.advance(1))
    sim.advance(2)
    for asset_id in ("token:BETA", "nft:beta-art", "token:UNKNOWN"):
        say(f"asset {asset_id!r} providers: {[d for d, _ in resolver.resolve_asset(asset_id)]}")

    maintainer = topo.maintainers["beta.chain"][0]
    h = tld_net.chain.head_number + 1
    say(f"maintainer of beta.chain leaves {tld_net.id} at block {h}")
    sim.inject_peer_event(tld_net, PeerEvent("leave", maintainer, h, tld_net.id))
    sim.advance(2)
    info = tld.query_domain(tld_net.chain.head_state, "beta.chain")
    say(f"beta.chain available={info.available} (revoked by block {tld_net.chain.head_number})")
    resolver.cache.clear()
    try:
        resolver.resolve("beta.chain")
    except ResolveError as exc:
        say(f"resolve beta.chain -> {exc.code}")
    sim.advance(2)
    root_state = sim.networks["root"].chain.head_state
    say(f"providers after re-verification: {assets.providers(root_state)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("orchestrate", help="spawn and populate a topology from a scenario file")
    o.add_argument("--scenario", required=True)
    o.add_argument("--blocks", type=int, default=None, help="blocks to advance after setup")
    o.set_defaults(func=cmd_orchestrate)

    ld = sub.add_parser("load", help="run a resolution load test")
    ld.add_argument("--rps", type=int, required=True)
    ld.add_argument("--duration", type=float, required=True, help="seconds")
    ld.add_argument("--total", type=int, default=None)
    ld.add_argument("--seed", type=int, default=0)
    ld.add_argument("--mode", choices=("inproc", "tcp"), default="inproc")
    ld.add_argument("--clock", choices=("wall", "sim"), default="wall")
    ld.add_argument("--out", required=True)
    ld.add_argument("--nodes", type=int, default=4)
    ld.add_argument("--tlds", type=int, default=2)
    ld.add_argument("--domains", type=int, default=10)
    ld.add_argument("--concurrency", type=int, default=32)
    ld.set_defaults(func=cmd_load)

    s = sub.add_parser("storage", help="storage growth estimate")
    s.add_argument("--domains-per-day", type=float, required=True)
    s.add_argument("--string-kb", type=float, required=True)
    s.add_argument("--kb", type=int, choices=(1024, 1000), default=1024)
    s.add_argument("--tld-share", type=float, default=1.0)
    s.set_defaults(func=cmd_storage)

    d = sub.add_parser("demo", help="end-to-end walkthrough")
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_demo)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ChainDnsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
