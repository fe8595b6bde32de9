import random

import pytest
from hypothesis import given, settings, strategies as st

from chaindns import root
from chaindns.calls import RegisterTld, Transaction
from chaindns.errors import NotFound
from chaindns.ledger import genesis_state
from chaindns.netsim import NetworkConfig, Simulator
from conftest import Ledger, acct, spec


def test_register_and_query(root_ledger):
    root_ledger.tx(acct("a"), RegisterTld("chain", spec("chain")))
    assert root_ledger.seal() == {}
    assert root.query_tld(root_ledger.state, "chain") == spec("chain")
    assert root.get_tld_record(root_ledger.state, "chain").registrant == acct("a")


def test_register_twice_is_taken(root_ledger):
    root_ledger.tx(acct("a"), RegisterTld("chain", spec("chain")))
    root_ledger.seal()
    t = root_ledger.tx(acct("b"), RegisterTld("chain", spec("other")))
    assert root_ledger.seal()[t.hash] == "TldTaken"
    assert root.query_tld(root_ledger.state, "chain") == spec("chain")


@pytest.mark.parametrize("bad", ["Ch@in", "", "-x", "a" * 64, "UPPER", "a.b"])
def test_invalid_labels(root_ledger, bad):
    t = root_ledger.tx(acct("a"), RegisterTld(bad, spec("x")))
    assert root_ledger.seal()[t.hash] == "InvalidLabel"


def test_query_unknown():
    with pytest.raises(NotFound):
        root.query_tld(genesis_state("root"), "nope")


def test_query_same_block_not_visible_until_sealed():
    sim = Simulator()
    net = sim.spawn_network(NetworkConfig("root", kind="root"))
    net.submit(Transaction(acct("a"), 0, RegisterTld("chain", spec("chain"))))
    with pytest.raises(NotFound):
        root.query_tld(net.chain.head_state, "chain")
    assert sim.rpc("root", {"id": 1, "method": "root_queryTld", "params": ["chain"]})["response"] is None
    sim.advance(1)
    assert root.query_tld(net.chain.head_state, "chain") == spec("chain")


def test_list_sorted_and_stable(root_ledger):
    assert root.list_tlds(root_ledger.state) == []
    root_ledger.tx(acct("a"), RegisterTld("chain", spec("chain")))
    root_ledger.tx(acct("b"), RegisterTld("asset", spec("asset")))
    root_ledger.seal()
    listing = root.list_tlds(root_ledger.state)
    assert listing == [("asset", acct("b")), ("chain", acct("a"))]
    assert root.list_tlds(root_ledger.state) == listing


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(["aa", "bb", "cc", "dd"]), min_size=1, max_size=10), st.integers(0, 2**32))
def test_uniqueness_and_query_agreement(names, seed):
    led = Ledger(genesis_state("root"))
    owners = {}
    rng = random.Random(seed)
    for i, name in enumerate(names):
        who = acct(f"u{i}")
        led.tx(who, RegisterTld(name, spec(f"{name}-{i}")))
        owners.setdefault(name, (who, spec(f"{name}-{i}")))
        if rng.random() < 0.3:
            led.seal()
    led.seal()
    listing = root.list_tlds(led.state)
    assert len(listing) == len({n for n, _ in listing}) == len(owners)
    for name, (who, sp) in owners.items():
        assert root.query_tld(led.state, name) == sp
        assert root.get_tld_record(led.state, name).registrant == who
    for other in {"aa", "bb", "cc", "dd"} - set(owners):
        with pytest.raises(NotFound):
            root.query_tld(led.state, other)
