import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from chaindns.calls import Transaction
from chaindns.ledger import execute_block, genesis_state
from chaindns.state import account_nonce
from chaindns.types import AccountId, ChainSpec, NodeId, worker_account

DATA = Path(__file__).parent / "data"


def acct(name: str) -> AccountId:
    return AccountId.derive(name)


def node(name: str) -> NodeId:
    return NodeId.derive(name)


def spec(name: str, payload: bytes = b"{}") -> ChainSpec:
    return ChainSpec(name, f"net-{name}", payload)


AUTHOR = node("author")
WORKER = worker_account(AUTHOR)


class Ledger:
    """Tiny driver: queue calls per origin with correct nonces, seal blocks."""

    def __init__(self, state):
        self.state = state
        self.number = 0
        self.queue = []
        self.last = None

    def tx(self, origin, call, fee=1, nonce=None):
        if nonce is None:
            queued = sum(1 for t in self.queue if t.origin == origin)
            nonce = account_nonce(self.state, origin) + queued
        t = Transaction(origin, nonce, call, fee)
        self.queue.append(t)
        return t

    def seal(self, author=AUTHOR):
        self.number += 1
        self.state, included, rejected = execute_block(self.state, self.number, author, self.queue)
        self.queue = []
        self.last = (included, rejected)
        return {r.tx_hash: r.error for r in rejected}


@pytest.fixture
def root_ledger():
    return Ledger(genesis_state("root"))


@pytest.fixture
def tld_ledger():
    return Ledger(genesis_state("tld", tld_name="chain"))


# acceptance reporting: one line per criterion in the terminal summary
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        line = f"[{'PASS' if ok else 'FAIL'}] {n}. {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
