"""Shared fixtures and builders for the simulator tests."""

from typing import Any, Dict, Optional, Tuple

import numpy as np
import pytest

from src.harness.runner import ScenarioRun, ScenarioRunner
from src.ledger.ground_truth import GroundTruth, TxRecord, TxRole
from src.ledger.ledger import AddressBook, Ledger
from src.ledger.models import Address, Amount, Transaction, TxKind, ZERO
from src.mixnet.cascade import MixNetwork
from src.network.p2p import BroadcastNetwork
from src.network.scheduler import Scheduler
from src.utils.config import build_config, deep_merge


QUIET = {'logging': {'console_output': False, 'level': 'WARNING'}}


def zec(value) -> Amount:
    return Amount.from_zec(value)


def scenario(overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Validated scenario with console logging off."""
    return build_config(deep_merge(QUIET, overrides or {}))


class Pool:
    """Small ledger builder: funded deposits and withdrawals with ground truth."""

    def __init__(self, seed: int = 0, ledger: Optional[Ledger] = None):
        self.ledger = ledger or Ledger()
        self.book = AddressBook(np.random.default_rng(seed))
        self.truth = GroundTruth()

    def deposit(self, value: Amount, at: int, second: Amount = ZERO, user: int = 0) -> Tuple[Transaction, Address, Address]:
        """TZ of value + second from a freshly funded t-address."""
        funding = self.book.transparent()
        self.ledger.fund(funding, value + second)
        z1, z2 = self.book.shielded(), self.book.shielded()
        tx = Transaction(self.book.tx_id(), TxKind.TZ, ((funding, value + second),), ((z1, value), (z2, second)), at)
        self.ledger.apply(tx, at)
        self.truth.register(TxRecord(tx.id, user, TxRole.DEPOSIT, naive=not second))
        return tx, z1, z2

    def withdraw(self, note: Address, value: Amount, at: int, user: int = 0) -> Transaction:
        tx = Transaction(self.book.tx_id(), TxKind.ZT, ((note, value),), ((self.book.transparent(), value),), at)
        self.ledger.apply(tx, at)
        self.truth.register(TxRecord(tx.id, user, TxRole.WITHDRAWAL))
        return tx

    def hop(self, note: Address, value: Amount, at: int, user: int = 0) -> Tuple[Transaction, Address]:
        target = self.book.shielded()
        tx = Transaction(self.book.tx_id(), TxKind.ZZ, ((note, value),), ((target, value),), at)
        self.ledger.apply(tx, at)
        self.truth.register(TxRecord(tx.id, user, TxRole.PRIVATE))
        return tx, target

    def sync(self) -> GroundTruth:
        self.truth.sync_links(self.ledger)
        return self.truth


class World:
    """Scheduler, ledger, P2P network and (optionally) a mix network wired together."""

    def __init__(self, config: Dict[str, Any]):
        self.config = config
        self.scheduler = Scheduler(config['scenario']['seed'])
        self.ledger = Ledger()
        self.truth = GroundTruth()
        self.book = AddressBook(self.scheduler.rng('ids'))
        self.network = BroadcastNetwork(self.ledger, self.scheduler, self.truth, self.book)
        self.mixnet = MixNetwork(config, self.scheduler, self.network) if config['mixnet']['enabled'] else None

    def funded(self, value: Amount) -> Address:
        address = self.book.transparent()
        self.ledger.fund(address, value)
        return address

    def payment(self, source: Address, value: Amount, user: int = 0) -> Transaction:
        """A TT from `source` to a fresh t-address, registered as user-originated."""
        tx = Transaction(
            self.book.tx_id(), TxKind.TT, ((source, value),), ((self.book.transparent(), value),), self.scheduler.now
        )
        self.truth.register(TxRecord(tx.id, user, TxRole.TRANSPARENT))
        return tx


@pytest.fixture
def pool() -> Pool:
    return Pool()


@pytest.fixture
def world_factory():
    def make(overrides: Optional[Dict[str, Any]] = None) -> World:
        return World(scenario(overrides))
    return make


ADVICE_BASE = {
    'scenario': {'id': 'naive', 'seed': 5},
    'workload': {'users': 100, 'values': {'min_zec': 1, 'max_zec': 500, 'unique': True}},
    'advisor': {'grid_zec': 1},
}

ADVICE_TREATMENT = deep_merge(ADVICE_BASE, {
    'scenario': {'id': 'advised'},
    'behavior': {'naive': 0.5, 'advised': 0.5},
})


@pytest.fixture(scope='session')
def advice_runs() -> Tuple[ScenarioRun, ScenarioRun]:
    """(baseline, treatment) runs sharing seed and workload; half the treatment users are advised."""
    baseline = ScenarioRunner(scenario(ADVICE_BASE)).run()
    treatment = ScenarioRunner(scenario(ADVICE_TREATMENT)).run()
    return baseline, treatment
