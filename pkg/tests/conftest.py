"""Shared helpers: hand-built engines, manual cc/exec harnesses and replay
shortcuts used across the suite."""
from __future__ import annotations

import pytest

from bohm.cc import CcWorker
from bohm.core import RecordKey, Transaction
from bohm.engine import BohmEngine
from bohm.execution import ExecWorker
from bohm.storage import Catalog


def make_keys(n, table="t"):
    return [RecordKey(table, i) for i in range(n)]


def load_catalog(keys, payload=bytes(16), table="t"):
    catalog = Catalog()
    catalog.load_table(table, keys, (payload for _ in keys), len(payload))
    return catalog


def increment_logic(vals):
    """Increment the first 8 bytes of every read value; write-keys == read-keys."""
    out = []
    for p in vals:
        out.append(
            ((int.from_bytes(p[:8], "little") + 1) & (2**64 - 1)).to_bytes(8, "little")
            + p[8:]
        )
    return out


def rmw_txn(keys, logic=increment_logic, tag="rmw"):
    return Transaction(tuple(keys), tuple(keys), logic, tag=tag)


class Harness:
    """Unstarted engine plus direct cc/exec workers, for driving individual
    operations without threads."""

    def __init__(self, catalog, cc_threads=1, exec_threads=1, **kw):
        kw.setdefault("debug", True)
        self.engine = BohmEngine(
            catalog, cc_threads=cc_threads, exec_threads=exec_threads, **kw
        )
        self.cc = [CcWorker(self.engine, i) for i in range(cc_threads)]
        self.exec = [ExecWorker(self.engine, i) for i in range(exec_threads)]

    def seal(self, txns, annotate=None):
        """Assign timestamps via the sequencer and return the batch."""
        annotate = self.engine.annotate_reads if annotate is None else annotate
        for t in txns:
            if annotate and t.read_refs is None:
                t.read_refs = [None] * len(t.read_keys)
            self.engine.log.enqueue(t)
        return self.engine.log.seal_batch(len(txns))

    def cc_pass(self, batch):
        for w in self.cc:
            w.process_batch(batch)
        return batch


@pytest.fixture
def harness():
    keys = make_keys(64)
    catalog = load_catalog(keys)
    h = Harness(catalog)
    h.keys = keys
    return h
