"""Concurrency-control layer: m long-lived threads. Each one scans every
transaction of a batch, annotates read references and installs placeholder
versions for the write-set keys in its partition, then joins a per-batch
barrier. The partition map never changes during a run, so every record is
always processed by the same thread and version-chain metadata needs no
locking at all.

Version reclamation also lives here: superseded versions are parked on the
owning thread's defer list and recycled between batches once the global low
watermark covers the superseding batch.
"""
from __future__ import annotations

from collections import deque

from .core import INFINITY, Version


def partition_of(key, m: int) -> int:
    """Deterministic partition index in [0, m): FNV-1a hash of (table, key)
    mod m. The hash is cached on the key object."""
    return key._hash % m


class PartitionMap:
    """Key -> cc-thread assignment, stable for the lifetime of a run.

    `assign` may be overridden (tests use forced assignments); the default
    is the FNV-1a mod-m rule.
    """

    def __init__(self, m: int, assign=None):
        if m < 1:
            raise ValueError("need at least one cc partition")
        self.m = m
        self._assign = assign

    def partition_of(self, key) -> int:
        if self._assign is not None:
            return self._assign(key)
        return key._hash % self.m


class CcWorker:
    """State owned by one concurrency-control thread.

    `latest` is the thread-local map from owned keys to their chain heads
    (warmed lazily from the table index); `defer_list` holds superseded
    versions awaiting reclamation, in superseding-batch order.
    """

    def __init__(self, engine, idx: int):
        self.engine = engine
        self.idx = idx
        self.latest = {}
        self.defer_list = deque()
        self.reclaimed = 0
        self.installed = 0

    # -- per-key operations -------------------------------------------------

    def annotate_read(self, key, txn, slot: int) -> None:
        """Record a reference to the version txn will read, in the slot
        reserved inside the transaction. Nothing shared is mutated and the
        read is not tracked anywhere; an absent key leaves the slot None."""
        instr = self.engine.instr
        if instr.enabled:
            instr.enter_read()
        head = self.latest.get(key)
        if head is None:
            head = self.engine.catalog.tables[key.table].get(key)
        txn.read_refs[slot] = head
        if instr.enabled:
            instr.exit_read()

    def install_placeholder(self, key, txn, slot: int, batch_id: int) -> Version:
        """Create the placeholder version for txn's write of key: begin_ts =
        txn.ts, end_ts = INFINITY, payload unpublished, prev = old head. The
        old head (if any) gets end_ts = txn.ts and, with GC on, is parked on
        the defer list tagged with the superseding batch id."""
        engine = self.engine
        old = self.latest.get(key)
        index = engine.catalog.tables[key.table]
        if old is None:
            old = index.get(key)
        v = Version(txn.ts, INFINITY, producer=txn, prev=old)
        # Swap the index head before expiring the old version so concurrent
        # lookups always see a head with end_ts == INFINITY (readers select
        # by begin_ts, so the transient open end of the old version is
        # harmless: no reader with ts < txn.ts is affected and none with
        # ts >= txn.ts exists until this batch is released).
        index.install(key, v, engine.instr if engine.debug else None)
        if old is not None:
            old.end_ts = txn.ts
            if engine.gc_enabled:
                self.defer_list.append((old, v, batch_id))
        self.latest[key] = v
        txn.write_refs[slot] = v
        self.installed += 1
        return v

    # -- per-batch operations -----------------------------------------------

    def process_batch(self, batch) -> None:
        """Scan every transaction of the batch in timestamp order. Reads are
        annotated before the same transaction's placeholders are installed so
        an RMW's read ref points at its predecessor version."""
        my = self.idx
        pm = self.engine.partition_map
        assign = pm._assign
        m = pm.m
        annotate = self.engine.annotate_reads
        bid = batch.id
        for txn in batch.txns:
            if annotate:
                for slot, key in enumerate(txn.read_keys):
                    p = assign(key) if assign is not None else key._hash % m
                    if p == my:
                        self.annotate_read(key, txn, slot)
            for slot, key in enumerate(txn.write_keys):
                p = assign(key) if assign is not None else key._hash % m
                if p == my:
                    self.install_placeholder(key, txn, slot, bid)

    def reclaim(self, low_watermark: int) -> int:
        """Recycle every deferred version whose superseding batch id is at or
        below the low watermark: truncate the successor's prev link so the
        chain ends at the oldest retained version, and poison the detached
        version so debug builds catch any late access. Returns the count."""
        dl = self.defer_list
        n = 0
        while dl and dl[0][2] <= low_watermark:
            old, successor, _ = dl.popleft()
            successor.prev = None
            old.poisoned = True
            old.payload = None
            old.prev = None
            n += 1
        self.reclaimed += n
        return n

    # -- thread body ----------------------------------------------------------

    def run(self) -> None:
        engine = self.engine
        queue = engine.cc_queues[self.idx]
        barrier = engine.cc_barrier
        while True:
            batch = queue.get()
            if batch is None:
                break
            self.process_batch(batch)
            arrival = barrier.wait()
            if arrival == 0:
                # Exactly one thread publishes the batch to the execution layer.
                for eq in engine.exec_queues:
                    eq.put(batch)
            if engine.gc_enabled:
                self.reclaim(engine.watermark.low_watermark)
