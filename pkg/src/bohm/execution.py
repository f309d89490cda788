"""Execution layer: n threads evaluate transaction logic, resolve reads
against annotated references or version chains, recursively execute
dependencies, publish write payloads into placeholders, and drive the
watermark used for garbage collection.

Execution threads never mutate version metadata or index structure -- only
the payload/published/producer fields of placeholders whose producing
transaction they won via try_acquire. Reads mutate nothing shared at all.
"""
from __future__ import annotations

import time

from .core import COMPLETE, UNPROCESSED, try_acquire

# Scheduling signals returned by execute(); DEFERRED is not a failure, it
# means the transaction was reset to UNPROCESSED and must be retried later.
EXECUTED = 0
DEFERRED = 1


class WatermarkState:
    """Per-exec-thread last-finished-batch counters plus the derived global
    low watermark. batch_done[i] is written only by exec thread i; the low
    watermark is refreshed only by the designated thread (exec thread 0)."""

    def __init__(self, n_exec: int):
        self.batch_done = [-1] * n_exec
        self.low_watermark = -1

    def gc_tick(self) -> int:
        self.low_watermark = min(self.batch_done)
        return self.low_watermark


class ExecWorker:
    """State owned by one execution thread."""

    def __init__(self, engine, idx: int):
        self.engine = engine
        self.idx = idx
        self.committed = 0
        self.ops = 0
        self.deferred = 0
        self.aborted = 0

    # -- reads ----------------------------------------------------------------

    def resolve_read(self, txn, slot: int, key):
        """The version txn reads for `key`, or None for NotFound.

        Annotated path: the reference recorded by the cc layer. Traversal
        path: walk the chain from the index head past every version with
        begin_ts >= txn.ts; the first version below that is the unique
        visible one (its end_ts is >= txn.ts by chain continuity, with
        equality exactly when txn itself overwrote the key -- the boundary
        tie-break that makes an RMW read its predecessor). Performs zero
        shared mutations.
        """
        engine = self.engine
        debug = engine.debug
        if debug:
            engine.instr.enter_read()
        refs = txn.read_refs
        if refs is not None:
            v = refs[slot]
        else:
            v = engine.catalog.tables[key.table].get(key)
            ts = txn.ts
            while v is not None and v.begin_ts >= ts:
                v = v.prev
        if debug:
            engine.instr.exit_read()
            engine.instr.check_not_poisoned(v)
        return v

    def await_payload(self, version, depth: int) -> int:
        """Block until `version` is published, recursively executing its
        producer when possible.

        Returns EXECUTED once the payload is readable. Returns DEFERRED when
        the producer is being executed by another thread (or the recursion
        budget is exhausted); the caller then resets its transaction to
        UNPROCESSED and retries later.
        """
        spin_budget = self.engine.spin_budget
        while True:
            if version.published:
                return EXECUTED
            producer = version.producer
            if producer is None:
                # Producer is cleared only after the published flag is set.
                continue
            if producer.state == COMPLETE:
                # Publication happens before the state flips to COMPLETE;
                # bounded spin covers the hand-off window.
                spins = 0
                while not version.published:
                    spins += 1
                    if spins > spin_budget:
                        time.sleep(0)
                return EXECUTED
            if depth >= self.engine.max_recursion:
                return DEFERRED
            if try_acquire(producer):
                if self.execute(producer, depth + 1) == DEFERRED:
                    return DEFERRED
                # executed: our version is now published; loop re-checks
            elif producer.state != COMPLETE:
                return DEFERRED

    # -- writes ---------------------------------------------------------------

    def abort_copy_forward(self, txn) -> None:
        """Publish each placeholder with its predecessor's payload (tombstone
        when there is none), so downstream readers observe values as if the
        logically-aborted transaction wrote nothing."""
        for v in txn.write_refs:
            prev = v.prev
            if prev is None or prev.tombstone:
                v.publish(None, tombstone=True)
            else:
                v.publish(prev.payload)
        self.aborted += 1

    def execute(self, txn, depth: int) -> int:
        """Run one acquired transaction to completion or deferral.

        All reads are resolved first; write payloads exist only in the
        logic's return value until every read has succeeded, so a deferral
        is side-effect free and no placeholder is ever partially published.
        """
        read_keys = txn.read_keys
        vals = [None] * len(read_keys)
        refs = txn.read_refs
        fast = refs is not None and not self.engine.debug
        for slot, key in enumerate(read_keys):
            # Annotated fast path == resolve_read's annotated branch.
            v = refs[slot] if fast else self.resolve_read(txn, slot, key)
            if v is not None:
                if not v.published and self.await_payload(v, depth) == DEFERRED:
                    txn.state = UNPROCESSED
                    txn.run_lock.release()
                    self.deferred += 1
                    return DEFERRED
                if not v.tombstone:
                    vals[slot] = v.payload
        if self.engine.record_reads:
            txn.read_digest = hash(tuple(vals))
        outs = txn.logic(vals)
        if outs is None:
            self.abort_copy_forward(txn)
        else:
            refs = txn.write_refs
            for slot, payload in enumerate(outs):
                refs[slot].publish(payload)
        txn.state = COMPLETE
        txn.run_lock.release()
        self.committed += 1
        self.ops += txn.n_ops
        return EXECUTED

    # -- per-batch loop ---------------------------------------------------------

    def process_batch(self, batch) -> None:
        """Drive transactions batch.txns[idx::k] until each is COMPLETE,
        cycling round-robin over deferred ones. Other threads may execute our
        transactions (and we theirs, via recursion); we only need to observe
        completion before moving on."""
        todo = batch.txns[self.idx :: self.engine.n_exec]
        while todo:
            remaining = []
            append = remaining.append
            for txn in todo:
                if txn.state == COMPLETE:
                    continue
                if try_acquire(txn):
                    if self.execute(txn, 0) == DEFERRED:
                        append(txn)
                elif txn.state != COMPLETE:
                    append(txn)
            todo = remaining
            if todo:
                # Whatever remains is blocked on work in flight elsewhere;
                # yield so those threads can finish it.
                time.sleep(0)

    # -- thread body --------------------------------------------------------------

    def run(self) -> None:
        engine = self.engine
        queue = engine.exec_queues[self.idx]
        wm = engine.watermark
        while True:
            batch = queue.get()
            if batch is None:
                break
            self.process_batch(batch)
            wm.batch_done[self.idx] = batch.id
            if self.idx == 0 and engine.gc_enabled:
                wm.gc_tick()
