"""Single-threaded log construction: transactions are appended in arrival
order and receive their timestamp implicitly from their log position when a
batch is sealed. No shared counter is involved; re-running the sequencer over
the same arrival sequence yields identical (ts, batch) assignments.

Timestamps start at 1 so that bulk-loaded versions (begin_ts=0) are visible
to every transaction.
"""
from __future__ import annotations

import threading
from collections import deque

from .core import Batch
from .errors import EmptyLog, RejectedAfterShutdown


class LogState:
    """Mutable sequencer state. Only one thread may mutate it; with
    debug=True the owning thread identity is asserted on every call."""

    def __init__(self, start_ts: int = 1, debug: bool = False):
        self.next_ts = start_ts
        self.next_batch_id = 0
        self.pending = deque()
        self.draining = False
        self.sealed_txns = 0
        self._debug = debug
        self._owner = None

    def _check_owner(self):
        me = threading.get_ident()
        if self._owner is None:
            self._owner = me
        elif self._owner != me:
            raise AssertionError("LogState mutated from a second thread")

    def enqueue(self, txn) -> None:
        """Append txn to the pending buffer in arrival order (no timestamp yet)."""
        if self._debug:
            self._check_owner()
        if self.draining:
            raise RejectedAfterShutdown("engine is draining; transaction rejected")
        self.pending.append(txn)

    def seal_batch(self, batch_size: int, flush: bool = False) -> Batch:
        """Seal up to batch_size pending transactions into the next batch,
        assigning dense timestamps base_ts, base_ts+1, ...

        With flush=True (drain) an empty batch may be produced; otherwise an
        empty pending buffer raises EmptyLog.
        """
        if self._debug:
            self._check_owner()
        if not self.pending and not flush:
            raise EmptyLog("no pending transactions to seal")
        take = min(batch_size, len(self.pending))
        base = self.next_ts
        txns = []
        pop = self.pending.popleft
        for i in range(take):
            t = pop()
            t.ts = base + i
            txns.append(t)
        batch = Batch(self.next_batch_id, base, txns)
        self.next_ts = base + take
        self.next_batch_id += 1
        self.sealed_txns += take
        return batch
